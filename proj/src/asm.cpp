#include "comet/asm.hpp"

#include <cctype>
#include <charconv>
#include <limits>

#include "comet/error.hpp"

namespace comet {

int immediate_width(std::int64_t value) {
  for (int w : {8, 16, 32}) {
    const std::int64_t smin = -(std::int64_t{1} << (w - 1));
    const std::int64_t umax = (std::int64_t{1} << w) - 1;
    if (value >= smin && value <= umax) return w;
  }
  return 64;
}

Operand Operand::imm(std::int64_t v) { return {ImmOperand{v, immediate_width(v)}}; }

namespace {

struct Token {
  enum class Kind { Word, Number, Punct, End } kind = Kind::End;
  std::string text;
  std::int64_t number = 0;
  int column = 0;
};

class Lexer {
 public:
  Lexer(std::string_view line, int line_no) : line_(line), line_no_(line_no) { advance(); }

  const Token& peek() const { return current_; }

  Token next() {
    Token t = current_;
    advance();
    return t;
  }

  [[noreturn]] void fail(const std::string& what, int column) const {
    throw ParseError(ParseError::Kind::Lexical, line_no_, column, what);
  }

 private:
  void advance() {
    while (pos_ < line_.size() && std::isspace(static_cast<unsigned char>(line_[pos_]))) ++pos_;
    current_ = Token{};
    current_.column = static_cast<int>(pos_) + 1;
    if (pos_ >= line_.size()) return;
    const char c = line_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '.') {
      std::size_t start = pos_;
      while (pos_ < line_.size() &&
             (std::isalnum(static_cast<unsigned char>(line_[pos_])) || line_[pos_] == '_' ||
              line_[pos_] == '.'))
        ++pos_;
      current_.kind = Token::Kind::Word;
      for (char ch : line_.substr(start, pos_ - start))
        current_.text.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      int base = 10;
      if (c == '0' && pos_ + 1 < line_.size() && (line_[pos_ + 1] == 'x' || line_[pos_ + 1] == 'X')) {
        base = 16;
        pos_ += 2;
        start = pos_;
      }
      while (pos_ < line_.size() && std::isxdigit(static_cast<unsigned char>(line_[pos_]))) ++pos_;
      std::uint64_t v = 0;
      auto [p, ec] = std::from_chars(line_.data() + start, line_.data() + pos_, v, base);
      if (ec != std::errc() || p != line_.data() + pos_ || start == pos_)
        fail("malformed number", current_.column);
      if (pos_ < line_.size() && std::isalpha(static_cast<unsigned char>(line_[pos_])))
        fail("malformed number", current_.column);
      current_.kind = Token::Kind::Number;
      current_.number = static_cast<std::int64_t>(v);
      current_.text = std::string(line_.substr(start, pos_ - start));
      return;
    }
    if (c == ',' || c == '[' || c == ']' || c == '+' || c == '-' || c == '*') {
      current_.kind = Token::Kind::Punct;
      current_.text = std::string(1, c);
      ++pos_;
      return;
    }
    fail(std::string("unexpected character '") + c + "'", current_.column);
  }

  std::string_view line_;
  int line_no_;
  std::size_t pos_ = 0;
  Token current_;
};

int size_keyword(const std::string& w) {
  if (w == "byte") return 8;
  if (w == "word") return 16;
  if (w == "dword") return 32;
  if (w == "qword") return 64;
  if (w == "xmmword") return 128;
  if (w == "ymmword") return 256;
  if (w == "zmmword") return 512;
  return 0;
}

struct RawOperand {
  Operand op;
  bool width_pending = false;  // memory operand without a `ptr` prefix
  int column = 0;
};

class InstructionParser {
 public:
  InstructionParser(std::string_view line, const IsaKb& kb, int line_no)
      : lex_(line, line_no), kb_(kb), line_no_(line_no) {}

  Instruction parse(std::string_view source) {
    Token m = lex_.next();
    if (m.kind != Token::Kind::Word) lex_.fail("expected a mnemonic", m.column);
    Instruction instr;
    instr.mnemonic = m.text;
    instr.source_text = std::string(source);

    std::vector<RawOperand> raw;
    if (lex_.peek().kind != Token::Kind::End) {
      raw.push_back(operand());
      while (lex_.peek().kind == Token::Kind::Punct && lex_.peek().text == ",") {
        lex_.next();
        raw.push_back(operand());
      }
    }
    if (lex_.peek().kind != Token::Kind::End) lex_.fail("unexpected '" + lex_.peek().text + "'", lex_.peek().column);

    // An unsized memory operand takes the width of the first register operand.
    int default_width = 0;
    for (const auto& r : raw)
      if (r.op.is_reg()) {
        default_width = kb_.find_register(r.op.as_reg().name)->width_bits;
        break;
      }
    for (auto& r : raw) {
      if (r.width_pending) {
        if (default_width == 0)
          throw ParseError(ParseError::Kind::InvalidOperands, line_no_, r.column,
                           "ambiguous memory operand size; add a `<size> ptr` prefix");
        r.op.as_mem().width_bits = default_width;
      }
      instr.operands.push_back(std::move(r.op));
    }
    return instr;
  }

 private:
  RawOperand operand() {
    Token t = lex_.peek();
    RawOperand out;
    out.column = t.column;
    if (t.kind == Token::Kind::Word) {
      if (int w = size_keyword(t.text)) {
        lex_.next();
        Token p = lex_.next();
        if (p.kind != Token::Kind::Word || p.text != "ptr") lex_.fail("expected 'ptr'", p.column);
        MemOperand m = address();
        m.width_bits = w;
        m.sized = true;
        out.op = Operand::mem(std::move(m));
        return out;
      }
      lex_.next();
      if (!kb_.find_register(t.text)) lex_.fail("unknown register or symbol '" + t.text + "'", t.column);
      out.op = Operand::reg(t.text);
      return out;
    }
    if (t.kind == Token::Kind::Punct && t.text == "[") {
      out.op = Operand::mem(address());
      out.width_pending = true;
      return out;
    }
    if (t.kind == Token::Kind::Number || (t.kind == Token::Kind::Punct && t.text == "-")) {
      out.op = Operand::imm(signed_number());
      return out;
    }
    lex_.fail("expected an operand", t.column);
  }

  std::int64_t signed_number() {
    bool neg = false;
    if (lex_.peek().kind == Token::Kind::Punct && lex_.peek().text == "-") {
      lex_.next();
      neg = true;
    }
    Token n = lex_.next();
    if (n.kind != Token::Kind::Number) lex_.fail("expected a number", n.column);
    return neg ? -n.number : n.number;
  }

  void place_register(MemOperand& m, const std::string& reg, int scale, bool explicit_scale, int column) {
    if (!kb_.find_register(reg)) lex_.fail("unknown register '" + reg + "'", column);
    if (!explicit_scale && !m.base) {
      m.base = reg;
      return;
    }
    if (m.index) lex_.fail("too many registers in address", column);
    if (scale != 1 && scale != 2 && scale != 4 && scale != 8) lex_.fail("scale must be 1, 2, 4 or 8", column);
    m.index = reg;
    m.scale = scale;
  }

  MemOperand address() {
    Token open = lex_.next();
    if (open.kind != Token::Kind::Punct || open.text != "[") lex_.fail("expected '['", open.column);
    MemOperand m;
    bool negative = false;
    bool first = true;
    // Deferred: a bare register seen before an explicit `reg*scale` term is the base.
    while (true) {
      Token t = lex_.peek();
      if (!first) {
        if (t.kind == Token::Kind::Punct && t.text == "]") {
          lex_.next();
          break;
        }
        if (t.kind != Token::Kind::Punct || (t.text != "+" && t.text != "-"))
          lex_.fail("expected '+', '-' or ']'", t.column);
        negative = t.text == "-";
        lex_.next();
        t = lex_.peek();
      } else if (t.kind == Token::Kind::Punct && t.text == "-") {
        negative = true;
        lex_.next();
        t = lex_.peek();
      }
      first = false;

      if (t.kind == Token::Kind::Word) {
        lex_.next();
        if (negative) lex_.fail("registers cannot be subtracted", t.column);
        if (lex_.peek().kind == Token::Kind::Punct && lex_.peek().text == "*") {
          lex_.next();
          Token s = lex_.next();
          if (s.kind != Token::Kind::Number) lex_.fail("expected a scale", s.column);
          place_register(m, t.text, static_cast<int>(s.number), true, t.column);
        } else {
          place_register(m, t.text, 1, false, t.column);
        }
      } else if (t.kind == Token::Kind::Number) {
        lex_.next();
        if (lex_.peek().kind == Token::Kind::Punct && lex_.peek().text == "*") {
          lex_.next();
          Token r = lex_.next();
          if (r.kind != Token::Kind::Word || negative) lex_.fail("expected a register after '*'", r.column);
          place_register(m, r.text, static_cast<int>(t.number), true, r.column);
        } else {
          m.displacement += negative ? -t.number : t.number;
        }
      } else {
        lex_.fail("expected a register or displacement", t.column);
      }
    }
    // `[rax*1 + rbx]` style: an index without a base is promoted when a later
    // bare register would otherwise be lost; normalize single index scale 1 to base.
    if (!m.base && m.index && m.scale == 1) {
      m.base = m.index;
      m.index.reset();
    }
    return m;
  }

  Lexer lex_;
  const IsaKb& kb_;
  int line_no_;
};

std::string_view strip_comment(std::string_view line) {
  if (auto pos = line.find(';'); pos != std::string_view::npos) line = line.substr(0, pos);
  while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.remove_suffix(1);
  while (!line.empty() && std::isspace(static_cast<unsigned char>(line.front()))) line.remove_prefix(1);
  return line;
}

void check_valid(const Instruction& instr, const IsaKb& kb, int line_no) {
  const OpcodeSpec* spec = kb.find_opcode(instr.mnemonic);
  if (!spec)
    throw ParseError(ParseError::Kind::UnknownMnemonic, line_no, 1,
                     "unknown mnemonic '" + instr.mnemonic + "'");
  if (!spec->bb_valid)
    throw ParseError(ParseError::Kind::InvalidOperands, line_no, 1,
                     "'" + instr.mnemonic + "' is not allowed inside a basic block");
  if (!kb.match_form(instr.mnemonic, instr.operands))
    throw ParseError(ParseError::Kind::InvalidOperands, line_no, 1,
                     "invalid operand combination for '" + instr.mnemonic + "'");
}

}  // namespace

Instruction parse_instruction(std::string_view line, const IsaKb& kb, int line_no) {
  std::string_view body = strip_comment(line);
  if (body.empty()) throw ParseError(ParseError::Kind::EmptyBlock, line_no, 0, "empty instruction");
  Instruction instr = InstructionParser(body, kb, line_no).parse(body);
  check_valid(instr, kb, line_no);
  return instr;
}

BasicBlock parse_lines(const std::vector<std::string>& lines, const IsaKb& kb) {
  std::vector<Instruction> out;
  int line_no = 0;
  for (const auto& line : lines) {
    ++line_no;
    std::string_view body = strip_comment(line);
    if (body.empty()) continue;
    out.push_back(parse_instruction(body, kb, line_no));
  }
  if (out.empty()) throw ParseError(ParseError::Kind::EmptyBlock, 0, 0, "empty basic block");
  return BasicBlock(std::move(out));
}

BasicBlock parse_block(std::string_view text, const IsaKb& kb) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view l = text.substr(start, end - start);
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    lines.emplace_back(l);
    start = end + 1;
  }
  return parse_lines(lines, kb);
}

std::string render_address(const MemOperand& m) {
  std::string out = "[";
  bool any = false;
  if (m.base) {
    out += *m.base;
    any = true;
  }
  if (m.index) {
    if (any) out += " + ";
    out += *m.index;
    if (m.scale != 1) out += "*" + std::to_string(m.scale);
    any = true;
  }
  if (m.displacement != 0 || !any) {
    if (!any) {
      out += std::to_string(m.displacement);
    } else if (m.displacement < 0) {
      out += " - " + std::to_string(-m.displacement);
    } else {
      out += " + " + std::to_string(m.displacement);
    }
  }
  return out + "]";
}

std::string render_operand(const Operand& op) {
  if (op.is_reg()) return op.as_reg().name;
  if (op.is_imm()) return std::to_string(op.as_imm().value);
  const auto& m = op.as_mem();
  if (!m.sized) return render_address(m);
  const char* size = "";
  switch (m.width_bits) {
    case 8: size = "byte"; break;
    case 16: size = "word"; break;
    case 32: size = "dword"; break;
    case 64: size = "qword"; break;
    case 128: size = "xmmword"; break;
    case 256: size = "ymmword"; break;
    default: size = "zmmword"; break;
  }
  return std::string(size) + " ptr " + render_address(m);
}

std::string render_instruction(const Instruction& instr) {
  std::string out = instr.mnemonic;
  for (std::size_t i = 0; i < instr.operands.size(); ++i) {
    out += i == 0 ? " " : ", ";
    out += render_operand(instr.operands[i]);
  }
  return out;
}

std::string render_block(const BasicBlock& bb) {
  std::string out;
  for (const auto& instr : bb.instructions()) {
    out += render_instruction(instr);
    out += '\n';
  }
  return out;
}

}  // namespace comet
