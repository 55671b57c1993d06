#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "comet/isa.hpp"

namespace comet {

struct RegOperand {
  std::string name;
  bool operator==(const RegOperand&) const = default;
};

struct MemOperand {
  std::optional<std::string> base;
  std::optional<std::string> index;
  int scale = 1;
  std::int64_t displacement = 0;
  int width_bits = 64;
  // Whether the source spelled out a `<size> ptr` prefix. Kept so rendering
  // reproduces the input shape.
  bool sized = false;

  bool operator==(const MemOperand&) const = default;
};

struct ImmOperand {
  std::int64_t value = 0;
  int width_bits = 8;  // smallest of 8/16/32/64 that holds the value
  bool operator==(const ImmOperand&) const = default;
};

struct Operand {
  std::variant<RegOperand, MemOperand, ImmOperand> value;

  static Operand reg(std::string name) { return {RegOperand{std::move(name)}}; }
  static Operand imm(std::int64_t v);
  static Operand mem(MemOperand m) { return {std::move(m)}; }

  bool is_reg() const { return std::holds_alternative<RegOperand>(value); }
  bool is_mem() const { return std::holds_alternative<MemOperand>(value); }
  bool is_imm() const { return std::holds_alternative<ImmOperand>(value); }
  const RegOperand& as_reg() const { return std::get<RegOperand>(value); }
  const MemOperand& as_mem() const { return std::get<MemOperand>(value); }
  const ImmOperand& as_imm() const { return std::get<ImmOperand>(value); }
  RegOperand& as_reg() { return std::get<RegOperand>(value); }
  MemOperand& as_mem() { return std::get<MemOperand>(value); }

  bool operator==(const Operand&) const = default;
};

int immediate_width(std::int64_t value);

struct Instruction {
  std::string mnemonic;
  std::vector<Operand> operands;
  std::string source_text;

  // Structural equality: source_text is not part of identity.
  bool operator==(const Instruction& o) const {
    return mnemonic == o.mnemonic && operands == o.operands;
  }
};

class BasicBlock {
 public:
  BasicBlock() = default;
  explicit BasicBlock(std::vector<Instruction> instructions)
      : instructions_(std::move(instructions)) {}

  const std::vector<Instruction>& instructions() const { return instructions_; }
  std::vector<Instruction>& instructions() { return instructions_; }
  std::size_t size() const { return instructions_.size(); }
  bool empty() const { return instructions_.empty(); }
  const Instruction& operator[](std::size_t i) const { return instructions_[i]; }

  bool operator==(const BasicBlock&) const = default;

 private:
  std::vector<Instruction> instructions_;
};

/// Parses Intel-syntax text, one instruction per non-blank line, `;` comments.
/// Every instruction is validated against `kb`.
BasicBlock parse_block(std::string_view text, const IsaKb& kb);

/// Parses a single instruction without block-level checks (line 1).
Instruction parse_instruction(std::string_view line, const IsaKb& kb, int line_no = 1);

BasicBlock parse_lines(const std::vector<std::string>& lines, const IsaKb& kb);

std::string render_operand(const Operand& op);
std::string render_instruction(const Instruction& instr);

/// Canonical text: lowercase, one instruction per line, trailing newline.
std::string render_block(const BasicBlock& bb);

// Address part of a memory operand without the size prefix, e.g. "[rbp + rax - 1]".
std::string render_address(const MemOperand& m);

}  // namespace comet
