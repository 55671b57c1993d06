#include "comet/isa.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "comet/asm.hpp"
#include "comet/error.hpp"

namespace comet {

using nlohmann::json;

namespace {

bool power_of_two_width(int w) {
  return w >= 8 && w <= 512 && (w & (w - 1)) == 0;
}

void reject_unknown(const json& obj, std::initializer_list<std::string_view> known,
                    const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw KbError(where + ": unknown field '" + key + "'");
  }
}

template <typename T>
T required(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw KbError(where + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw KbError(where + ": field '" + key + "' has the wrong type");
  }
}

SlotKind parse_slot_kind(const std::string& s, const std::string& where) {
  if (s == "register") return SlotKind::Register;
  if (s == "memory") return SlotKind::Memory;
  if (s == "immediate") return SlotKind::Immediate;
  if (s == "address") return SlotKind::Address;
  throw KbError(where + ": unknown operand kind '" + s + "'");
}

Access parse_access(const std::string& s, const std::string& where) {
  if (s == "read") return Access::Read;
  if (s == "write") return Access::Write;
  if (s == "readwrite") return Access::ReadWrite;
  throw KbError(where + ": unknown access '" + s + "'");
}

bool fits_signed_or_unsigned(std::int64_t v, int width) {
  if (width >= 64) return true;
  const std::int64_t smin = -(std::int64_t{1} << (width - 1));
  const std::int64_t umax = (std::int64_t{1} << width) - 1;
  return v >= smin && v <= umax;
}

int register_width(const IsaKb& kb, const std::string& name) {
  const RegisterSpec* r = kb.find_register(name);
  return r ? r->width_bits : -1;
}

// Operand shape + slot-kind compatibility used by the shape-based replacement query.
bool slot_accepts_shape(const OperandSlot& slot, const OperandShape& shape) {
  switch (shape.kind) {
    case OperandShape::Kind::Register:
      return slot.kind == SlotKind::Register && slot.width_bits == shape.width_bits;
    case OperandShape::Kind::Memory:
      return (slot.kind == SlotKind::Memory || slot.kind == SlotKind::Address) &&
             slot.width_bits == shape.width_bits;
    case OperandShape::Kind::Immediate:
      return slot.kind == SlotKind::Immediate && slot.width_bits >= shape.width_bits;
  }
  return false;
}

template <typename Accept>
const OpcodeForm* first_form(const OpcodeSpec& spec, std::size_t arity, Accept&& accept) {
  for (const auto& form : spec.forms) {
    if (form.slots.size() != arity) continue;
    bool ok = true;
    for (std::size_t i = 0; i < arity && ok; ++i) ok = accept(form.slots[i], i);
    if (ok) return &form;
  }
  return nullptr;
}

bool same_slot_kinds(const OpcodeForm& a, const OpcodeForm& b) {
  if (a.slots.size() != b.slots.size()) return false;
  for (std::size_t i = 0; i < a.slots.size(); ++i)
    if (a.slots[i].kind != b.slots[i].kind) return false;
  return true;
}

}  // namespace

std::string_view to_string(SlotKind kind) {
  switch (kind) {
    case SlotKind::Register: return "register";
    case SlotKind::Memory: return "memory";
    case SlotKind::Immediate: return "immediate";
    case SlotKind::Address: return "address";
  }
  return "?";
}

std::string_view to_string(Access access) {
  switch (access) {
    case Access::Read: return "read";
    case Access::Write: return "write";
    case Access::ReadWrite: return "readwrite";
  }
  return "?";
}

const OpcodeSpec* IsaKb::find_opcode(std::string_view mnemonic) const {
  auto it = opcodes_.find(mnemonic);
  return it == opcodes_.end() ? nullptr : &it->second;
}

const RegisterSpec* IsaKb::find_register(std::string_view name) const {
  auto it = register_index_.find(name);
  return it == register_index_.end() ? nullptr : &registers_[it->second];
}

const std::string& IsaKb::family_of(std::string_view reg) const {
  const RegisterSpec* r = find_register(reg);
  if (!r) throw KbError("unknown register '" + std::string(reg) + "'");
  return r->family;
}

bool slot_accepts(const OperandSlot& slot, const Operand& op, const IsaKb& kb) {
  if (op.is_reg()) {
    return slot.kind == SlotKind::Register &&
           register_width(kb, op.as_reg().name) == slot.width_bits;
  }
  if (op.is_mem()) {
    return (slot.kind == SlotKind::Memory || slot.kind == SlotKind::Address) &&
           op.as_mem().width_bits == slot.width_bits;
  }
  return slot.kind == SlotKind::Immediate &&
         fits_signed_or_unsigned(op.as_imm().value, slot.width_bits);
}

const OpcodeForm* IsaKb::match_form(std::string_view mnemonic,
                                    const std::vector<Operand>& operands) const {
  const OpcodeSpec* spec = find_opcode(mnemonic);
  if (!spec) return nullptr;
  return first_form(*spec, operands.size(), [&](const OperandSlot& slot, std::size_t i) {
    return slot_accepts(slot, operands[i], *this);
  });
}

const OpcodeForm& IsaKb::form_of(const Instruction& instr) const {
  const OpcodeForm* form = match_form(instr.mnemonic, instr.operands);
  if (!form) throw KbError("no form of '" + instr.mnemonic + "' accepts '" +
                           render_instruction(instr) + "'");
  return *form;
}

IsaKb IsaKb::build(std::string version, bool track_flags, std::vector<RegisterSpec> registers,
                   std::vector<std::pair<std::string, bool>> mnemonic_validity,
                   std::vector<std::pair<std::string, OpcodeForm>> forms) {
  IsaKb kb;
  kb.version_ = std::move(version);
  kb.track_flags_ = track_flags;

  std::map<std::string, std::set<int>> family_widths;
  for (std::size_t i = 0; i < registers.size(); ++i) {
    const auto& r = registers[i];
    const std::string where = "register '" + r.name + "'";
    if (r.name.empty() || r.family.empty()) throw KbError(where + ": empty name or family");
    if (!power_of_two_width(r.width_bits)) throw KbError(where + ": width must be a power of two in [8, 512]");
    if (!kb.register_index_.emplace(r.name, i).second) throw KbError(where + ": duplicate register");
    if (!family_widths[r.family].insert(r.width_bits).second)
      throw KbError(where + ": family '" + r.family + "' already has a register of this width");
  }
  kb.registers_ = std::move(registers);

  for (auto& [mnemonic, valid] : mnemonic_validity) {
    auto [it, inserted] = kb.opcodes_.try_emplace(mnemonic, OpcodeSpec{mnemonic, valid, {}});
    if (!inserted && it->second.bb_valid != valid)
      throw KbError("opcode '" + mnemonic + "': inconsistent bb_valid across forms");
  }
  for (auto& [mnemonic, form] : forms) {
    const std::string where = "opcode '" + mnemonic + "'";
    auto it = kb.opcodes_.find(mnemonic);
    if (it == kb.opcodes_.end()) throw KbError(where + ": no validity declared");
    for (const auto& slot : form.slots)
      if (!power_of_two_width(slot.width_bits))
        throw KbError(where + ": slot width must be a power of two in [8, 512]");
    for (const auto* list : {&form.implicit_reads, &form.implicit_writes})
      for (const auto& name : *list)
        if (!kb.find_register(name))
          throw KbError(where + ": implicit register '" + name + "' is not defined");
    for (const auto& [march, tp] : form.throughput)
      if (!(tp > 0.0)) throw KbError(where + ": throughput for '" + march + "' must be > 0");
    if (!kb.track_flags_) {
      auto strip = [&](std::vector<std::string>& v) {
        std::erase_if(v, [&](const std::string& n) { return kb.family_of(n) == "rflags"; });
      };
      strip(form.implicit_reads);
      strip(form.implicit_writes);
    }
    it->second.forms.push_back(std::move(form));
  }
  return kb;
}

IsaKb parse_kb(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw KbError(std::string("KB is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw KbError("KB root must be an object");
  reject_unknown(doc, {"version", "track_flags", "registers", "opcodes"}, "KB");

  auto version = required<std::string>(doc, "version", "KB");
  bool track_flags = doc.value("track_flags", false);

  std::vector<RegisterSpec> registers;
  for (const auto& r : required<json>(doc, "registers", "KB")) {
    const std::string where = "registers[" + std::to_string(registers.size()) + "]";
    if (!r.is_object()) throw KbError(where + ": must be an object");
    reject_unknown(r, {"name", "width_bits", "family", "substitutable"}, where);
    registers.push_back({required<std::string>(r, "name", where), required<int>(r, "width_bits", where),
                         required<std::string>(r, "family", where),
                         required<bool>(r, "substitutable", where)});
  }

  std::vector<std::pair<std::string, bool>> validity;
  std::vector<std::pair<std::string, OpcodeForm>> forms;
  const auto opcodes = required<json>(doc, "opcodes", "KB");
  if (!opcodes.is_array()) throw KbError("KB: 'opcodes' must be an array");
  for (const auto& o : opcodes) {
    const std::string where = "opcodes[" + std::to_string(forms.size()) + "]";
    if (!o.is_object()) throw KbError(where + ": must be an object");
    reject_unknown(o, {"mnemonic", "bb_valid", "slots", "implicit_reads", "implicit_writes", "throughput"},
                   where);
    auto mnemonic = required<std::string>(o, "mnemonic", where);
    if (mnemonic.empty()) throw KbError(where + ": empty mnemonic");
    std::string lowered = mnemonic;
    std::transform(lowered.begin(), lowered.end(), lowered.begin(), ::tolower);
    if (lowered != mnemonic) throw KbError(where + ": mnemonic must be lowercase");
    OpcodeForm form;
    for (const auto& s : required<json>(o, "slots", where)) {
      const std::string swhere = where + " ('" + mnemonic + "') slot";
      reject_unknown(s, {"kind", "width_bits", "access"}, swhere);
      form.slots.push_back({parse_slot_kind(required<std::string>(s, "kind", swhere), swhere),
                            required<int>(s, "width_bits", swhere),
                            parse_access(required<std::string>(s, "access", swhere), swhere)});
    }
    form.implicit_reads = o.value("implicit_reads", std::vector<std::string>{});
    form.implicit_writes = o.value("implicit_writes", std::vector<std::string>{});
    if (auto tp = o.find("throughput"); tp != o.end()) {
      for (const auto& [march, v] : tp->items()) {
        if (!v.is_number()) throw KbError(where + ": throughput values must be numbers");
        form.throughput[march] = v.get<double>();
      }
    }
    validity.emplace_back(mnemonic, required<bool>(o, "bb_valid", where));
    forms.emplace_back(std::move(mnemonic), std::move(form));
  }
  if (forms.empty()) throw KbError("KB: no opcodes");
  return IsaKb::build(std::move(version), track_flags, std::move(registers), std::move(validity),
                      std::move(forms));
}

IsaKb load_kb(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw KbError("cannot read KB file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_kb(ss.str());
}

std::vector<std::string> replacement_opcodes(const IsaKb& kb, std::string_view mnemonic,
                                             const std::vector<OperandShape>& operands) {
  const OpcodeSpec* spec = kb.find_opcode(mnemonic);
  if (!spec) throw KbError("unknown mnemonic '" + std::string(mnemonic) + "'");
  auto accepts = [&](const OperandSlot& slot, std::size_t i) {
    return slot_accepts_shape(slot, operands[i]);
  };
  const OpcodeForm* original = first_form(*spec, operands.size(), accepts);
  if (!original) return {};

  std::vector<std::string> out;
  for (const auto& [name, other] : kb.opcodes()) {
    if (name == mnemonic || !other.bb_valid) continue;
    for (const auto& form : other.forms) {
      if (form.slots.size() != operands.size() || !same_slot_kinds(form, *original)) continue;
      bool ok = true;
      for (std::size_t i = 0; i < operands.size() && ok; ++i) ok = accepts(form.slots[i], i);
      if (ok) {
        out.push_back(name);
        break;
      }
    }
  }
  return out;
}

std::vector<std::string> replacement_opcodes(const IsaKb& kb, const Instruction& instr) {
  if (!kb.find_opcode(instr.mnemonic))
    throw KbError("unknown mnemonic '" + instr.mnemonic + "'");
  const OpcodeForm* original = kb.match_form(instr.mnemonic, instr.operands);
  if (!original) return {};

  std::vector<std::string> out;
  for (const auto& [name, other] : kb.opcodes()) {
    if (name == instr.mnemonic || !other.bb_valid) continue;
    for (const auto& form : other.forms) {
      if (form.slots.size() != instr.operands.size() || !same_slot_kinds(form, *original)) continue;
      bool ok = true;
      for (std::size_t i = 0; i < form.slots.size() && ok; ++i)
        ok = slot_accepts(form.slots[i], instr.operands[i], kb);
      if (ok) {
        out.push_back(name);
        break;
      }
    }
  }
  return out;
}

std::vector<std::string> replacement_registers(const IsaKb& kb, std::string_view reg,
                                               const std::set<std::string>& forbidden) {
  const RegisterSpec* self = kb.find_register(reg);
  if (!self) throw KbError("unknown register '" + std::string(reg) + "'");
  if (!self->substitutable) return {};

  std::set<std::string> forbidden_families;
  for (const auto& f : forbidden)
    if (const RegisterSpec* r = kb.find_register(f)) forbidden_families.insert(r->family);

  std::vector<std::string> out;
  for (const auto& r : kb.registers()) {
    if (!r.substitutable || r.width_bits != self->width_bits) continue;
    if (r.family == self->family || forbidden.count(r.name) || forbidden_families.count(r.family))
      continue;
    out.push_back(r.name);
  }
  return out;
}

bool validate_instruction(const IsaKb& kb, const Instruction& instr) {
  const OpcodeSpec* spec = kb.find_opcode(instr.mnemonic);
  if (!spec || !spec->bb_valid) return false;
  for (const auto& op : instr.operands) {
    if (op.is_reg() && !kb.find_register(op.as_reg().name)) return false;
    if (op.is_mem()) {
      const auto& m = op.as_mem();
      if (m.base && !kb.find_register(*m.base)) return false;
      if (m.index && !kb.find_register(*m.index)) return false;
    }
  }
  return kb.match_form(instr.mnemonic, instr.operands) != nullptr;
}

}  // namespace comet
