#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace comet {

struct Instruction;
struct Operand;

// `Address` is a memory-syntax operand whose contents are never accessed
// (the source of lea). It only reads its base/index registers.
enum class SlotKind { Register, Memory, Immediate, Address };
enum class Access { Read, Write, ReadWrite };

struct OperandSlot {
  SlotKind kind = SlotKind::Register;
  int width_bits = 64;
  Access access = Access::Read;

  bool reads() const { return access != Access::Write; }
  bool writes() const { return access != Access::Read; }
  bool operator==(const OperandSlot&) const = default;
};

/// One encoding of a mnemonic: its explicit operand slots plus the registers
/// it touches implicitly (div reads and writes rdx:rax, push/pop move rsp).
struct OpcodeForm {
  std::vector<OperandSlot> slots;
  std::vector<std::string> implicit_reads;
  std::vector<std::string> implicit_writes;
  std::map<std::string, double> throughput;  // microarchitecture -> cycles
};

struct OpcodeSpec {
  std::string mnemonic;
  bool bb_valid = true;
  std::vector<OpcodeForm> forms;
};

struct RegisterSpec {
  std::string name;
  int width_bits = 64;
  std::string family;
  bool substitutable = true;
};

/// Operand shape used to query replacement opcodes without a parsed instruction.
struct OperandShape {
  enum class Kind { Register, Memory, Immediate } kind = Kind::Register;
  int width_bits = 64;
};

class IsaKb {
 public:
  IsaKb() = default;

  const std::string& version() const { return version_; }
  bool track_flags() const { return track_flags_; }

  const std::map<std::string, OpcodeSpec, std::less<>>& opcodes() const { return opcodes_; }
  const std::vector<RegisterSpec>& registers() const { return registers_; }

  const OpcodeSpec* find_opcode(std::string_view mnemonic) const;
  const RegisterSpec* find_register(std::string_view name) const;

  // Family identifier of a register name; throws KbError for unknown names.
  const std::string& family_of(std::string_view reg) const;

  /// First form of `mnemonic` whose slots accept `operands`, or nullptr.
  /// Ignores bb_valid.
  const OpcodeForm* match_form(std::string_view mnemonic,
                               const std::vector<Operand>& operands) const;

  const OpcodeForm& form_of(const Instruction& instr) const;

  // Builds an IsaKb from already-parsed pieces and validates it. Used by the
  // JSON loader and by tests that need a hand-made KB.
  static IsaKb build(std::string version, bool track_flags, std::vector<RegisterSpec> registers,
                     std::vector<std::pair<std::string, bool>> mnemonic_validity,
                     std::vector<std::pair<std::string, OpcodeForm>> forms);

 private:
  std::string version_;
  bool track_flags_ = false;
  std::map<std::string, OpcodeSpec, std::less<>> opcodes_;
  std::vector<RegisterSpec> registers_;
  struct NameHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept { return std::hash<std::string_view>{}(s); }
  };
  std::unordered_map<std::string, std::size_t, NameHash, std::equal_to<>> register_index_;
};

IsaKb load_kb(const std::filesystem::path& path);
IsaKb parse_kb(std::string_view json_text);

/// Every other bb_valid mnemonic with a form accepting the same operand shapes.
std::vector<std::string> replacement_opcodes(const IsaKb& kb, std::string_view mnemonic,
                                             const std::vector<OperandShape>& operands);

/// Same query for a concrete instruction (immediate values checked for fit).
std::vector<std::string> replacement_opcodes(const IsaKb& kb, const Instruction& instr);

std::vector<std::string> replacement_registers(const IsaKb& kb, std::string_view reg,
                                               const std::set<std::string>& forbidden);

bool validate_instruction(const IsaKb& kb, const Instruction& instr);

bool slot_accepts(const OperandSlot& slot, const Operand& op, const IsaKb& kb);

std::string_view to_string(SlotKind kind);
std::string_view to_string(Access access);

}  // namespace comet
