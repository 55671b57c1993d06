#pragma once

#include <compare>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "comet/asm.hpp"
#include "comet/isa.hpp"

namespace comet {

enum class DepKind { RAW, WAR, WAW };

std::string_view to_string(DepKind kind);
std::optional<DepKind> parse_dep_kind(std::string_view s);  // case-insensitive

/// Data-dependency hazard between an earlier instruction `src` and a later
/// instruction `dst` (1-based). `resource` is a register family name such as
/// "rax" or a memory expression key such as "[rdi + 24]".
struct DepEdge {
  int src = 0;
  int dst = 0;
  DepKind kind = DepKind::RAW;
  std::string resource;

  auto operator<=>(const DepEdge&) const = default;
  bool operator==(const DepEdge&) const = default;
};

enum class EdgePolicy {
  AllPairs,          // every conflicting (i, j) pair
  NearestPredecessor // only the closest conflicting i per (resource, kind, j)
};

struct GraphOptions {
  EdgePolicy policy = EdgePolicy::AllPairs;
};

class BlockGraph {
 public:
  BlockGraph() = default;

  const BasicBlock& block() const { return block_; }
  std::size_t size() const { return block_.size(); }
  const GraphOptions& options() const { return opts_; }

  // Per-instruction resource sets (0-based index), sorted and unique.
  const std::vector<std::vector<std::string>>& reads() const { return reads_; }
  const std::vector<std::vector<std::string>>& writes() const { return writes_; }

  const std::vector<DepEdge>& dep_edges() const { return edges_; }
  bool has_edge(const DepEdge& e) const;

  friend BlockGraph build_graph(const IsaKb& kb, const BasicBlock& bb, const GraphOptions& opts);

 private:
  BasicBlock block_;
  GraphOptions opts_;
  std::vector<std::vector<std::string>> reads_;
  std::vector<std::vector<std::string>> writes_;
  std::vector<DepEdge> edges_;  // sorted
};

BlockGraph build_graph(const IsaKb& kb, const BasicBlock& bb, const GraphOptions& opts = {});

/// Resources an explicit operand contributes when it sits in `slot`.
void operand_resources(const IsaKb& kb, const Operand& op, const OperandSlot& slot,
                       std::vector<std::string>& reads, std::vector<std::string>& writes);

/// True iff the explicit operand mentions `resource` (its register family, an
/// address register family, or its memory key when the slot accesses memory).
bool operand_carries(const IsaKb& kb, const Operand& op, const OperandSlot& slot,
                     const std::string& resource);

std::string memory_key(const MemOperand& m);

// ---------------------------------------------------------------------------
// Features

enum class FeatureType { Inst, Dep, NumInsts };

struct Feature {
  FeatureType type = FeatureType::Inst;
  int index = 0;  // Inst: 1-based instruction index
  DepEdge dep;    // Dep
  int count = 0;  // NumInsts

  static Feature inst(int i) { return {FeatureType::Inst, i, {}, 0}; }
  static Feature dependency(DepEdge e) { return {FeatureType::Dep, 0, std::move(e), 0}; }
  static Feature num_insts(int n) { return {FeatureType::NumInsts, 0, {}, n}; }

  // Canonical order: Inst by index, then Dep by (src, dst, kind, resource),
  // NumInsts last.
  std::strong_ordering operator<=>(const Feature& o) const;
  bool operator==(const Feature& o) const { return (*this <=> o) == 0; }
};

std::string to_string(const Feature& f);          // "inst:4", "dep:3-6:raw:rax", "numinsts"
Feature parse_feature(std::string_view spec, const BlockGraph& g);  // validates against g
std::string_view type_name(FeatureType t);        // "inst", "dep", "num_insts"

/// Ordered set of features; iteration follows the canonical order.
class FeatureSet {
 public:
  FeatureSet() = default;
  FeatureSet(std::initializer_list<Feature> fs);
  explicit FeatureSet(std::vector<Feature> fs);

  bool insert(const Feature& f);
  bool contains(const Feature& f) const;
  bool subset_of(const FeatureSet& other) const;
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }

  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }
  const std::vector<Feature>& items() const { return items_; }
  const Feature& operator[](std::size_t i) const { return items_[i]; }

  bool operator==(const FeatureSet&) const = default;
  std::strong_ordering operator<=>(const FeatureSet& o) const;

 private:
  std::vector<Feature> items_;  // sorted, unique, at most one NumInsts
};

/// The practical feature pool: every instruction, every dependency edge, and
/// the instruction count.
FeatureSet extract_features(const BlockGraph& g);

/// Original (1-based) index -> perturbed (1-based) index; absent = deleted.
/// Strictly order-preserving for every perturbation this library produces.
class VertexMap {
 public:
  VertexMap() = default;
  explicit VertexMap(std::vector<int> targets) : targets_(std::move(targets)) {}

  static VertexMap identity(std::size_t n);

  std::optional<int> operator()(int original) const {
    if (original < 1 || original > static_cast<int>(targets_.size())) return std::nullopt;
    int t = targets_[original - 1];
    return t > 0 ? std::optional<int>(t) : std::nullopt;
  }
  std::size_t original_size() const { return targets_.size(); }
  const std::vector<int>& targets() const { return targets_; }  // 0 = deleted

  bool operator==(const VertexMap&) const = default;

 private:
  std::vector<int> targets_;
};

bool feature_present(const BlockGraph& original, const BlockGraph& perturbed,
                     const VertexMap& mapping, const Feature& f);

}  // namespace comet
