#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "comet/graph.hpp"
#include "comet/rng.hpp"

namespace comet {

struct PerturbConfig {
  double p_inst_retain = 0.5;
  double p_dep_retain = 0.5;
  double p_delete = 0.33;
  double p_dep_explicit_retain = 0.1;
  int max_retries = 50;

  void validate() const;  // throws ConfigError
};

struct PerturbOp {
  enum class Kind { Delete, ReplaceOpcode, Rename, Lock };
  Kind kind;
  int vertex = 0;      // 1-based, original numbering
  int operand = -1;    // operand position for Rename/Lock
  std::string detail;  // new mnemonic or new operand text
};

std::string_view to_string(PerturbOp::Kind kind);

struct PerturbResult {
  BasicBlock block;
  BlockGraph graph;
  VertexMap vertex_map;
  std::vector<PerturbOp> ops;
};

struct SpaceSize {
  double log10_count = 0.0;
  bool exact = false;  // counted by enumeration rather than the product bound

  // "1.94e+38"-style rendering of 10^log10_count.
  std::string scientific() const;
};

/// Precomputes the perturbation vocabulary of one block: opcode replacements
/// per instruction and the renameable operand occurrences ("sites") behind
/// its dependency edges. Immutable once built, so one instance can serve
/// concurrent samplers that each own a RandomStream.
class Perturber {
 public:
  struct Site {
    int vertex = 0;   // 0-based
    int operand = 0;  // operand position within the instruction
    std::vector<Operand> alternatives;
  };

  Perturber(const IsaKb& kb, const BlockGraph& g, PerturbConfig cfg = {});

  const BlockGraph& graph() const { return g_; }
  const PerturbConfig& config() const { return cfg_; }
  const std::vector<Site>& sites() const { return sites_; }
  const std::vector<std::string>& replacements(int vertex) const { return replacements_[vertex]; }

  /// Draws one member of the preserving space. `rng` is not advanced; retries
  /// and elements use child streams split from it.
  PerturbResult sample(const FeatureSet& preserve, const RandomStream& rng) const;

  SpaceSize space_size(const FeatureSet& preserve) const;

  /// Every distinct block reachable by the operation vocabulary that keeps
  /// `preserve`, sorted by canonical text. Throws SpaceLimitError past `limit`.
  std::vector<BasicBlock> enumerate(const FeatureSet& preserve, std::size_t limit) const;

 private:
  struct Constraints {
    std::vector<bool> fixed;        // mnemonic must stay
    std::vector<bool> site_locked;  // per site
    bool allow_delete = true;
  };

  Constraints constraints(const FeatureSet& preserve) const;
  PerturbResult apply(const std::vector<int>& vertex_choice, const std::vector<int>& site_choice,
                      std::vector<PerturbOp> ops) const;
  bool preserves(const PerturbResult& r, const FeatureSet& preserve) const;

  const IsaKb* kb_;
  BlockGraph g_;
  PerturbConfig cfg_;
  std::vector<std::vector<std::string>> replacements_;
  std::vector<Site> sites_;
};

// Vertex choice encoding used by Perturber internals and tests:
//   0 = keep, 1..R = replacement opcode R-1, -1 = delete.
// Site choice: 0 = keep, k = alternatives[k-1].

PerturbResult sample_perturbation(const IsaKb& kb, const BlockGraph& g, const FeatureSet& preserve,
                                  const PerturbConfig& cfg, const RandomStream& rng);

SpaceSize estimate_space_size(const IsaKb& kb, const BlockGraph& g, const FeatureSet& preserve);

std::vector<BasicBlock> enumerate_space(const IsaKb& kb, const BlockGraph& g, const FeatureSet& preserve,
                                        std::size_t limit);

}  // namespace comet
