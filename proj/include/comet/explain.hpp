#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "comet/cost_model.hpp"
#include "comet/perturb.hpp"

namespace comet {

struct ExplainConfig {
  double precision_threshold = 0.7;
  std::optional<double> epsilon;  // unset: the model's default
  IntervalBounds interval = IntervalBounds::Open;
  int beam_width = 10;
  double lucb_confidence = 0.05;
  double lucb_tolerance = 0.1;
  int batch_size = 16;
  int min_samples = 100;
  int max_samples_per_candidate = 10000;
  int coverage_pool = 1000;
  std::uint64_t master_seed = 0;
  PerturbConfig perturb;

  void validate() const;  // throws ConfigError
};

struct Explanation {
  FeatureSet features;
  double est_precision = 0.0;
  double precision_lcb = 0.0;
  double est_coverage = 0.0;
  std::int64_t samples_used = 0;
  double wall_time = 0.0;
  std::string model_name;
  double prediction = 0.0;
  TargetInterval target;
  bool converged = true;  // false: no candidate met the threshold, features = P̂
  std::uint64_t seed = 0;
};

// Bernoulli KL divergence d(p || q). Throws std::domain_error when q is 0 or 1
// and differs from p.
double kl_bernoulli(double p, double q);

// Largest q >= p̂ (smallest q <= p̂) with trials * d(p̂, q) <= level, by
// bisection to 1e-6.
double kl_ucb(std::int64_t successes, std::int64_t trials, double level);
double kl_lcb(std::int64_t successes, std::int64_t trials, double level);

struct Counts {
  std::int64_t successes = 0;
  std::int64_t trials = 0;
  double mean() const { return trials ? static_cast<double>(successes) / static_cast<double>(trials) : 0.0; }
};

/// Draws `n` preserving perturbations; sample i uses rng.split(first_index + i).
Counts precision_estimate(const CostModel& model, const Perturber& perturber, const FeatureSet& F,
                          const TargetInterval& target, const RandomStream& rng, int n,
                          std::int64_t first_index = 0);

/// Fraction of `pool` (unconstrained draws) exhibiting every feature of F.
double coverage_estimate(const BlockGraph& g, const FeatureSet& F, const std::vector<PerturbResult>& pool);

std::vector<PerturbResult> draw_pool(const Perturber& perturber, const RandomStream& rng, int n);

Explanation explain(const CostModel& model, const IsaKb& kb, const BasicBlock& bb, const ExplainConfig& cfg);
Explanation explain(const CostModel& model, const IsaKb& kb, const BlockGraph& g, const ExplainConfig& cfg);

/// Exact faithfulness over the whole enumerated space. Throws SpaceLimitError.
bool exact_faithful_check(const CostModel& model, const IsaKb& kb, const BlockGraph& g, const FeatureSet& F,
                          const TargetInterval& target, std::size_t limit);

std::uint64_t feature_set_key(const FeatureSet& F);

nlohmann::ordered_json feature_json(const Feature& f);
nlohmann::ordered_json graph_json(const BlockGraph& g);
nlohmann::ordered_json config_json(const ExplainConfig& cfg);
// Field-wise override of `base`; unknown keys and wrong types throw ConfigError.
ExplainConfig config_from_json(const nlohmann::json& j, ExplainConfig base = {});
// wall_time is emitted only when `with_timing` is set so reruns stay byte-identical.
nlohmann::ordered_json explanation_json(const Explanation& e, bool with_timing);

}  // namespace comet
