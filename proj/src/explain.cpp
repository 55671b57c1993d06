#include "comet/explain.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "comet/error.hpp"

namespace comet {

void ExplainConfig::validate() const {
  auto unit = [](double v, const char* name) {
    if (!(v > 0.0 && v < 1.0)) throw ConfigError(std::string(name) + " must lie in (0, 1)");
  };
  auto count = [](int v, const char* name) {
    if (v < 1) throw ConfigError(std::string(name) + " must be >= 1");
  };
  unit(precision_threshold, "precision_threshold");
  unit(lucb_confidence, "lucb_confidence");
  unit(lucb_tolerance, "lucb_tolerance");
  count(beam_width, "beam_width");
  count(batch_size, "batch_size");
  count(min_samples, "min_samples");
  count(max_samples_per_candidate, "max_samples_per_candidate");
  count(coverage_pool, "coverage_pool");
  if (epsilon && !(*epsilon >= 0.0)) throw ConfigError("epsilon must be >= 0");
  perturb.validate();
}

// ---------------------------------------------------------------------------
// KL bounds

namespace {

double kl_unchecked(double p, double q) {
  double r = 0.0;
  if (p > 0.0) r += q <= 0.0 ? std::numeric_limits<double>::infinity() : p * std::log(p / q);
  if (p < 1.0) r += q >= 1.0 ? std::numeric_limits<double>::infinity() : (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
  return r;
}

}  // namespace

double kl_bernoulli(double p, double q) {
  if (!(p >= 0.0 && p <= 1.0) || !(q >= 0.0 && q <= 1.0)) throw std::domain_error("kl_bernoulli: argument outside [0, 1]");
  if ((q == 0.0 || q == 1.0) && p != q) throw std::domain_error("kl_bernoulli: q on the boundary");
  return std::max(0.0, kl_unchecked(p, q));
}

double kl_ucb(std::int64_t successes, std::int64_t trials, double level) {
  const double p = static_cast<double>(successes) / static_cast<double>(trials);
  const double n = static_cast<double>(trials);
  if (level <= 0.0) return p;
  double lo = p, hi = 1.0;
  if (n * kl_unchecked(p, hi) <= level) return hi;
  while (hi - lo > 1e-6) {
    double mid = 0.5 * (lo + hi);
    if (n * kl_unchecked(p, mid) <= level)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

double kl_lcb(std::int64_t successes, std::int64_t trials, double level) {
  const double p = static_cast<double>(successes) / static_cast<double>(trials);
  const double n = static_cast<double>(trials);
  if (level <= 0.0) return p;
  double lo = 0.0, hi = p;
  if (n * kl_unchecked(p, lo) <= level) return lo;
  while (hi - lo > 1e-6) {
    double mid = 0.5 * (lo + hi);
    if (n * kl_unchecked(p, mid) <= level)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

// ---------------------------------------------------------------------------
// Estimators

Counts precision_estimate(const CostModel& model, const Perturber& perturber, const FeatureSet& F,
                          const TargetInterval& target, const RandomStream& rng, int n, std::int64_t first_index) {
  Counts c;
  for (int i = 0; i < n; ++i) {
    PerturbResult r = perturber.sample(F, rng.split(static_cast<std::uint64_t>(first_index + i)));
    if (target.contains(model.predict_graph(r.graph))) ++c.successes;
    ++c.trials;
  }
  return c;
}

std::vector<PerturbResult> draw_pool(const Perturber& perturber, const RandomStream& rng, int n) {
  std::vector<PerturbResult> pool;
  pool.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pool.push_back(perturber.sample({}, rng.split(static_cast<std::uint64_t>(i))));
  return pool;
}

double coverage_estimate(const BlockGraph& g, const FeatureSet& F, const std::vector<PerturbResult>& pool) {
  if (pool.empty()) throw Error("coverage pool is empty");
  std::size_t hit = 0;
  for (const auto& r : pool) {
    bool all = true;
    for (const auto& f : F)
      if (!feature_present(g, r.graph, r.vertex_map, f)) {
        all = false;
        break;
      }
    if (all) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(pool.size());
}

std::uint64_t feature_set_key(const FeatureSet& F) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& f : F) {
    for (char c : to_string(f)) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Beam search

namespace {

// Presence of each P̂ feature across the coverage pool, one bit per member.
class CoverageIndex {
 public:
  CoverageIndex(const BlockGraph& g, const FeatureSet& features, const std::vector<PerturbResult>& pool)
      : words_((pool.size() + 63) / 64), size_(pool.size()) {
    masks_.assign(features.size(), std::vector<std::uint64_t>(words_, 0));
    for (std::size_t m = 0; m < pool.size(); ++m)
      for (std::size_t k = 0; k < features.size(); ++k)
        if (feature_present(g, pool[m].graph, pool[m].vertex_map, features[k]))
          masks_[k][m / 64] |= std::uint64_t{1} << (m % 64);
  }

  double coverage(const std::vector<int>& members) const {
    std::size_t hit = 0;
    for (std::size_t w = 0; w < words_; ++w) {
      std::uint64_t acc = w + 1 == words_ && size_ % 64 ? (std::uint64_t{1} << (size_ % 64)) - 1 : ~std::uint64_t{0};
      for (int k : members) acc &= masks_[k][w];
      hit += static_cast<std::size_t>(std::popcount(acc));
    }
    return static_cast<double>(hit) / static_cast<double>(size_);
  }

 private:
  std::vector<std::vector<std::uint64_t>> masks_;
  std::size_t words_;
  std::size_t size_;
};

struct Candidate {
  std::vector<int> members;  // sorted indices into P̂
  FeatureSet features;
  std::uint64_t key = 0;
  Counts counts;
  double coverage = 0.0;
};

double lucb_beta(std::size_t n_arms, int t, double delta) {
  const double alpha = 1.1;
  const double k = 405.5;
  double temp = std::log(k * static_cast<double>(n_arms) * std::pow(static_cast<double>(t), alpha) / delta);
  return temp + std::log(temp);
}

class Search {
 public:
  Search(const CostModel& model, const Perturber& perturber, const TargetInterval& target, const ExplainConfig& cfg)
      : model_(model), perturber_(perturber), target_(target), cfg_(cfg), root_(cfg.master_seed) {}

  void sample(Candidate& c, int n) {
    int budget = cfg_.max_samples_per_candidate - static_cast<int>(c.counts.trials);
    n = std::min(n, budget);
    if (n <= 0) return;
    Counts add = precision_estimate(model_, perturber_, c.features, target_, root_.split(c.key), n, c.counts.trials);
    c.counts.successes += add.successes;
    c.counts.trials += add.trials;
    samples_ += add.trials;
  }

  bool exhausted(const Candidate& c) const { return c.counts.trials >= cfg_.max_samples_per_candidate; }

  // Best-arm identification: indices of the top_n candidates by mean.
  std::vector<std::size_t> lucb(std::vector<Candidate*>& arms, std::size_t top_n) {
    const std::size_t n = arms.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    auto by_mean = [&] {
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return arms[a]->counts.mean() < arms[b]->counts.mean();
      });
    };
    if (top_n >= n) {
      by_mean();
      return {order.rbegin(), order.rend()};
    }
    for (int t = 1;; ++t) {
      by_mean();
      const double beta = lucb_beta(n, t, cfg_.lucb_confidence);
      std::size_t ut = n, lt = n;
      double best_ub = -1.0, worst_lb = 2.0;
      for (std::size_t r = 0; r < n - top_n; ++r) {
        const Candidate& c = *arms[order[r]];
        double ub = kl_ucb(c.counts.successes, c.counts.trials, beta);
        if (ub > best_ub) best_ub = ub, ut = order[r];
      }
      for (std::size_t r = n - top_n; r < n; ++r) {
        const Candidate& c = *arms[order[r]];
        double lb = kl_lcb(c.counts.successes, c.counts.trials, beta);
        if (lb < worst_lb) worst_lb = lb, lt = order[r];
      }
      if (best_ub - worst_lb <= cfg_.lucb_tolerance) break;
      if (exhausted(*arms[ut]) && exhausted(*arms[lt])) break;
      sample(*arms[ut], cfg_.batch_size);
      sample(*arms[lt], cfg_.batch_size);
    }
    by_mean();
    return {order.rbegin(), order.rbegin() + static_cast<std::ptrdiff_t>(top_n)};
  }

  // Samples until the candidate is confidently above or below the threshold.
  bool accept(Candidate& c) {
    const double beta = std::log(1.0 / cfg_.lucb_confidence);
    const double thr = cfg_.precision_threshold;
    if (c.counts.trials < cfg_.min_samples) sample(c, cfg_.min_samples - static_cast<int>(c.counts.trials));
    for (;;) {
      double mean = c.counts.mean();
      double lb = kl_lcb(c.counts.successes, c.counts.trials, beta);
      double ub = kl_ucb(c.counts.successes, c.counts.trials, beta);
      bool undecided = (mean >= thr && lb < thr) || (mean < thr && ub >= thr);
      if (!undecided || exhausted(c)) return mean >= thr && lb >= thr;
      sample(c, cfg_.batch_size);
    }
  }

  std::int64_t samples() const { return samples_; }

 private:
  const CostModel& model_;
  const Perturber& perturber_;
  TargetInterval target_;
  const ExplainConfig& cfg_;
  RandomStream root_;
  std::int64_t samples_ = 0;
};

}  // namespace

Explanation explain(const CostModel& model, const IsaKb& kb, const BasicBlock& bb, const ExplainConfig& cfg) {
  return explain(model, kb, build_graph(kb, bb), cfg);
}

Explanation explain(const CostModel& model, const IsaKb& kb, const BlockGraph& g, const ExplainConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  Explanation out;
  out.model_name = model.name();
  out.seed = cfg.master_seed;
  out.prediction = model.predict_graph(g);
  out.target = {out.prediction, cfg.epsilon.value_or(model.default_epsilon()), cfg.interval};

  Perturber perturber(kb, g, cfg.perturb);
  const FeatureSet all = extract_features(g);
  const RandomStream root(cfg.master_seed);
  auto pool = draw_pool(perturber, root.split(0x706f6f6cULL), cfg.coverage_pool);
  CoverageIndex cov(g, all, pool);
  pool.clear();

  Search search(model, perturber, out.target, cfg);
  std::map<std::vector<int>, Candidate> seen;
  auto candidate = [&](std::vector<int> members) -> Candidate* {
    auto it = seen.find(members);
    if (it != seen.end()) return &it->second;
    Candidate c;
    c.members = members;
    std::vector<Feature> fs;
    for (int k : members) fs.push_back(all[static_cast<std::size_t>(k)]);
    c.features = FeatureSet(std::move(fs));
    c.key = feature_set_key(c.features);
    c.coverage = cov.coverage(members);
    return &seen.emplace(std::move(members), std::move(c)).first->second;
  };

  std::vector<Candidate*> beam;
  std::vector<Candidate*> accepted;
  for (std::size_t level = 1; level <= all.size(); ++level) {
    std::vector<Candidate*> level_cands;
    std::map<std::vector<int>, bool> in_level;
    auto add = [&](std::vector<int> m) {
      if (in_level.emplace(m, true).second) level_cands.push_back(candidate(std::move(m)));
    };
    if (level == 1) {
      for (std::size_t k = 0; k < all.size(); ++k) add({static_cast<int>(k)});
    } else {
      for (Candidate* b : beam)
        for (std::size_t k = 0; k < all.size(); ++k) {
          if (std::binary_search(b->members.begin(), b->members.end(), static_cast<int>(k))) continue;
          std::vector<int> m = b->members;
          m.insert(std::upper_bound(m.begin(), m.end(), static_cast<int>(k)), static_cast<int>(k));
          add(std::move(m));
        }
    }
    if (level_cands.empty()) break;
    for (Candidate* c : level_cands)
      if (c->counts.trials == 0) search.sample(*c, cfg.batch_size);

    auto top = search.lucb(level_cands, std::min<std::size_t>(static_cast<std::size_t>(cfg.beam_width), level_cands.size()));
    beam.clear();
    for (std::size_t i : top) beam.push_back(level_cands[i]);
    for (Candidate* c : beam)
      if (search.accept(*c)) accepted.push_back(c);
    if (!accepted.empty()) break;
  }

  const double beta = std::log(1.0 / cfg.lucb_confidence);
  Candidate* best = nullptr;
  if (!accepted.empty()) {
    for (Candidate* c : accepted) {
      if (!best) {
        best = c;
        continue;
      }
      if (c->coverage != best->coverage) {
        if (c->coverage > best->coverage) best = c;
      } else if (c->features.size() != best->features.size()) {
        if (c->features.size() < best->features.size()) best = c;
      } else if (c->features < best->features) {
        best = c;
      }
    }
    out.features = best->features;
    out.est_precision = best->counts.mean();
    out.precision_lcb = kl_lcb(best->counts.successes, best->counts.trials, beta);
    out.est_coverage = best->coverage;
  } else {
    std::vector<int> everything(all.size());
    for (std::size_t k = 0; k < all.size(); ++k) everything[k] = static_cast<int>(k);
    Candidate* c = candidate(everything);
    if (c->counts.trials < cfg.min_samples) search.sample(*c, cfg.min_samples - static_cast<int>(c->counts.trials));
    out.features = all;
    out.est_precision = c->counts.mean();
    out.precision_lcb = kl_lcb(c->counts.successes, c->counts.trials, beta);
    out.est_coverage = c->coverage;
    out.converged = false;
  }
  out.samples_used = search.samples() + cfg.coverage_pool;
  out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

bool exact_faithful_check(const CostModel& model, const IsaKb& kb, const BlockGraph& g, const FeatureSet& F,
                          const TargetInterval& target, std::size_t limit) {
  for (const auto& bb : enumerate_space(kb, g, F, limit))
    if (!target.contains(model.predict(bb))) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::ordered_json feature_json(const Feature& f) {
  nlohmann::ordered_json j;
  j["type"] = std::string(type_name(f.type));
  switch (f.type) {
    case FeatureType::Inst: j["index"] = f.index; break;
    case FeatureType::Dep:
      j["src"] = f.dep.src;
      j["dst"] = f.dep.dst;
      j["kind"] = std::string(to_string(f.dep.kind));
      j["resource"] = f.dep.resource;
      break;
    case FeatureType::NumInsts: j["count"] = f.count; break;
  }
  j["text"] = to_string(f);
  return j;
}

nlohmann::ordered_json config_json(const ExplainConfig& cfg) {
  nlohmann::ordered_json j;
  j["precision_threshold"] = cfg.precision_threshold;
  if (cfg.epsilon)
    j["epsilon"] = *cfg.epsilon;
  else
    j["epsilon"] = nullptr;
  j["interval"] = std::string(to_string(cfg.interval));
  j["beam_width"] = cfg.beam_width;
  j["lucb_confidence"] = cfg.lucb_confidence;
  j["lucb_tolerance"] = cfg.lucb_tolerance;
  j["batch_size"] = cfg.batch_size;
  j["min_samples"] = cfg.min_samples;
  j["max_samples_per_candidate"] = cfg.max_samples_per_candidate;
  j["coverage_pool"] = cfg.coverage_pool;
  j["p_inst_retain"] = cfg.perturb.p_inst_retain;
  j["p_dep_retain"] = cfg.perturb.p_dep_retain;
  j["p_delete"] = cfg.perturb.p_delete;
  j["p_dep_explicit_retain"] = cfg.perturb.p_dep_explicit_retain;
  j["max_retries"] = cfg.perturb.max_retries;
  return j;
}

nlohmann::ordered_json graph_json(const BlockGraph& g) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json verts = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < g.size(); ++i) {
    nlohmann::ordered_json v;
    v["index"] = i + 1;
    v["text"] = render_instruction(g.block()[i]);
    v["reads"] = g.reads()[i];
    v["writes"] = g.writes()[i];
    verts.push_back(v);
  }
  j["vertices"] = verts;
  nlohmann::ordered_json edges = nlohmann::ordered_json::array();
  for (const auto& e : g.dep_edges()) {
    nlohmann::ordered_json o;
    o["src"] = e.src;
    o["dst"] = e.dst;
    o["kind"] = std::string(to_string(e.kind));
    o["resource"] = e.resource;
    o["feature"] = to_string(Feature::dependency(e));
    edges.push_back(o);
  }
  j["edges"] = edges;
  j["edge_policy"] = g.options().policy == EdgePolicy::AllPairs ? "all_pairs" : "nearest_predecessor";
  return j;
}

ExplainConfig config_from_json(const nlohmann::json& j, ExplainConfig base) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExplainConfig c = base;
  auto real = [&](const std::string& k, const nlohmann::json& v, double& out) {
    if (!v.is_number()) throw ConfigError("config field '" + k + "' must be a number");
    out = v.get<double>();
  };
  auto integer = [&](const std::string& k, const nlohmann::json& v, int& out) {
    if (!v.is_number_integer()) throw ConfigError("config field '" + k + "' must be an integer");
    out = v.get<int>();
  };
  for (const auto& [k, v] : j.items()) {
    if (k == "precision_threshold") real(k, v, c.precision_threshold);
    else if (k == "epsilon") {
      if (v.is_null()) {
        c.epsilon.reset();
      } else {
        double e = 0.0;
        real(k, v, e);
        c.epsilon = e;
      }
    } else if (k == "interval") {
      if (!v.is_string()) throw ConfigError("config field 'interval' must be a string");
      c.interval = parse_interval_bounds(v.get<std::string>());
    } else if (k == "beam_width") integer(k, v, c.beam_width);
    else if (k == "lucb_confidence") real(k, v, c.lucb_confidence);
    else if (k == "lucb_tolerance") real(k, v, c.lucb_tolerance);
    else if (k == "batch_size") integer(k, v, c.batch_size);
    else if (k == "min_samples") integer(k, v, c.min_samples);
    else if (k == "max_samples_per_candidate") integer(k, v, c.max_samples_per_candidate);
    else if (k == "coverage_pool") integer(k, v, c.coverage_pool);
    else if (k == "p_inst_retain") real(k, v, c.perturb.p_inst_retain);
    else if (k == "p_dep_retain") real(k, v, c.perturb.p_dep_retain);
    else if (k == "p_delete") real(k, v, c.perturb.p_delete);
    else if (k == "p_dep_explicit_retain") real(k, v, c.perturb.p_dep_explicit_retain);
    else if (k == "max_retries") integer(k, v, c.perturb.max_retries);
    else if (k == "master_seed") {
      if (!v.is_number_unsigned()) throw ConfigError("config field 'master_seed' must be a non-negative integer");
      c.master_seed = v.get<std::uint64_t>();
    } else throw ConfigError("unknown config field '" + k + "'");
  }
  c.validate();
  return c;
}

nlohmann::ordered_json explanation_json(const Explanation& e, bool with_timing) {
  nlohmann::ordered_json j;
  j["model"] = e.model_name;
  j["prediction"] = e.prediction;
  j["interval"] = {{"lower", e.target.lower()}, {"upper", e.target.upper()}, {"epsilon", e.target.epsilon},
                   {"bounds", std::string(to_string(e.target.bounds))}};
  nlohmann::ordered_json fs = nlohmann::ordered_json::array();
  for (const auto& f : e.features) fs.push_back(feature_json(f));
  j["features"] = fs;
  j["converged"] = e.converged;
  j["est_precision"] = e.est_precision;
  j["precision_lcb"] = e.precision_lcb;
  j["est_coverage"] = e.est_coverage;
  j["samples_used"] = e.samples_used;
  if (with_timing)
    j["wall_time"] = e.wall_time;
  else
    j["wall_time"] = nullptr;
  j["seed"] = e.seed;
  return j;
}

}  // namespace comet
