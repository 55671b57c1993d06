#pragma once

#include <atomic>
#include <filesystem>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <unordered_map>

#include "comet/graph.hpp"

namespace comet {

/// Per-mnemonic throughput in cycles for one microarchitecture.
class CostTable {
 public:
  CostTable() = default;
  CostTable(std::string march, std::map<std::string, double> cycles);

  // CSV with header `mnemonic,cycles`.
  static CostTable load(const std::filesystem::path& path, std::string march);
  static CostTable parse(std::string_view csv, std::string march);

  const std::string& march() const { return march_; }
  const std::map<std::string, double>& entries() const { return cycles_; }
  double at(const std::string& mnemonic) const;  // ModelError when missing

  // Throws ModelError naming the first bb_valid mnemonic without an entry.
  void check_covers(const IsaKb& kb) const;

 private:
  std::string march_;
  std::map<std::string, double> cycles_;
};

enum class IntervalBounds { Open, Closed };

// Open bounds keep a change of exactly epsilon out of the interval.
struct TargetInterval {
  double center = 0.0;
  double epsilon = 0.0;
  IntervalBounds bounds = IntervalBounds::Open;

  double lower() const { return center - epsilon > 0.0 ? center - epsilon : 0.0; }
  double upper() const { return center + epsilon; }
  bool contains(double y) const {
    if (bounds == IntervalBounds::Closed || epsilon == 0.0) return y >= lower() && y <= upper();
    return y > lower() && y < upper();
  }
};

std::string_view to_string(IntervalBounds b);
IntervalBounds parse_interval_bounds(std::string_view s);  // throws ConfigError

// Crude model: the block costs as much as its most expensive feature.
double feature_cost(const CostTable& table, const BlockGraph& g, const Feature& f);
double crude_predict(const CostTable& table, const BlockGraph& g);
FeatureSet ground_truth_explanation(const CostTable& table, const BlockGraph& g);

class CostModel {
 public:
  virtual ~CostModel() = default;

  virtual std::string name() const = 0;
  virtual double predict(const BasicBlock& bb) const = 0;
  // Models that already need the dependency graph can skip rebuilding it.
  virtual double predict_graph(const BlockGraph& g) const { return predict(g.block()); }
  virtual bool concurrent_safe() const { return true; }
  virtual double default_epsilon() const { return 0.5; }
};

class CrudeModel : public CostModel {
 public:
  CrudeModel(const IsaKb& kb, CostTable table);

  std::string name() const override { return "crude:" + table_.march(); }
  double predict(const BasicBlock& bb) const override;
  double predict_graph(const BlockGraph& g) const override;
  double default_epsilon() const override { return 0.25; }

  const CostTable& table() const { return table_; }

 private:
  const IsaKb* kb_;
  CostTable table_;
};

/// Runs `command` once per query: canonical block text on stdin, one decimal
/// throughput line expected on stdout. COMET_MARCH carries the march label.
double external_predict(const std::string& command, double timeout_seconds, const BasicBlock& bb,
                        const std::string& march = {});

class ExternalModel : public CostModel {
 public:
  ExternalModel(std::string command, std::string march, double timeout_seconds = 30.0, int max_concurrent = 4);
  ~ExternalModel() override;

  std::string name() const override { return "exec:" + command_; }
  double predict(const BasicBlock& bb) const override;

 private:
  std::string command_;
  std::string march_;
  double timeout_;
  std::unique_ptr<std::counting_semaphore<1024>> slots_;
};

/// LRU memoization keyed by canonical block text.
class CachedModel : public CostModel {
 public:
  CachedModel(std::shared_ptr<const CostModel> inner, std::size_t capacity);

  std::string name() const override { return inner_->name(); }
  double predict(const BasicBlock& bb) const override;
  double predict_graph(const BlockGraph& g) const override;
  bool concurrent_safe() const override { return inner_->concurrent_safe(); }
  double default_epsilon() const override { return inner_->default_epsilon(); }

  std::uint64_t hits() const { return hits_.load(); }
  std::uint64_t misses() const { return misses_.load(); }
  std::size_t size() const;

 private:
  template <typename F>
  double lookup(const std::string& key, F&& compute) const;

  std::shared_ptr<const CostModel> inner_;
  std::size_t capacity_;
  mutable std::mutex mu_;
  mutable std::list<std::pair<std::string, double>> lru_;
  mutable std::unordered_map<std::string, std::list<std::pair<std::string, double>>::iterator> index_;
  mutable std::atomic<std::uint64_t> hits_{0};
  mutable std::atomic<std::uint64_t> misses_{0};
};

}  // namespace comet
