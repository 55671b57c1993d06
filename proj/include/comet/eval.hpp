#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "comet/explain.hpp"

namespace comet {

struct DatasetRecord {
  std::string id;
  std::vector<std::string> asm_lines;
  BasicBlock block;
  std::map<std::string, double> measured;
  std::optional<std::string> source;
  std::optional<std::string> category;
};

std::vector<DatasetRecord> load_dataset(const std::filesystem::path& path, const IsaKb& kb);
std::vector<DatasetRecord> parse_dataset(std::string_view jsonl, const IsaKb& kb);
std::string dataset_line(const DatasetRecord& r);

/// Deterministic synthetic blocks of 4-10 instructions, categories assigned
/// round-robin.
std::vector<DatasetRecord> generate_fixtures(const IsaKb& kb, int count, std::uint64_t seed);

// One explanation attempt (record x seed x method).
struct EvalRow {
  std::string id;
  std::uint64_t seed = 0;
  std::string method;
  bool failed = false;
  std::string error;
  FeatureSet features;
  std::optional<bool> correct;
  std::optional<double> precision;
  std::optional<double> coverage;
  std::optional<double> time;
  bool converged = true;
  std::optional<std::string> source;
  std::optional<std::string> category;

  bool has(FeatureType t) const;
};

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // population deviation
  std::size_t count = 0;
};

MeanStd mean_std(const std::vector<double>& xs);

struct EvalReport {
  std::string kind;
  std::vector<EvalRow> rows;
  nlohmann::ordered_json aggregates = nlohmann::ordered_json::object();
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::string summary;
};

/// Runs fn(0..n-1) on up to `jobs` threads. Exceptions are the callee's job.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

bool explanation_correct(const FeatureSet& explanation, const FeatureSet& ground_truth);

EvalReport accuracy_eval(const std::vector<DatasetRecord>& records, const IsaKb& kb, const CostTable& table,
                         const ExplainConfig& cfg, const std::vector<std::uint64_t>& seeds, int jobs = 1);

// Per-type inclusion probabilities: share of each type among all GT features.
std::map<FeatureType, double> ground_truth_type_frequency(const std::vector<DatasetRecord>& records,
                                                          const IsaKb& kb, const CostTable& table);

EvalReport baseline_random(const std::vector<DatasetRecord>& records, const IsaKb& kb, const CostTable& table,
                           const std::vector<std::uint64_t>& seeds);
EvalReport baseline_fixed(const std::vector<DatasetRecord>& records, const IsaKb& kb, const CostTable& table);

EvalReport prec_cov_eval(const std::vector<DatasetRecord>& records, const IsaKb& kb, const CostModel& model,
                         const ExplainConfig& cfg, const std::vector<std::uint64_t>& seeds, int jobs = 1);

struct MapeResult {
  double mape = 0.0;
  std::vector<std::pair<std::string, double>> per_record;  // id, absolute percentage error
};
MapeResult mape(const std::vector<DatasetRecord>& records, const CostModel& model, const std::string& march);

enum class GroupBy { None, Source, Category };
GroupBy parse_group_by(std::string_view s);

struct ProminenceRow {
  std::string group;
  std::size_t explanations = 0;
  double pct_num_insts = 0.0;
  double pct_inst = 0.0;
  double pct_dep = 0.0;
};
std::vector<ProminenceRow> prominence(const std::vector<EvalRow>& rows, GroupBy group_by);

// Summary stats per method over rows: accuracy per seed and mean/std.
nlohmann::ordered_json accuracy_aggregate(const std::vector<EvalRow>& rows);

nlohmann::ordered_json report_json(const EvalReport& report, bool with_timing);
std::string report_csv(const EvalReport& report, bool with_timing);

}  // namespace comet
