#include "comet/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "comet/error.hpp"

namespace comet {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t task_seed(std::uint64_t seed, const std::string& id) {
  RandomStream s(seed, fnv1a(id));
  return s.next_u64();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Datasets

std::vector<DatasetRecord> parse_dataset(std::string_view jsonl, const IsaKb& kb) {
  std::vector<DatasetRecord> out;
  std::set<std::string> ids;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& what) {
    return ParseError(ParseError::Kind::Dataset, line_no, 0, "dataset: " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw fail(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw fail("expected an object");
    DatasetRecord r;
    if (!j.contains("id") || !j["id"].is_string()) throw fail("missing string field 'id'");
    r.id = j["id"].get<std::string>();
    if (!j.contains("asm") || !j["asm"].is_array()) throw fail("missing array field 'asm'");
    for (const auto& a : j["asm"]) {
      if (!a.is_string()) throw fail("'asm' entries must be strings");
      r.asm_lines.push_back(a.get<std::string>());
    }
    if (j.contains("measured") && !j["measured"].is_null()) {
      if (!j["measured"].is_object()) throw fail("'measured' must be an object");
      for (const auto& [k, v] : j["measured"].items()) {
        if (!v.is_number() || !(v.get<double>() > 0.0)) throw fail("measured values must be positive numbers");
        r.measured[k] = v.get<double>();
      }
    }
    for (const char* key : {"source", "category"}) {
      if (j.contains(key) && !j[key].is_null()) {
        if (!j[key].is_string()) throw fail(std::string("'") + key + "' must be a string");
        (std::string(key) == "source" ? r.source : r.category) = j[key].get<std::string>();
      }
    }
    try {
      r.block = parse_lines(r.asm_lines, kb);
    } catch (const ParseError& e) {
      throw fail("record '" + r.id + "': " + e.what());
    }
    if (!ids.insert(r.id).second) throw fail("duplicate id '" + r.id + "'");
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<DatasetRecord> load_dataset(const std::filesystem::path& path, const IsaKb& kb) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read dataset " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_dataset(ss.str(), kb);
}

std::string dataset_line(const DatasetRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["asm"] = r.asm_lines;
  if (!r.measured.empty()) j["measured"] = r.measured;
  if (r.source) j["source"] = *r.source;
  if (r.category) j["category"] = *r.category;
  return j.dump();
}

// ---------------------------------------------------------------------------
// Fixture generator

namespace {

class BlockWriter {
 public:
  explicit BlockWriter(RandomStream& rng) : rng_(rng) {}

  template <typename T>
  const T& pick(const std::vector<T>& xs) {
    return xs[rng_.below(xs.size())];
  }

  std::string gpr() {
    return pick<std::string>({"rax", "rbx", "rcx", "rdx", "rsi", "rdi", "r8", "r9", "r10", "r11", "r12", "r13"});
  }
  std::string xmm() { return "xmm" + std::to_string(rng_.below(16)); }
  std::string base() { return pick<std::string>({"rdi", "rsi", "rbp", "r14", "rsp"}); }
  std::string disp() { return std::to_string(8 * rng_.below(8)); }
  std::string addr() {
    std::string d = disp();
    return "[" + base() + (d == "0" ? "" : " + " + d) + "]";
  }
  std::string imm() { return std::to_string(1 + rng_.below(64)); }

  std::string scalar() {
    switch (rng_.below(12)) {
      case 0: return "mov " + gpr() + ", " + gpr();
      case 1: return "add " + gpr() + ", " + gpr();
      case 2: return "sub " + gpr() + ", " + gpr();
      case 3: return "xor " + gpr() + ", " + gpr();
      case 4: return "and " + gpr() + ", " + imm();
      case 5: return "lea " + gpr() + ", [" + gpr() + " + " + imm() + "]";
      case 6: return "lea " + gpr() + ", [" + gpr() + " + " + gpr() + "*" + pick<std::string>({"2", "4", "8"}) + "]";
      case 7: return "shl " + gpr() + ", " + std::to_string(1 + rng_.below(7));
      case 8: return "inc " + gpr();
      case 9: return "cmp " + gpr() + ", " + gpr();
      case 10: return "add " + gpr() + ", " + imm();
      default: return "mov " + gpr() + ", " + imm();
    }
  }
  std::string vector() {
    switch (rng_.below(9)) {
      case 0: return "vaddss " + xmm() + ", " + xmm() + ", " + xmm();
      case 1: return "vmulss " + xmm() + ", " + xmm() + ", " + xmm();
      case 2: return "vxorps " + xmm() + ", " + xmm() + ", " + xmm();
      case 3: return "vmovaps " + xmm() + ", " + xmm();
      case 4: return "vsubss " + xmm() + ", " + xmm() + ", " + xmm();
      case 5: return "vfmadd231ss " + xmm() + ", " + xmm() + ", " + xmm();
      case 6: return "mulsd " + xmm() + ", " + xmm();
      case 7: return "addss " + xmm() + ", " + xmm();
      default: return "movaps " + xmm() + ", " + xmm();
    }
  }
  std::string load(bool fp) {
    if (fp && rng_.below(2)) return "vmovss " + xmm() + ", dword ptr " + addr();
    return (rng_.below(3) ? "mov " : "add ") + gpr() + ", qword ptr " + addr();
  }
  std::string store(bool fp) {
    if (fp && rng_.below(2)) return "vmovss dword ptr " + addr() + ", " + xmm();
    if (rng_.below(4) == 0) return "mov dword ptr " + addr() + ", " + imm();
    return "mov qword ptr " + addr() + ", " + gpr();
  }
  std::string expensive(bool fp) {
    if (fp) {
      switch (rng_.below(3)) {
        case 0: return "vdivss " + xmm() + ", " + xmm() + ", " + xmm();
        case 1: return "vsqrtss " + xmm() + ", " + xmm() + ", " + xmm();
        default: return "divsd " + xmm() + ", " + xmm();
      }
    }
    switch (rng_.below(3)) {
      case 0: return "div " + pick<std::string>({"rbx", "rcx", "rsi", "rdi", "r8"});
      case 1: return "imul " + gpr() + ", " + gpr() + ", " + imm();
      default: return "imul " + gpr() + ", " + gpr();
    }
  }

  RandomStream& rng() { return rng_; }

 private:
  RandomStream& rng_;
};

const std::vector<std::string> kCategories = {"scalar", "vector", "scalar/vector", "load", "store", "load/store"};

}  // namespace

std::vector<DatasetRecord> generate_fixtures(const IsaKb& kb, int count, std::uint64_t seed) {
  std::vector<DatasetRecord> out;
  for (int i = 0; i < count; ++i) {
    const std::string& category = kCategories[static_cast<std::size_t>(i) % kCategories.size()];
    RandomStream rng(seed, static_cast<std::uint64_t>(i));
    BlockWriter w(rng);
    const int n = 4 + static_cast<int>(rng.below(7));
    const bool fp = category == "vector" || category == "scalar/vector" || rng.below(4) == 0;

    // Mandatory lines for the category, then filler, then shuffle.
    std::vector<std::string> lines;
    if (category == "vector") lines.push_back(w.vector());
    if (category == "scalar/vector") {
      lines.push_back(w.scalar());
      lines.push_back(w.vector());
    }
    if (category == "load" || category == "load/store") lines.push_back(w.load(fp));
    if (category == "store" || category == "load/store") lines.push_back(w.store(fp));
    if (category == "scalar") lines.push_back(w.scalar());
    if (rng.below(6) == 0) lines.push_back(w.expensive(fp && category != "scalar"));
    while (static_cast<int>(lines.size()) < n) {
      if (category == "vector")
        lines.push_back(w.vector());
      else if (category == "scalar/vector")
        lines.push_back(rng.below(2) ? w.scalar() : w.vector());
      else if (category == "load" && rng.below(3) == 0)
        lines.push_back(w.load(fp));
      else if (category == "store" && rng.below(3) == 0)
        lines.push_back(w.store(fp));
      else if (category == "load/store" && rng.below(3) == 0)
        lines.push_back(rng.below(2) ? w.load(fp) : w.store(fp));
      else
        lines.push_back(w.scalar());
    }
    for (std::size_t k = lines.size(); k > 1; --k) std::swap(lines[k - 1], lines[rng.below(k)]);

    DatasetRecord r;
    char id[32];
    std::snprintf(id, sizeof id, "fx%03d", i + 1);
    r.id = id;
    r.asm_lines = lines;
    r.block = parse_lines(lines, kb);
    bool has_xmm = false;
    for (const auto& l : lines) has_xmm |= l.find("xmm") != std::string::npos;
    r.source = has_xmm ? "synth-fp" : "synth-int";
    r.category = category;
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

bool EvalRow::has(FeatureType t) const {
  return std::any_of(features.begin(), features.end(), [&](const Feature& f) { return f.type == t; });
}

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd m;
  m.count = xs.size();
  if (xs.empty()) return m;
  double sum = 0.0;
  for (double x : xs) sum += x;
  m.mean = sum / static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - m.mean) * (x - m.mean);
  m.stddev = std::sqrt(var / static_cast<double>(xs.size()));
  return m;
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, jobs)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  for (auto& t : pool) t.join();
}

bool explanation_correct(const FeatureSet& explanation, const FeatureSet& ground_truth) {
  return !explanation.empty() && explanation.subset_of(ground_truth);
}

namespace {

struct Prepared {
  BlockGraph graph;
  FeatureSet gt;
};

std::vector<Prepared> prepare(const std::vector<DatasetRecord>& records, const IsaKb& kb, const CostTable& table) {
  std::vector<Prepared> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    Prepared p{build_graph(kb, r.block), {}};
    p.gt = ground_truth_explanation(table, p.graph);
    out.push_back(std::move(p));
  }
  return out;
}

EvalRow base_row(const DatasetRecord& r, std::uint64_t seed, std::string method) {
  EvalRow row;
  row.id = r.id;
  row.seed = seed;
  row.method = std::move(method);
  row.source = r.source;
  row.category = r.category;
  return row;
}

nlohmann::ordered_json ms_json(const MeanStd& m) {
  return {{"mean", m.mean}, {"stddev", m.stddev}, {"n", m.count}};
}

std::string pm(const MeanStd& m, int digits) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.*f +- %.*f", digits, m.mean, digits, m.stddev);
  return buf;
}

}  // namespace

nlohmann::ordered_json accuracy_aggregate(const std::vector<EvalRow>& rows) {
  std::map<std::string, std::map<std::uint64_t, std::pair<int, int>>> per;  // method -> seed -> (correct, total)
  std::map<std::string, int> failures;
  std::vector<std::string> order;
  for (const auto& r : rows) {
    if (!per.count(r.method)) order.push_back(r.method);
    auto& slot = per[r.method][r.seed];
    if (r.failed) {
      ++failures[r.method];
      continue;
    }
    slot.second += 1;
    if (r.correct.value_or(false)) slot.first += 1;
  }
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (const auto& method : order) {
    std::vector<double> accs;
    nlohmann::ordered_json seeds = nlohmann::ordered_json::array();
    for (const auto& [seed, ct] : per[method]) {
      double acc = ct.second ? 100.0 * ct.first / ct.second : 0.0;
      accs.push_back(acc);
      seeds.push_back({{"seed", seed}, {"accuracy", acc}, {"correct", ct.first}, {"evaluated", ct.second}});
    }
    nlohmann::ordered_json m = ms_json(mean_std(accs));
    m["per_seed"] = seeds;
    m["excluded"] = failures[method];
    out[method] = m;
  }
  return out;
}

EvalReport accuracy_eval(const std::vector<DatasetRecord>& records, const IsaKb& kb, const CostTable& table,
                         const ExplainConfig& cfg, const std::vector<std::uint64_t>& seeds, int jobs) {
  if (records.empty()) throw ConfigError("accuracy evaluation needs at least one record");
  const auto prepared = prepare(records, kb, table);
  CrudeModel model(kb, table);
  EvalReport rep;
  rep.kind = "accuracy";
  rep.rows.resize(records.size() * seeds.size());
  parallel_for(rep.rows.size(), jobs, [&](std::size_t t) {
    const std::size_t si = t / records.size();
    const std::size_t ri = t % records.size();
    EvalRow row = base_row(records[ri], seeds[si], "comet");
    ExplainConfig c = cfg;
    c.master_seed = task_seed(seeds[si], records[ri].id);
    try {
      Explanation e = explain(model, kb, prepared[ri].graph, c);
      row.features = e.features;
      row.correct = explanation_correct(e.features, prepared[ri].gt);
      row.precision = e.est_precision;
      row.coverage = e.est_coverage;
      row.time = e.wall_time;
      row.converged = e.converged;
    } catch (const std::exception& ex) {
      row.failed = true;
      row.error = ex.what();
    }
    rep.rows[t] = std::move(row);
  });
  rep.aggregates = accuracy_aggregate(rep.rows);
  rep.summary = "comet accuracy " + pm(mean_std([&] {
                  std::vector<double> v;
                  for (const auto& s : rep.aggregates["comet"]["per_seed"]) v.push_back(s["accuracy"].get<double>());
                  return v;
                }()), 2) + " %";
  return rep;
}

std::map<FeatureType, double> ground_truth_type_frequency(const std::vector<DatasetRecord>& records,
                                                          const IsaKb& kb, const CostTable& table) {
  std::map<FeatureType, double> count{{FeatureType::Inst, 0}, {FeatureType::Dep, 0}, {FeatureType::NumInsts, 0}};
  double total = 0.0;
  for (const auto& p : prepare(records, kb, table))
    for (const auto& f : p.gt) {
      count[f.type] += 1.0;
      total += 1.0;
    }
  if (total > 0.0)
    for (auto& [_, v] : count) v /= total;
  return count;
}

EvalReport baseline_random(const std::vector<DatasetRecord>& records, const IsaKb& kb, const CostTable& table,
                           const std::vector<std::uint64_t>& seeds) {
  if (records.empty()) throw ConfigError("baseline needs at least one record");
  const auto prepared = prepare(records, kb, table);
  const auto freq = ground_truth_type_frequency(records, kb, table);
  EvalReport rep;
  rep.kind = "random";
  for (std::uint64_t seed : seeds)
    for (std::size_t ri = 0; ri < records.size(); ++ri) {
      EvalRow row = base_row(records[ri], seed, "random");
      RandomStream rng(seed, fnv1a(records[ri].id));
      std::vector<Feature> chosen;
      for (const auto& f : extract_features(prepared[ri].graph))
        if (rng.bernoulli(freq.at(f.type))) chosen.push_back(f);
      row.features = FeatureSet(std::move(chosen));
      row.correct = explanation_correct(row.features, prepared[ri].gt);
      rep.rows.push_back(std::move(row));
    }
  rep.aggregates = accuracy_aggregate(rep.rows);
  rep.aggregates["type_frequency"] = {{"inst", freq.at(FeatureType::Inst)},
                                      {"dep", freq.at(FeatureType::Dep)},
                                      {"num_insts", freq.at(FeatureType::NumInsts)}};
  return rep;
}

EvalReport baseline_fixed(const std::vector<DatasetRecord>& records, const IsaKb& kb, const CostTable& table) {
  if (records.empty()) throw ConfigError("baseline needs at least one record");
  const auto prepared = prepare(records, kb, table);
  const auto freq = ground_truth_type_frequency(records, kb, table);
  FeatureType top = FeatureType::Inst;
  for (FeatureType t : {FeatureType::Inst, FeatureType::Dep, FeatureType::NumInsts})
    if (freq.at(t) > freq.at(top)) top = t;
  EvalReport rep;
  rep.kind = "fixed";
  for (std::size_t ri = 0; ri < records.size(); ++ri) {
    EvalRow row = base_row(records[ri], 0, "fixed");
    for (const auto& f : extract_features(prepared[ri].graph))
      if (f.type == top) {
        row.features = FeatureSet{f};
        break;
      }
    row.correct = explanation_correct(row.features, prepared[ri].gt);
    rep.rows.push_back(std::move(row));
  }
  rep.aggregates = accuracy_aggregate(rep.rows);
  rep.aggregates["fixed_type"] = std::string(type_name(top));
  return rep;
}

EvalReport prec_cov_eval(const std::vector<DatasetRecord>& records, const IsaKb& kb, const CostModel& model,
                         const ExplainConfig& cfg, const std::vector<std::uint64_t>& seeds, int jobs) {
  if (records.empty()) throw ConfigError("precision/coverage evaluation needs at least one record");
  if (!model.concurrent_safe()) jobs = 1;
  EvalReport rep;
  rep.kind = "preccov";
  rep.rows.resize(records.size() * seeds.size());
  parallel_for(rep.rows.size(), jobs, [&](std::size_t t) {
    const std::size_t si = t / records.size();
    const std::size_t ri = t % records.size();
    EvalRow row = base_row(records[ri], seeds[si], "comet");
    ExplainConfig c = cfg;
    c.master_seed = task_seed(seeds[si], records[ri].id);
    try {
      Explanation e = explain(model, kb, records[ri].block, c);
      row.features = e.features;
      row.precision = e.est_precision;
      row.coverage = e.est_coverage;
      row.time = e.wall_time;
      row.converged = e.converged;
    } catch (const std::exception& ex) {
      row.failed = true;
      row.error = ex.what();
    }
    rep.rows[t] = std::move(row);
  });
  std::vector<double> p, c, tm;
  int failed = 0;
  for (const auto& r : rep.rows) {
    if (r.failed) {
      ++failed;
      continue;
    }
    p.push_back(*r.precision);
    c.push_back(*r.coverage);
    tm.push_back(*r.time);
  }
  rep.aggregates["precision"] = ms_json(mean_std(p));
  rep.aggregates["coverage"] = ms_json(mean_std(c));
  rep.aggregates["time"] = ms_json(mean_std(tm));
  rep.aggregates["excluded"] = failed;
  rep.summary = "precision " + pm(mean_std(p), 3) + ", coverage " + pm(mean_std(c), 3);
  return rep;
}

MapeResult mape(const std::vector<DatasetRecord>& records, const CostModel& model, const std::string& march) {
  if (records.empty()) throw ConfigError("MAPE needs at least one record");
  MapeResult out;
  double sum = 0.0;
  for (const auto& r : records) {
    auto it = r.measured.find(march);
    if (it == r.measured.end()) throw ConfigError("record '" + r.id + "' has no measurement for " + march);
    double ape = 100.0 * std::fabs(model.predict(r.block) - it->second) / it->second;
    out.per_record.emplace_back(r.id, ape);
    sum += ape;
  }
  out.mape = sum / static_cast<double>(records.size());
  return out;
}

GroupBy parse_group_by(std::string_view s) {
  if (s == "none") return GroupBy::None;
  if (s == "source") return GroupBy::Source;
  if (s == "category") return GroupBy::Category;
  throw ConfigError("unknown group key '" + std::string(s) + "' (expected none, source or category)");
}

std::vector<ProminenceRow> prominence(const std::vector<EvalRow>& rows, GroupBy group_by) {
  std::map<std::string, ProminenceRow> groups;
  for (const auto& r : rows) {
    if (r.failed) continue;
    std::string g = "all";
    if (group_by == GroupBy::Source) g = r.source.value_or("unknown");
    if (group_by == GroupBy::Category) g = r.category.value_or("unknown");
    auto& row = groups[g];
    row.group = g;
    row.explanations += 1;
    row.pct_num_insts += r.has(FeatureType::NumInsts);
    row.pct_inst += r.has(FeatureType::Inst);
    row.pct_dep += r.has(FeatureType::Dep);
  }
  std::vector<ProminenceRow> out;
  for (auto& [_, row] : groups) {
    double n = static_cast<double>(row.explanations);
    row.pct_num_insts = 100.0 * row.pct_num_insts / n;
    row.pct_inst = 100.0 * row.pct_inst / n;
    row.pct_dep = 100.0 * row.pct_dep / n;
    out.push_back(row);
  }
  return out;
}

nlohmann::ordered_json report_json(const EvalReport& report, bool with_timing) {
  nlohmann::ordered_json j;
  j["kind"] = report.kind;
  j["config"] = report.config;
  j["aggregates"] = report.aggregates;
  if (!with_timing && j["aggregates"].contains("time")) j["aggregates"]["time"] = nullptr;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    nlohmann::ordered_json o;
    o["id"] = r.id;
    o["seed"] = r.seed;
    o["method"] = r.method;
    nlohmann::ordered_json fs = nlohmann::ordered_json::array();
    for (const auto& f : r.features) fs.push_back(to_string(f));
    o["features"] = fs;
    o["correct"] = r.correct ? nlohmann::ordered_json(*r.correct) : nlohmann::ordered_json(nullptr);
    o["precision"] = r.precision ? nlohmann::ordered_json(*r.precision) : nlohmann::ordered_json(nullptr);
    o["coverage"] = r.coverage ? nlohmann::ordered_json(*r.coverage) : nlohmann::ordered_json(nullptr);
    o["time"] = with_timing && r.time ? nlohmann::ordered_json(*r.time) : nlohmann::ordered_json(nullptr);
    o["converged"] = r.converged;
    o["source"] = r.source ? nlohmann::ordered_json(*r.source) : nlohmann::ordered_json(nullptr);
    o["category"] = r.category ? nlohmann::ordered_json(*r.category) : nlohmann::ordered_json(nullptr);
    o["failed"] = r.failed;
    if (r.failed) o["error"] = r.error;
    rows.push_back(o);
  }
  j["rows"] = rows;
  return j;
}

std::string report_csv(const EvalReport& report, bool with_timing) {
  std::string out = "id,seed,method,correct,precision,coverage,time,has_n,has_inst,has_dep,failed,features\n";
  for (const auto& r : report.rows) {
    std::string feats;
    for (const auto& f : r.features) feats += (feats.empty() ? "" : ";") + to_string(f);
    out += r.id + "," + std::to_string(r.seed) + "," + r.method + ",";
    out += r.correct ? (*r.correct ? "1" : "0") : "";
    out += ",";
    out += r.precision ? fmt(*r.precision) : "";
    out += ",";
    out += r.coverage ? fmt(*r.coverage) : "";
    out += ",";
    out += with_timing && r.time ? fmt(*r.time) : "";
    out += ",";
    out += std::string(r.has(FeatureType::NumInsts) ? "1" : "0") + "," + (r.has(FeatureType::Inst) ? "1" : "0") + "," +
           (r.has(FeatureType::Dep) ? "1" : "0") + "," + (r.failed ? "1" : "0") + ",\"" + feats + "\"\n";
  }
  return out;
}

}  // namespace comet
