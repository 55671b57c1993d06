// One line per acceptance criterion; exit status is nonzero if any fails.
// Usage: acceptance <path-to-comet-cli>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>
#include <unistd.h>

#include "comet/eval.hpp"
#include "comet/explain.hpp"
#include "comet/perturb.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace comet;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::cout << "criterion " << id << " " << name << ": " << (ok ? "PASS" : "FAIL") << " (" << detail << ")"
            << std::endl;
  if (!ok) ++failures;
}

std::string fmt(double x, int prec = 2) {
  std::ostringstream o;
  o.precision(prec);
  o << std::fixed << x;
  return o.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

struct Shared {
  IsaKb core = load_kb(oracle::data_path("isa_core.json"));
  IsaKb tiny = load_kb(oracle::data_path("isa_tiny.json"));
  CostTable hsw = CostTable::load(oracle::data_path("costs_hsw.csv"), "hsw");
  std::vector<DatasetRecord> fixtures = load_dataset(oracle::data_path("fixtures.jsonl"), core);
  EvalReport accuracy;
  ExplainConfig cfg;
};

// ---------------------------------------------------------------------------

void accuracy(Shared& s) {
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  auto t0 = std::chrono::steady_clock::now();
  s.accuracy = accuracy_eval(s.fixtures, s.core, s.hsw, s.cfg, seeds, jobs());
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  auto rnd = baseline_random(s.fixtures, s.core, s.hsw, seeds);
  auto fix = baseline_fixed(s.fixtures, s.core, s.hsw);
  double comet = s.accuracy.aggregates["comet"]["mean"].get<double>();
  double cstd = s.accuracy.aggregates["comet"]["stddev"].get<double>();
  double random = rnd.aggregates["random"]["mean"].get<double>();
  double fixed = fix.aggregates["fixed"]["mean"].get<double>();
  bool ok = comet >= 90.0 && random <= comet - 30.0 && fixed < comet && secs < 900.0;
  report(1, "accuracy", ok,
         "comet " + fmt(comet) + " +- " + fmt(cstd) + " %, random " + fmt(random) + " %, fixed " + fmt(fixed) +
             " %, " + fmt(secs, 0) + " s over " + std::to_string(s.fixtures.size()) + " blocks x 5 seeds");
}

void holdout(Shared& s) {
  CrudeModel model(s.core, s.hsw);
  std::map<std::string, const DatasetRecord*> by_id;
  for (const auto& r : s.fixtures) by_id[r.id] = &r;
  std::vector<const EvalRow*> rows;
  for (const auto& r : s.accuracy.rows)
    if (!r.failed) rows.push_back(&r);
  std::vector<double> prec(rows.size(), 0.0);
  const double eps = s.cfg.epsilon.value_or(model.default_epsilon());
  parallel_for(rows.size(), jobs(), [&](std::size_t i) {
    const auto& row = *rows[i];
    auto g = build_graph(s.core, by_id.at(row.id)->block);
    Perturber p(s.core, g, s.cfg.perturb);
    TargetInterval target{model.predict_graph(g), eps, s.cfg.interval};
    RandomStream fresh(0x686f6c646f7574ULL + row.seed, i);
    prec[i] = precision_estimate(model, p, row.features, target, fresh, 1000).mean();
  });
  std::size_t good = 0;
  for (double p : prec) good += p >= 0.65;
  double frac = rows.empty() ? 0.0 : double(good) / double(rows.size());
  report(2, "holdout precision", !rows.empty() && frac >= 0.95,
         std::to_string(good) + "/" + std::to_string(rows.size()) + " runs >= 0.65 on 1000 fresh draws");
}

oracle::TBlock random_tiny(std::mt19937_64& rng, const std::vector<oracle::TInst>& u, int len) {
  oracle::TBlock b;
  for (int k = 0; k < len; ++k) b.push_back(u[rng() % u.size()]);
  return b;
}

void monotonicity(Shared& s) {
  auto u = oracle::universe({"rax", "rbx", "rcx", "rsp"}, true);
  std::mt19937_64 rng(3);
  int pairs = 0, violations = 0, strict = 0;
  while (pairs < 150) {
    auto tb = random_tiny(rng, u, 2 + int(rng() % 2));
    auto g = build_graph(s.tiny, parse_block(oracle::render(tb), s.tiny));
    FeatureSet all = extract_features(g), f1, f2;
    for (const auto& f : all)
      if (rng() % 10 < 3) f2.insert(f);
    for (const auto& f : f2)
      if (rng() % 2) f1.insert(f);
    auto e1 = enumerate_space(s.tiny, g, f1, 1000000);
    auto e2 = enumerate_space(s.tiny, g, f2, 1000000);
    std::set<std::string> s1;
    for (const auto& b : e1) s1.insert(render_block(b));
    bool sub = true;
    for (const auto& b : e2) sub = sub && s1.count(render_block(b));
    violations += !sub;
    strict += e2.size() < e1.size();
    ++pairs;
  }
  report(3, "monotonicity", violations == 0 && pairs >= 100,
         std::to_string(pairs) + " pairs, " + std::to_string(violations) + " violations, " + std::to_string(strict) +
             " strictly smaller");
}

void hazards(Shared& s) {
  std::size_t blocks = 0, mismatches = 0;
  std::string first_bad;
  auto sweep = [&](const std::vector<oracle::TInst>& u, int max_len) {
    std::vector<Instruction> parsed;
    for (const auto& t : u) parsed.push_back(parse_instruction(oracle::render(t), s.tiny));
    std::vector<std::size_t> idx;
    std::function<void(int)> rec = [&](int len) {
      if (int(idx.size()) == len) {
        std::vector<Instruction> ins;
        oracle::TBlock tb;
        for (auto k : idx) {
          ins.push_back(parsed[k]);
          tb.push_back(u[k]);
        }
        auto g = build_graph(s.tiny, BasicBlock(std::move(ins)));
        ++blocks;
        if (oracle::library_edges(g) != oracle::hazards(tb)) {
          if (!mismatches) first_bad = oracle::render(tb);
          ++mismatches;
        }
        return;
      }
      for (std::size_t k = 0; k < u.size(); ++k) {
        idx.push_back(k);
        rec(len);
        idx.pop_back();
      }
    };
    for (int len = 1; len <= max_len; ++len) rec(len);
  };
  // Every shape over three register families up to length 4, and over four
  // families (with sub) up to length 3.
  sweep(oracle::universe({"rax", "rbx", "rsp"}, false), 4);
  sweep(oracle::universe({"rax", "rbx", "rcx", "rsp"}, true), 3);

  auto cs2 = build_graph(s.core, parse_block(slurp(oracle::data_path("blocks/cs2.s")), s.core));
  std::set<oracle::Edge> got;
  for (const auto& e : oracle::library_edges(cs2))
    if (std::get<3>(e) == "rax" || std::get<3>(e) == "rdx") got.insert(e);
  // Hand-derived from the listing: 1 r{rdx} w{rcx}; 2 r{rdx} w{rdx}; 3 r{rax,rcx} w{rax};
  // 4 r{rax,rcx,rdx} w{rax,rdx}; 5 r{rcx} w{rdx}; 6 r{rax,rcx} w{rax}.
  const std::set<oracle::Edge> want{
      {2, 4, "raw", "rdx"}, {3, 4, "raw", "rax"}, {3, 6, "raw", "rax"}, {4, 6, "raw", "rax"},
      {1, 2, "war", "rdx"}, {1, 4, "war", "rdx"}, {1, 5, "war", "rdx"}, {2, 4, "war", "rdx"},
      {2, 5, "war", "rdx"}, {3, 4, "war", "rax"}, {3, 6, "war", "rax"}, {4, 5, "war", "rdx"},
      {4, 6, "war", "rax"}, {2, 4, "waw", "rdx"}, {2, 5, "waw", "rdx"}, {3, 4, "waw", "rax"},
      {3, 6, "waw", "rax"}, {4, 5, "waw", "rdx"}, {4, 6, "waw", "rax"}};
  bool cs2_ok = got == want && extract_features(cs2).contains(Feature::dependency({3, 6, DepKind::RAW, "rax"})) &&
                extract_features(cs2).contains(Feature::inst(4));
  report(4, "hazard oracle", mismatches == 0 && cs2_ok,
         std::to_string(blocks) + " tiny blocks, " + std::to_string(mismatches) + " mismatches" +
             (first_bad.empty() ? "" : " (first: " + first_bad + ")") + ", case-study edges " +
             (cs2_ok ? "match" : "differ"));
}

void soundness(Shared& s) {
  std::size_t draws = 0, lost = 0, invalid = 0, identity_bad = 0;
  const int per_fixture = 200;
  for (std::size_t fi = 0; fi < s.fixtures.size(); ++fi) {
    auto g = build_graph(s.core, s.fixtures[fi].block);
    FeatureSet all = extract_features(g);
    Perturber p(s.core, g);
    RandomStream root(55, fi);
    for (int d = 0; d < per_fixture; ++d) {
      RandomStream pick = root.split(2 * d);
      FeatureSet F;
      const int want = static_cast<int>(pick.below(4));
      for (int k = 0; k < want; ++k) F.insert(all[pick.below(all.size())]);
      auto r = p.sample(F, root.split(2 * d + 1));
      ++draws;
      for (const auto& f : F) lost += !feature_present(g, r.graph, r.vertex_map, f);
      for (const auto& ins : r.block.instructions()) invalid += !validate_instruction(s.core, ins);
    }
    for (int d = 0; d < 10; ++d) identity_bad += !(p.sample(all, RandomStream(77, d)).block == s.fixtures[fi].block);
  }
  report(5, "perturbation soundness", draws >= 10000 && lost == 0 && invalid == 0 && identity_bad == 0,
         std::to_string(draws) + " draws, " + std::to_string(lost) + " lost features, " + std::to_string(invalid) +
             " invalid instructions, " + std::to_string(identity_bad) + " non-identity draws for the full set");
}

void space_size(Shared& s) {
  auto u = oracle::universe({"rax", "rbx", "rcx", "rsp"}, true);
  std::vector<oracle::TBlock> blocks;
  for (const auto& t : u) blocks.push_back({t});
  std::mt19937_64 rng(6);
  for (int k = 0; k < 300; ++k) blocks.push_back(random_tiny(rng, u, 2 + k % 2));

  std::size_t checks = 0, wrong = 0;
  std::string first_bad;
  for (const auto& tb : blocks) {
    auto g = build_graph(s.tiny, parse_block(oracle::render(tb), s.tiny));
    FeatureSet all = extract_features(g);
    // F = empty, then one random feature of each kind when available.
    std::vector<std::pair<FeatureSet, oracle::Preserve>> cases{{FeatureSet{}, oracle::Preserve{}}};
    int k = 1 + int(rng() % tb.size());
    cases.push_back({FeatureSet{Feature::inst(k)}, oracle::Preserve{{k}, {}, false}});
    cases.push_back({FeatureSet{Feature::num_insts(int(tb.size()))}, oracle::Preserve{{}, {}, true}});
    std::vector<Feature> deps;
    for (const auto& f : all)
      if (f.type == FeatureType::Dep) deps.push_back(f);
    if (!deps.empty()) {
      const Feature& f = deps[rng() % deps.size()];
      std::string kind(to_string(f.dep.kind));
      std::transform(kind.begin(), kind.end(), kind.begin(), [](unsigned char c) { return std::tolower(c); });
      cases.push_back({FeatureSet{f}, oracle::Preserve{{}, {{f.dep.src, f.dep.dst, kind, f.dep.resource}}, false}});
    }
    for (const auto& [F, P] : cases) {
      auto truth = oracle::tiny_space(tb, P);
      double est = std::pow(10.0, estimate_space_size(s.tiny, g, F).log10_count);
      std::set<std::string> listed;
      for (const auto& b : enumerate_space(s.tiny, g, F, 1000000)) listed.insert(render_block(b));
      ++checks;
      if (std::llround(est) != static_cast<long long>(truth.size()) || listed != truth) {
        if (!wrong) first_bad = oracle::render(tb);
        ++wrong;
      }
    }
  }
  auto vd = build_graph(s.core, parse_block(slurp(oracle::data_path("blocks/vdivss.s")), s.core));
  auto vs = estimate_space_size(s.core, vd, {});
  bool range = vs.log10_count >= 25.0 && vs.log10_count <= 45.0;
  report(6, "space size", wrong == 0 && range,
         std::to_string(checks) + " tiny cases, " + std::to_string(wrong) + " mismatches" +
             (first_bad.empty() ? "" : " (first: " + first_bad + ")") + ", vdivss block " + vs.scientific());
}

void kl_bounds(Shared&) {
  const std::vector<long> trials{1, 2, 5, 10, 20, 50, 100, 500, 1000, 5000};
  const std::vector<double> fractions{0.0, 0.3, 0.5, 0.8, 1.0};
  const std::vector<double> levels{0.1, 1.0, 2.5, 5.0};
  int cases = 0, off = 0, unbracketed = 0;
  double worst = 0.0;
  for (long n : trials)
    for (double fr : fractions)
      for (double lv : levels) {
        long succ = std::lround(fr * double(n));
        double p = double(succ) / double(n);
        double u = kl_ucb(succ, n, lv), l = kl_lcb(succ, n, lv);
        double gu = oracle::grid_ucb(succ, n, lv), gl = oracle::grid_lcb(succ, n, lv);
        double err = std::max(std::abs(u - gu), std::abs(l - gl));
        worst = std::max(worst, err);
        off += err > 1e-3;
        unbracketed += !(l <= p && p <= u);
        ++cases;
      }
  report(7, "kl bounds", cases >= 200 && off == 0 && unbracketed == 0,
         std::to_string(cases) + " cases, worst deviation " + fmt(worst * 1e4, 2) + "e-4, " +
             std::to_string(unbracketed) + " not bracketing");
}

void crude(Shared& s) {
  auto table = oracle::hand_table();
  int bad = 0;
  std::string first_bad;
  for (const auto& f : oracle::hand_fixtures()) {
    auto g = build_graph(s.core, parse_block(f.text, s.core));
    std::vector<std::string> gt;
    for (const auto& x : ground_truth_explanation(table, g)) gt.push_back(to_string(x));
    if (std::abs(crude_predict(table, g) - f.prediction) > 1e-9 || gt != f.ground_truth) {
      if (!bad) first_bad = f.name;
      ++bad;
    }
  }
  int empty = 0;
  for (const char* march : {"hsw", "skl"}) {
    auto t = CostTable::load(oracle::data_path(std::string("costs_") + march + ".csv"), march);
    for (const auto& r : s.fixtures) empty += ground_truth_explanation(t, build_graph(s.core, r.block)).empty();
  }
  report(8, "crude model", bad == 0 && empty == 0,
         std::to_string(oracle::hand_fixtures().size() - bad) + "/" + std::to_string(oracle::hand_fixtures().size()) +
             " hand fixtures exact" + (first_bad.empty() ? "" : " (first miss: " + first_bad + ")") + ", " +
             std::to_string(empty) + " empty ground truths");
}

void determinism(const std::string& cli) {
  fs::path dir = fs::temp_directory_path() / ("comet_accept_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string d = oracle::data_path("");
  const std::vector<std::pair<std::string, std::string>> runs{
      {"explain", "explain --block " + d + "blocks/cs2.s --seed 3"},
      {"explain-asm", "explain --asm \"imul rax, rbx\" --asm \"add rax, rcx\" --asm \"mov rdx, 1\" --seed 4"},
      {"perturb", "perturb --block " + d + "blocks/cs2.s --preserve inst:4 -n 5 --seed 7"},
      {"space-size", "space-size --block " + d + "blocks/vdivss.s --preserve inst:1"},
      {"graph", "graph --block " + d + "blocks/cs2.s"},
      {"fixtures", "fixtures -n 12 --seed 9"},
      {"eval-accuracy", "eval accuracy --dataset " + d + "case_studies.jsonl --seeds 2"},
      {"eval-preccov", "eval preccov --dataset " + d + "case_studies.jsonl --seeds 1,5"},
      {"eval-mape", "eval mape --dataset " + d + "case_studies.jsonl"},
      {"eval-prominence", "eval prominence --dataset " + d + "case_studies.jsonl --seeds 1 --group-by category"},
  };
  int differ = 0, failed = 0;
  std::string first_bad;
  for (const auto& [name, args] : runs) {
    std::string outs[2];
    for (int rep = 0; rep < 2; ++rep) {
      fs::path base = dir / (name + "_" + std::to_string(rep));
      bool is_eval = args.rfind("eval", 0) == 0;
      std::string cmd = "\"" + cli + "\" " + args + " --out \"" + base.string() + "\" > \"" + base.string() +
                        ".stdout\" 2>&1";
      if (std::system(cmd.c_str()) != 0) {
        ++failed;
        if (first_bad.empty()) first_bad = name + " (exit status)";
      }
      outs[rep] = slurp(base.string() + ".stdout");
      if (is_eval) {
        outs[rep] += slurp(base.string() + ".json") + slurp(base.string() + ".csv");
      } else {
        outs[rep] += slurp(base);
      }
    }
    if (outs[0] != outs[1] || outs[0].empty()) {
      ++differ;
      if (first_bad.empty()) first_bad = name;
    }
  }
  fs::remove_all(dir);
  report(9, "determinism", differ == 0 && failed == 0,
         std::to_string(runs.size()) + " subcommand runs twice, " + std::to_string(differ) + " differ, " +
             std::to_string(failed) + " failed" + (first_bad.empty() ? "" : " (first: " + first_bad + ")"));
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <comet-cli>\n";
    return 2;
  }
  Shared s;
  accuracy(s);
  holdout(s);
  monotonicity(s);
  hazards(s);
  soundness(s);
  space_size(s);
  kl_bounds(s);
  crude(s);
  determinism(argv[1]);
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : std::string("all criteria passed"))
            << std::endl;
  return failures ? 1 : 0;
}
