#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "comet/asm.hpp"
#include "comet/cost_model.hpp"
#include "comet/error.hpp"
#include "comet/eval.hpp"
#include "comet/explain.hpp"
#include "comet/graph.hpp"
#include "comet/isa.hpp"
#include "comet/perturb.hpp"

namespace fs = std::filesystem;
using comet::ConfigError;
using json = nlohmann::ordered_json;

namespace {

enum Exit { kOk = 0, kInternal = 1, kUsage = 2, kParse = 3, kModel = 4, kUnconverged = 5 };

fs::path data_dir() {
  if (const char* env = std::getenv("COMET_DATA_DIR"); env && *env) return env;
  return COMET_DATA_DIR;
}

std::string read_file(const fs::path& p, const std::string& what) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + what + " " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Options {
  std::string kb;
  std::string table;
  std::string march = "hsw";
  std::string model = "crude";
  std::string config;
  std::uint64_t seed = 0;
  std::string seeds = "5";
  int jobs = 0;
  std::string out;
  bool timing = false;
  std::string block_file;
  std::vector<std::string> asm_lines;
  std::vector<std::string> preserve;
  int count = 1;
  std::string dataset;
  std::string group_by = "none";
  std::string eval_kind;
  double timeout = 30.0;
};

void add_common(CLI::App* app, Options& o) {
  app->add_option("--kb", o.kb, "ISA knowledge base JSON (default: bundled isa_core.json)");
  app->add_option("--march", o.march, "microarchitecture label")->capture_default_str();
  app->add_option("--table", o.table, "per-mnemonic cost CSV (default: bundled costs_<march>.csv)");
  app->add_option("--model", o.model, "crude | exec:<command>")->capture_default_str();
  app->add_option("--config", o.config, "JSON overriding the bundled defaults field-wise");
  app->add_option("--out", o.out, "output path (eval: report prefix)");
  app->add_option("--jobs", o.jobs, "worker threads (default: hardware, capped at 4 for external models)");
  app->add_option("--timeout", o.timeout, "seconds per external model query")->capture_default_str();
  app->add_flag("--timing", o.timing, "include wall-clock times in outputs");
}

void add_block(CLI::App* app, Options& o) {
  auto* b = app->add_option("--block", o.block_file, "assembly file, '-' for stdin");
  auto* a = app->add_option("--asm", o.asm_lines, "one instruction per occurrence");
  b->excludes(a);
  a->excludes(b);
}

struct Context {
  comet::IsaKb kb;
  fs::path kb_path;
  fs::path table_path;
  std::shared_ptr<const comet::CostModel> model;
  std::unique_ptr<comet::CostTable> table;
  comet::ExplainConfig cfg;
  int jobs = 1;
};

comet::CostTable load_table(const Options& o, fs::path& path) {
  path = o.table.empty() ? data_dir() / ("costs_" + o.march + ".csv") : fs::path(o.table);
  if (!fs::exists(path)) throw ConfigError("cannot read cost table " + path.string());
  return comet::CostTable::load(path, o.march);
}

Context make_context(const Options& o, bool need_model, bool need_table) {
  Context c;
  c.kb_path = o.kb.empty() ? data_dir() / "isa_core.json" : fs::path(o.kb);
  if (!fs::exists(c.kb_path)) throw ConfigError("cannot read knowledge base " + c.kb_path.string());
  c.kb = comet::load_kb(c.kb_path);

  auto defaults = nlohmann::json::parse(read_file(data_dir() / "defaults.json", "defaults"), nullptr, false);
  if (defaults.is_discarded()) throw ConfigError("bundled defaults.json is not valid JSON");
  c.cfg = comet::config_from_json(defaults);
  if (!o.config.empty()) {
    auto user = nlohmann::json::parse(read_file(o.config, "config"), nullptr, false);
    if (user.is_discarded()) throw ConfigError("config " + o.config + " is not valid JSON");
    c.cfg = comet::config_from_json(user, c.cfg);
  }
  c.cfg.master_seed = o.seed;

  const bool external = o.model.rfind("exec:", 0) == 0;
  if (!external && o.model != "crude") throw ConfigError("unknown model '" + o.model + "' (crude | exec:<command>)");
  if (need_table || (need_model && !external)) {
    c.table = std::make_unique<comet::CostTable>(load_table(o, c.table_path));
    c.table->check_covers(c.kb);
  }
  int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  c.jobs = o.jobs > 0 ? o.jobs : (external ? std::min(hw, 4) : hw);
  if (need_model) {
    if (external) {
      std::string cmd = o.model.substr(5);
      if (cmd.empty()) throw ConfigError("empty command in --model exec:");
      auto inner = std::make_shared<comet::ExternalModel>(cmd, o.march, o.timeout, c.jobs);
      c.model = std::make_shared<comet::CachedModel>(inner, 1u << 16);
    } else {
      c.model = std::make_shared<comet::CrudeModel>(c.kb, *c.table);
    }
    if (!c.cfg.epsilon) c.cfg.epsilon = c.model->default_epsilon();
  }
  return c;
}

json run_echo(const Options& o, const Context& c) {
  json j;
  j["kb"] = c.kb_path.filename().string();
  if (!c.table_path.empty()) j["table"] = c.table_path.filename().string();
  j["march"] = o.march;
  j["model"] = o.model;
  j["seed"] = o.seed;
  j["config"] = comet::config_json(c.cfg);
  return j;
}

comet::BasicBlock read_block(const Options& o, const comet::IsaKb& kb) {
  if (!o.asm_lines.empty()) return comet::parse_lines(o.asm_lines, kb);
  if (o.block_file.empty()) throw ConfigError("a block is required (--block FILE or --asm LINE ...)");
  if (o.block_file == "-") {
    std::stringstream ss;
    ss << std::cin.rdbuf();
    return comet::parse_block(ss.str(), kb);
  }
  return comet::parse_block(read_file(o.block_file, "block"), kb);
}

comet::FeatureSet read_preserve(const Options& o, const comet::BlockGraph& g) {
  comet::FeatureSet F;
  for (const auto& spec : o.preserve) {
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      try {
        F.insert(comet::parse_feature(item, g));
      } catch (const comet::Error& e) {
        throw ConfigError(std::string("--preserve: ") + e.what());
      }
    }
  }
  return F;
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  try {
    if (s.find(',') == std::string::npos) {
      std::size_t pos = 0;
      long long n = std::stoll(s, &pos);
      if (pos != s.size() || n < 1) throw ConfigError("--seeds expects a count N >= 1 or a comma list");
      for (long long i = 1; i <= n; ++i) out.push_back(static_cast<std::uint64_t>(i));
      return out;
    }
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
      std::size_t pos = 0;
      unsigned long long v = std::stoull(item, &pos);
      if (pos != item.size()) throw ConfigError("bad seed '" + item + "'");
      out.push_back(v);
    }
  } catch (const std::logic_error&) {
    throw ConfigError("--seeds expects a count N >= 1 or a comma list");
  }
  if (out.empty()) throw ConfigError("--seeds is empty");
  return out;
}

void emit(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + out);
  f << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------

int cmd_explain(const Options& o) {
  Context c = make_context(o, true, false);
  comet::BasicBlock bb = read_block(o, c.kb);
  comet::Explanation e = comet::explain(*c.model, c.kb, bb, c.cfg);
  json j;
  j["run"] = run_echo(o, c);
  j["block"] = comet::render_block(bb);
  j["explanation"] = comet::explanation_json(e, o.timing);
  emit(dump(j), o.out);
  if (!e.converged) {
    std::cerr << "comet: no candidate reached precision " << c.cfg.precision_threshold
              << "; reporting the full feature set\n";
    return kUnconverged;
  }
  return kOk;
}

int cmd_graph(const Options& o) {
  Context c = make_context(o, false, false);
  comet::BasicBlock bb = read_block(o, c.kb);
  auto g = comet::build_graph(c.kb, bb);
  json j;
  j["kb"] = c.kb_path.filename().string();
  j["seed"] = o.seed;
  j["graph"] = comet::graph_json(g);
  json feats = json::array();
  for (const auto& f : comet::extract_features(g)) feats.push_back(comet::to_string(f));
  j["features"] = feats;
  emit(dump(j), o.out);
  return kOk;
}

int cmd_space_size(const Options& o) {
  Context c = make_context(o, false, false);
  comet::BasicBlock bb = read_block(o, c.kb);
  auto g = comet::build_graph(c.kb, bb);
  comet::FeatureSet F = read_preserve(o, g);
  comet::SpaceSize s = comet::estimate_space_size(c.kb, g, F);
  json j;
  j["kb"] = c.kb_path.filename().string();
  j["seed"] = o.seed;
  json pres = json::array();
  for (const auto& f : F) pres.push_back(comet::to_string(f));
  j["preserve"] = pres;
  j["log10"] = s.log10_count;
  j["size"] = s.scientific();
  j["exact"] = s.exact;
  emit(dump(j), o.out);
  return kOk;
}

int cmd_perturb(const Options& o) {
  Context c = make_context(o, false, false);
  comet::BasicBlock bb = read_block(o, c.kb);
  auto g = comet::build_graph(c.kb, bb);
  comet::FeatureSet F = read_preserve(o, g);
  if (o.count < 1) throw ConfigError("-n must be >= 1");
  comet::Perturber p(c.kb, g, c.cfg.perturb);
  comet::RandomStream root(o.seed);
  std::string pres;
  for (const auto& f : F) pres += (pres.empty() ? "" : ",") + comet::to_string(f);
  std::string text = "# seed " + std::to_string(o.seed) + " preserve " + (pres.empty() ? "-" : pres) + "\n";
  for (int i = 0; i < o.count; ++i) {
    auto r = p.sample(F, root.split(static_cast<std::uint64_t>(i)));
    text += "\n" + comet::render_block(r.block);
  }
  emit(text, o.out);
  return kOk;
}

int cmd_fixtures(const Options& o) {
  Context c = make_context(o, false, false);
  auto recs = comet::generate_fixtures(c.kb, o.count, o.seed);
  std::string text;
  for (const auto& r : recs) text += comet::dataset_line(r) + "\n";
  emit(text, o.out);
  return kOk;
}

void write_report(const comet::EvalReport& rep, const std::string& prefix, bool timing) {
  emit(dump(comet::report_json(rep, timing)), prefix + ".json");
  emit(comet::report_csv(rep, timing), prefix + ".csv");
}

int cmd_eval(const Options& o) {
  const std::string& kind = o.eval_kind;
  if (o.dataset.empty()) throw ConfigError("--dataset is required");
  const bool accuracy = kind == "accuracy";
  Context c = make_context(o, !accuracy, accuracy);
  if (accuracy && o.model != "crude") throw ConfigError("eval accuracy needs the crude model (ground truth)");
  if (accuracy) c.cfg.epsilon = c.cfg.epsilon.value_or(comet::CrudeModel(c.kb, *c.table).default_epsilon());
  auto records = comet::load_dataset(o.dataset, c.kb);
  auto seeds = parse_seeds(o.seeds);
  const std::string prefix = o.out.empty() ? "comet_" + kind : o.out;

  json echo = run_echo(o, c);
  echo.erase("seed");
  echo["seeds"] = seeds;
  echo["dataset"] = fs::path(o.dataset).filename().string();

  if (accuracy) {
    auto rep = comet::accuracy_eval(records, c.kb, *c.table, c.cfg, seeds, c.jobs);
    auto rnd = comet::baseline_random(records, c.kb, *c.table, seeds);
    auto fix = comet::baseline_fixed(records, c.kb, *c.table);
    comet::EvalReport all;
    all.kind = "accuracy";
    all.config = echo;
    all.rows = rep.rows;
    all.rows.insert(all.rows.end(), rnd.rows.begin(), rnd.rows.end());
    all.rows.insert(all.rows.end(), fix.rows.begin(), fix.rows.end());
    all.aggregates = comet::accuracy_aggregate(all.rows);
    for (const auto* src : {&rnd.aggregates, &fix.aggregates})
      for (const char* key : {"type_frequency", "fixed_type"})
        if (src->contains(key)) all.aggregates[key] = (*src)[key];
    write_report(all, prefix, o.timing);
    for (const char* method : {"comet", "random", "fixed"}) {
      if (!all.aggregates.contains(method)) continue;
      const auto& a = all.aggregates[method];
      std::ostringstream line;
      line.precision(2);
      line << std::fixed << method << " accuracy " << a["mean"].get<double>() << " +- " << a["stddev"].get<double>()
           << " %";
      std::cout << line.str() << "\n";
    }
    return kOk;
  }
  if (kind == "preccov" || kind == "prominence") {
    auto rep = comet::prec_cov_eval(records, c.kb, *c.model, c.cfg, seeds, c.jobs);
    rep.config = echo;
    if (kind == "preccov") {
      write_report(rep, prefix, o.timing);
      std::cout << rep.summary << "\n";
      return kOk;
    }
    auto rows = comet::prominence(rep.rows, comet::parse_group_by(o.group_by));
    json j;
    j["kind"] = "prominence";
    j["config"] = echo;
    j["group_by"] = o.group_by;
    json arr = json::array();
    std::string csv = "group,explanations,pct_num_insts,pct_inst,pct_dep\n";
    std::string table = "group explanations %numinsts %inst %dep\n";
    for (const auto& r : rows) {
      json x;
      x["group"] = r.group;
      x["explanations"] = r.explanations;
      x["pct_num_insts"] = r.pct_num_insts;
      x["pct_inst"] = r.pct_inst;
      x["pct_dep"] = r.pct_dep;
      arr.push_back(x);
      std::ostringstream line;
      line.precision(2);
      line << std::fixed << r.group << " " << r.explanations << " " << r.pct_num_insts << " " << r.pct_inst << " "
           << r.pct_dep;
      csv += r.group + "," + std::to_string(r.explanations) + "," + json(r.pct_num_insts).dump() + "," +
             json(r.pct_inst).dump() + "," + json(r.pct_dep).dump() + "\n";
      table += line.str() + "\n";
    }
    j["rows"] = arr;
    emit(dump(j), prefix + ".json");
    emit(csv, prefix + ".csv");
    std::cout << table;
    return kOk;
  }
  if (kind == "mape") {
    auto m = comet::mape(records, *c.model, o.march);
    json j;
    j["kind"] = "mape";
    j["config"] = echo;
    j["mape"] = m.mape;
    json per = json::array();
    std::string csv = "id,ape\n";
    for (const auto& [id, ape] : m.per_record) {
      json x;
      x["id"] = id;
      x["ape"] = ape;
      per.push_back(x);
      csv += id + "," + json(ape).dump() + "\n";
    }
    j["per_record"] = per;
    emit(dump(j), prefix + ".json");
    emit(csv, prefix + ".csv");
    std::ostringstream line;
    line.precision(2);
    line << std::fixed << "mape " << m.mape << " %";
    std::cout << line.str() << "\n";
    return kOk;
  }
  throw ConfigError("unknown eval kind '" + kind + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explanations for basic block cost models"};
  app.require_subcommand(1);
  Options o;

  auto* ex = app.add_subcommand("explain", "explain one block's prediction");
  add_common(ex, o);
  add_block(ex, o);
  ex->add_option("--seed", o.seed, "master seed")->capture_default_str();

  auto* ev = app.add_subcommand("eval", "dataset experiments");
  add_common(ev, o);
  ev->add_option("kind", o.eval_kind, "accuracy | preccov | mape | prominence")
      ->required()
      ->check(CLI::IsMember({"accuracy", "preccov", "mape", "prominence"}));
  ev->add_option("--dataset", o.dataset, "JSONL dataset")->required();
  ev->add_option("--seeds", o.seeds, "count N (seeds 1..N) or a comma list")->capture_default_str();
  ev->add_option("--group-by", o.group_by, "none | source | category")
      ->check(CLI::IsMember({"none", "source", "category"}))
      ->capture_default_str();

  auto* pe = app.add_subcommand("perturb", "draw perturbed blocks");
  add_common(pe, o);
  add_block(pe, o);
  pe->add_option("--preserve", o.preserve, "features to keep, e.g. inst:4,dep:3-6:raw:rax,numinsts");
  pe->add_option("-n", o.count, "number of draws")->capture_default_str();
  pe->add_option("--seed", o.seed, "seed")->capture_default_str();

  auto* ss = app.add_subcommand("space-size", "size of the perturbation space");
  add_common(ss, o);
  add_block(ss, o);
  ss->add_option("--preserve", o.preserve, "features to keep");

  auto* gr = app.add_subcommand("graph", "dependency graph as JSON");
  add_common(gr, o);
  add_block(gr, o);

  auto* fx = app.add_subcommand("fixtures", "generate the synthetic fixture dataset");
  add_common(fx, o);
  fx->add_option("-n", o.count, "number of blocks")->capture_default_str();
  fx->add_option("--seed", o.seed, "generator seed")->capture_default_str();
  fx->callback([&] {
    if (!fx->count("-n")) o.count = 50;
    if (!fx->count("--seed")) o.seed = 2024;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*ex) return cmd_explain(o);
    if (*ev) return cmd_eval(o);
    if (*pe) return cmd_perturb(o);
    if (*ss) return cmd_space_size(o);
    if (*gr) return cmd_graph(o);
    if (*fx) return cmd_fixtures(o);
  } catch (const comet::ParseError& e) {
    std::cerr << "comet: parse error: " << e.what() << "\n";
    return kParse;
  } catch (const comet::ModelError& e) {
    std::cerr << "comet: model error: " << e.what() << "\n";
    return kModel;
  } catch (const comet::ConfigError& e) {
    std::cerr << "comet: " << e.what() << "\n";
    return kUsage;
  } catch (const comet::KbError& e) {
    std::cerr << "comet: knowledge base: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "comet: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}
