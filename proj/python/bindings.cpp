#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "comet/error.hpp"
#include "comet/eval.hpp"
#include "comet/explain.hpp"

namespace py = pybind11;
using namespace comet;

namespace {

FeatureSet features(const std::vector<std::string>& specs, const BlockGraph& g) {
  FeatureSet F;
  for (const auto& s : specs) F.insert(parse_feature(s, g));
  return F;
}

BlockGraph graph_of(const IsaKb& kb, const std::string& text) { return build_graph(kb, parse_block(text, kb)); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core: parsing, dependency graphs, perturbation and explanation.";

  auto base = py::register_exception<Error>(m, "CometError", PyExc_RuntimeError);
  py::register_exception<KbError>(m, "KbError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<ModelError>(m, "ModelError", base.ptr());
  py::register_exception<PreservationError>(m, "PreservationError", base.ptr());
  py::register_exception<SpaceLimitError>(m, "SpaceLimitError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  py::class_<IsaKb>(m, "IsaKb").def_property_readonly("version", &IsaKb::version);
  m.def("load_kb", [](const std::string& path) { return load_kb(path); }, py::arg("path"));

  py::class_<CostTable>(m, "CostTable")
      .def_property_readonly("march", &CostTable::march)
      .def("at", &CostTable::at);
  m.def("load_table", [](const std::string& path, const std::string& march) { return CostTable::load(path, march); },
        py::arg("path"), py::arg("march"));

  m.def("canonical", [](const std::string& text, const IsaKb& kb) { return render_block(parse_block(text, kb)); },
        py::arg("text"), py::arg("kb"));
  m.def("graph_json", [](const std::string& text, const IsaKb& kb) { return graph_json(graph_of(kb, text)).dump(); },
        py::arg("text"), py::arg("kb"));
  m.def("crude_predict",
        [](const std::string& text, const IsaKb& kb, const CostTable& t) { return crude_predict(t, graph_of(kb, text)); },
        py::arg("text"), py::arg("kb"), py::arg("table"));
  m.def("ground_truth",
        [](const std::string& text, const IsaKb& kb, const CostTable& t) {
          std::vector<std::string> out;
          for (const auto& f : ground_truth_explanation(t, graph_of(kb, text))) out.push_back(to_string(f));
          return out;
        },
        py::arg("text"), py::arg("kb"), py::arg("table"));
  m.def("space_size",
        [](const std::string& text, const IsaKb& kb, const std::vector<std::string>& preserve) {
          auto g = graph_of(kb, text);
          return estimate_space_size(kb, g, features(preserve, g)).log10_count;
        },
        py::arg("text"), py::arg("kb"), py::arg("preserve") = std::vector<std::string>{});
  m.def("perturb",
        [](const std::string& text, const IsaKb& kb, const std::vector<std::string>& preserve, int n,
           std::uint64_t seed) {
          auto g = graph_of(kb, text);
          Perturber p(kb, g);
          auto F = features(preserve, g);
          std::vector<std::string> out;
          for (int i = 0; i < n; ++i) out.push_back(render_block(p.sample(F, RandomStream(seed, i)).block));
          return out;
        },
        py::arg("text"), py::arg("kb"), py::arg("preserve") = std::vector<std::string>{}, py::arg("n") = 1,
        py::arg("seed") = 0);
  m.def("explain_crude",
        [](const std::string& text, const IsaKb& kb, const CostTable& t, const std::string& config_json,
           std::uint64_t seed) {
          ExplainConfig cfg = config_json.empty() ? ExplainConfig{} : config_from_json(nlohmann::json::parse(config_json));
          cfg.master_seed = seed;
          CrudeModel model(kb, t);
          Explanation e;
          {
            py::gil_scoped_release release;
            e = explain(model, kb, parse_block(text, kb), cfg);
          }
          return explanation_json(e, false).dump();
        },
        py::arg("text"), py::arg("kb"), py::arg("table"), py::arg("config_json") = std::string{},
        py::arg("seed") = 0);
}
