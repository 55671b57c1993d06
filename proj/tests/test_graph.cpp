#include <doctest.h>

#include <random>

#include "comet/error.hpp"
#include "comet/graph.hpp"
#include "oracles.hpp"

using namespace comet;

namespace {

const IsaKb& core() {
  static IsaKb kb = load_kb(oracle::data_path("isa_core.json"));
  return kb;
}
const IsaKb& tiny() {
  static IsaKb kb = load_kb(oracle::data_path("isa_tiny.json"));
  return kb;
}

BlockGraph graph(const char* text) { return build_graph(core(), parse_block(text, core())); }

const char* kCs1 = "lea rdx, [rax + 1]\nmov qword ptr [rdi + 24], rdx\nmov byte ptr [rax], 80\n"
                   "mov rsi, qword ptr [r14 + 32]\nmov rdi, rbp\n";
const char* kCs2 = "mov ecx, edx\nxor edx, edx\nlea rax, [rcx + rax - 1]\ndiv rcx\nmov rdx, rcx\nimul rax, rcx\n";

}  // namespace

TEST_SUITE("graph") {
  TEST_CASE("case study listing has RAW 3->6 through rax") {
    auto g = graph(kCs2);
    CHECK(g.has_edge({3, 6, DepKind::RAW, "rax"}));
    auto P = extract_features(g);
    CHECK(P.contains(Feature::inst(4)));
    CHECK(P.contains(Feature::dependency({3, 6, DepKind::RAW, "rax"})));
    CHECK(P.size() == g.size() + g.dep_edges().size() + 1);
  }

  TEST_CASE("single WAR edge and disjoint blocks") {
    auto g = graph("mov rax, rbx\nmov rbx, 1");
    REQUIRE(g.dep_edges().size() == 1);
    CHECK(g.dep_edges()[0] == DepEdge{1, 2, DepKind::WAR, "rbx"});
    CHECK(graph("mov rax, 1\nmov rbx, 2").dep_edges().empty());
  }

  TEST_CASE("alias families join widths") {
    auto g = graph("mov eax, 1\nadd rbx, rax");
    CHECK(g.has_edge({1, 2, DepKind::RAW, "rax"}));
  }

  TEST_CASE("memory resources compare by normalized key") {
    auto g = graph("mov qword ptr [rdi + 8], rax\nmov rbx, qword ptr [rdi + 8]\nmov rcx, qword ptr [rdi + 16]");
    bool via_mem = false;
    for (const auto& e : g.dep_edges())
      if (e.src == 1 && e.dst == 2 && e.kind == DepKind::RAW && e.resource != "rdi") via_mem = true;
    CHECK(via_mem);
    for (const auto& e : g.dep_edges()) CHECK_FALSE((e.src == 1 && e.dst == 3 && e.kind == DepKind::RAW));
  }

  TEST_CASE("edges point forward and the graph is deterministic") {
    auto g = graph(kCs2);
    for (const auto& e : g.dep_edges()) CHECK(e.src < e.dst);
    CHECK(graph(kCs2).dep_edges() == g.dep_edges());
  }

  TEST_CASE("nearest-predecessor policy keeps one edge per resource, kind and consumer") {
    auto bb = parse_block(kCs2, core());
    auto g = build_graph(core(), bb, GraphOptions{EdgePolicy::NearestPredecessor});
    CHECK(g.has_edge({4, 6, DepKind::RAW, "rax"}));
    CHECK_FALSE(g.has_edge({3, 6, DepKind::RAW, "rax"}));
  }

  TEST_CASE("feature extraction on small blocks") {
    auto P = extract_features(graph("mov rax, 1"));
    CHECK(P == FeatureSet{Feature::inst(1), Feature::num_insts(1)});
    auto Q = extract_features(graph("mov rax, 1\nmov rbx, 2\nmov rcx, 3\nmov rdx, 4"));
    CHECK(Q.contains(Feature::num_insts(4)));
  }

  TEST_CASE("feature text round-trips and is validated against the block") {
    auto g = graph(kCs2);
    for (const auto& f : extract_features(g)) CHECK(parse_feature(to_string(f), g) == f);
    CHECK(to_string(Feature::dependency({3, 6, DepKind::RAW, "rax"})) == "dep:3-6:raw:rax");
    CHECK_THROWS_AS(parse_feature("inst:9", g), Error);
    CHECK_THROWS_AS(parse_feature("dep:1-2:raw:rax", g), Error);
    CHECK_THROWS_AS(parse_feature("numinsts:3", g), Error);
  }

  TEST_CASE("feature presence") {
    auto g = graph(kCs2);
    auto id = VertexMap::identity(g.size());
    for (const auto& f : extract_features(g)) CHECK(feature_present(g, g, id, f));

    auto g4 = graph("mov rax, 1\nmov rbx, 2\nmov rcx, 3\nmov rdx, 4");
    auto g3 = graph("mov rax, 1\nmov rcx, 3\nmov rdx, 4");
    VertexMap del({1, 0, 2, 3});
    CHECK_FALSE(feature_present(g4, g3, del, Feature::num_insts(4)));
    CHECK_FALSE(feature_present(g4, g3, del, Feature::inst(2)));
    CHECK(feature_present(g4, g3, del, Feature::inst(3)));

    auto c1 = graph(kCs1);
    std::string renamed = kCs1;
    renamed.replace(renamed.find("24], rdx"), 8, "24], rcx");
    auto c1r = graph(renamed.c_str());
    Feature raw12 = Feature::dependency({1, 2, DepKind::RAW, "rdx"});
    CHECK(feature_present(c1, c1, VertexMap::identity(5), raw12));
    CHECK_FALSE(feature_present(c1, c1r, VertexMap::identity(5), raw12));
  }

  TEST_CASE("tiny blocks agree with the first-principles hazard oracle") {
    auto u = oracle::universe({"rax", "rbx", "rcx", "rsp"}, true);
    std::mt19937_64 rng(11);
    for (int k = 0; k < 2000; ++k) {
      oracle::TBlock tb;
      int len = 1 + int(rng() % 4);
      for (int i = 0; i < len; ++i) tb.push_back(u[rng() % u.size()]);
      auto g = build_graph(tiny(), parse_block(oracle::render(tb), tiny()));
      REQUIRE_MESSAGE(oracle::library_edges(g) == oracle::hazards(tb), oracle::render(tb));
    }
  }
}
