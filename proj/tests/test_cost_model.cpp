#include <doctest.h>

#include <chrono>
#include <thread>

#include "comet/cost_model.hpp"
#include "comet/error.hpp"
#include "oracles.hpp"

using namespace comet;

namespace {

const IsaKb& core() {
  static IsaKb kb = load_kb(oracle::data_path("isa_core.json"));
  return kb;
}

BasicBlock blk(const char* text) { return parse_block(text, core()); }

std::string mock(const std::string& env) { return "env " + env + " " + COMET_MOCK_MODEL; }

class Counting : public CostModel {
 public:
  mutable std::atomic<int> calls{0};
  std::string name() const override { return "counting"; }
  double predict(const BasicBlock& bb) const override {
    ++calls;
    return static_cast<double>(bb.size());
  }
};

}  // namespace

TEST_SUITE("cost_model") {
  TEST_CASE("crude model takes the costliest feature") {
    auto t = oracle::hand_table();
    auto g = [&](const char* s) { return build_graph(core(), blk(s)); };
    CHECK(crude_predict(t, g("mov rax, rbx\nadd rax, 1")) == doctest::Approx(0.5));
    CHECK(crude_predict(t, g("mov rax, rbx")) == doctest::Approx(0.25));
    CHECK(crude_predict(t, g("mov rax, 1\nmov rbx, 1\nmov rcx, 1\nmov rdx, 1\nmov rsi, 1\nmov rdi, 1\nmov r8, 1\nmov r9, 1")) ==
          doctest::Approx(2.0));
    CHECK(crude_predict(t, g("mov rbx, 1\ndiv rcx")) == doctest::Approx(10.0));
    auto cs2 = g("mov ecx, edx\nxor edx, edx\nlea rax, [rcx + rax - 1]\ndiv rcx\nmov rdx, rcx\nimul rax, rcx");
    CHECK(crude_predict(t, cs2) == doctest::Approx(11.0));
    CHECK(feature_cost(t, cs2, Feature::inst(4)) == doctest::Approx(10.0));
    CHECK(feature_cost(t, cs2, Feature::num_insts(6)) == doctest::Approx(1.5));
    CHECK(to_string(*ground_truth_explanation(t, cs2).begin()) == "dep:4-6:raw:rax");
  }

  TEST_CASE("cost tables") {
    auto t = CostTable::parse("mnemonic,cycles\nmov,0.25\nDIV,10\n", "x");
    CHECK(t.at("div") == 10.0);
    CHECK_THROWS_AS(t.at("imul"), ModelError);
    CHECK_THROWS_AS(t.check_covers(core()), ModelError);
    CHECK_THROWS(CostTable::parse("mnemonic,cycles\nmov,fast\n", "x"));
    for (const char* m : {"hsw", "skl"}) {
      auto full = CostTable::load(oracle::data_path(std::string("costs_") + m + ".csv"), m);
      CHECK_NOTHROW(full.check_covers(core()));
      CHECK(full.march() == m);
    }
  }

  TEST_CASE("intervals") {
    TargetInterval open{2.0, 0.5};
    CHECK(open.contains(2.4));
    CHECK_FALSE(open.contains(2.5));
    CHECK_FALSE(open.contains(1.5));
    TargetInterval closed{2.0, 0.5, IntervalBounds::Closed};
    CHECK(closed.contains(2.5));
    TargetInterval point{2.0, 0.0};
    CHECK(point.contains(2.0));
    CHECK(TargetInterval{0.1, 0.5}.lower() == 0.0);
    CHECK(parse_interval_bounds("closed") == IntervalBounds::Closed);
    CHECK_THROWS_AS(parse_interval_bounds("half"), ConfigError);
  }

  TEST_CASE("external model protocol") {
    auto b = blk("mov rax, rbx\nadd rax, 1\nsub rbx, rax\nimul rcx, rax\nmov rdx, rcx");
    CHECK(external_predict(COMET_MOCK_MODEL, 10, b) == doctest::Approx(1.25));
    CHECK(external_predict(mock("MOCK_MODE=const MOCK_VALUE=3.5"), 10, b) == doctest::Approx(3.5));
    CHECK_THROWS_AS(external_predict(mock("MOCK_MODE=fail"), 10, b), ModelError);
    CHECK_THROWS_AS(external_predict(mock("MOCK_MODE=garbage"), 10, b), ModelError);
    CHECK_THROWS_AS(external_predict("/nonexistent/model", 10, b), ModelError);
    auto t0 = std::chrono::steady_clock::now();
    CHECK_THROWS_AS(external_predict(mock("MOCK_MODE=slow"), 0.5, b), ModelError);
    CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(4));
    CHECK(external_predict(mock("MOCK_MODE=march"), 10, b, "skl") == 1.0);
    CHECK(external_predict(mock("MOCK_MODE=march"), 10, b, "hsw") == 9.0);
    ExternalModel m(mock("MOCK_MODE=march MOCK_EXPECT=hsw"), "hsw", 10, 2);
    CHECK(m.predict(b) == 1.0);
    CHECK(m.default_epsilon() == 0.5);
  }

  TEST_CASE("cache memoizes by canonical text") {
    auto inner = std::make_shared<Counting>();
    CachedModel c(inner, 2);
    auto a = blk("mov rax, rbx");
    auto a2 = blk("MOV   RAX,RBX");
    auto b = blk("mov rax, rbx\nadd rax, 1");
    auto d = blk("push rax\npop rbx\nmov rax, 1");
    CHECK(c.predict(a) == 1.0);
    CHECK(c.predict(a2) == 1.0);
    CHECK(c.hits() == 1);
    CHECK(c.misses() == 1);
    CHECK(c.predict(b) == 2.0);
    CHECK(c.predict(d) == 3.0);  // evicts a
    CHECK(c.size() == 2);
    CHECK(c.predict(a) == 1.0);
    CHECK(inner->calls == 4);
    CHECK(c.name() == "counting");
  }

  TEST_CASE("cached crude model is concurrent and equivalent") {
    auto table = CostTable::load(oracle::data_path("costs_hsw.csv"), "hsw");
    auto crude = std::make_shared<CrudeModel>(core(), table);
    CachedModel c(crude, 16);
    auto b = blk("vdivss xmm0, xmm0, xmm6\nvmulss xmm7, xmm0, xmm0");
    std::vector<std::thread> ts;
    std::atomic<int> bad{0};
    for (int k = 0; k < 4; ++k)
      ts.emplace_back([&] {
        for (int i = 0; i < 200; ++i)
          if (c.predict(b) != crude->predict(b)) ++bad;
      });
    for (auto& t : ts) t.join();
    CHECK(bad == 0);
    CHECK(c.misses() >= 1);
    CHECK(c.hits() + c.misses() == 800);
  }
}
