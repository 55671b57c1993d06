#pragma once

// Test-side reference implementations. Each one is written from first
// principles and deliberately shares no code with the library beyond the
// value types it has to compare against.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "comet/cost_model.hpp"
#include "comet/graph.hpp"

namespace oracle {

#ifndef COMET_TEST_DATA
#define COMET_TEST_DATA COMET_DATA_DIR
#endif

inline std::string data_path(const std::string& name) { return std::string(COMET_TEST_DATA) + "/" + name; }

// ---------------------------------------------------------------------------
// Tiny instruction model: mov/add/sub/lea/push/pop over 64-bit registers.

struct Op {
  enum Kind { Reg, Imm, Addr } kind = Reg;
  std::string reg;  // Reg: the register; Addr: the base register
  int value = 0;    // Imm value or Addr displacement
  char access = 'r';  // r, w or x (read-write)
};

struct TInst {
  std::string mnemonic;
  std::vector<Op> ops;
};

using TBlock = std::vector<TInst>;

inline const std::vector<std::string>& tiny_substitutable() {
  static const std::vector<std::string> regs{"rax", "rbx", "rcx", "rdx"};
  return regs;
}

inline std::string render(const Op& o) {
  switch (o.kind) {
    case Op::Reg: return o.reg;
    case Op::Imm: return std::to_string(o.value);
    case Op::Addr: return "[" + o.reg + (o.value ? " + " + std::to_string(o.value) : "") + "]";
  }
  return "";
}

inline std::string render(const TInst& i) {
  std::string s = i.mnemonic;
  for (std::size_t k = 0; k < i.ops.size(); ++k) s += (k ? ", " : " ") + render(i.ops[k]);
  return s;
}

inline std::string render(const TBlock& b) {
  std::string s;
  for (const auto& i : b) s += render(i) + "\n";
  return s;
}

// Access pattern of each explicit slot, straight from the instruction
// semantics: mov writes its destination, add/sub read and write it, lea only
// reads its address registers, push reads and pop writes its register.
inline std::vector<char> slot_access(const std::string& mnemonic, std::size_t arity) {
  if (mnemonic == "mov" || mnemonic == "lea") return {'w', 'r'};
  if (mnemonic == "add" || mnemonic == "sub") return {'x', 'r'};
  if (mnemonic == "push") return {'r'};
  if (mnemonic == "pop") return {'w'};
  return std::vector<char>(arity, 'r');
}

inline TInst make(const std::string& mnemonic, std::vector<Op> ops) {
  auto acc = slot_access(mnemonic, ops.size());
  for (std::size_t k = 0; k < ops.size(); ++k) ops[k].access = acc[k];
  return {mnemonic, std::move(ops)};
}

inline Op reg(const std::string& r) { return {Op::Reg, r, 0, 'r'}; }
inline Op imm(int v) { return {Op::Imm, "", v, 'r'}; }
inline Op addr(const std::string& base, int disp) { return {Op::Addr, base, disp, 'r'}; }

struct RW {
  std::set<std::string> reads, writes;
};

inline RW effects(const TInst& i) {
  RW e;
  for (const auto& o : i.ops) {
    if (o.kind == Op::Reg) {
      if (o.access != 'w') e.reads.insert(o.reg);
      if (o.access != 'r') e.writes.insert(o.reg);
    } else if (o.kind == Op::Addr) {
      e.reads.insert(o.reg);
    }
  }
  if (i.mnemonic == "push" || i.mnemonic == "pop") {
    e.reads.insert("rsp");
    e.writes.insert("rsp");
  }
  return e;
}

using Edge = std::tuple<int, int, std::string, std::string>;  // src, dst, kind, resource

inline std::set<Edge> hazards(const TBlock& b) {
  std::set<Edge> out;
  std::vector<RW> fx;
  for (const auto& i : b) fx.push_back(effects(i));
  for (std::size_t i = 0; i < b.size(); ++i)
    for (std::size_t j = i + 1; j < b.size(); ++j) {
      for (const auto& r : fx[i].writes) {
        if (fx[j].reads.count(r)) out.insert({int(i) + 1, int(j) + 1, "raw", r});
        if (fx[j].writes.count(r)) out.insert({int(i) + 1, int(j) + 1, "waw", r});
      }
      for (const auto& r : fx[i].reads)
        if (fx[j].writes.count(r)) out.insert({int(i) + 1, int(j) + 1, "war", r});
    }
  return out;
}

inline std::set<Edge> library_edges(const comet::BlockGraph& g) {
  std::set<Edge> out;
  for (const auto& e : g.dep_edges()) {
    std::string k(comet::to_string(e.kind));
    std::transform(k.begin(), k.end(), k.begin(), [](unsigned char c) { return std::tolower(c); });
    out.insert({e.src, e.dst, k, e.resource});
  }
  return out;
}

// Every instruction shape over `regs` (rsp included by the caller when
// wanted); add and sub share a shape, so `with_sub` can drop the duplicate.
inline std::vector<TInst> universe(const std::vector<std::string>& regs, bool with_sub) {
  std::vector<TInst> u;
  std::vector<std::string> arith{"add"};
  if (with_sub) arith.push_back("sub");
  for (const auto& d : regs) {
    for (const auto& s : regs) u.push_back(make("mov", {reg(d), reg(s)}));
    u.push_back(make("mov", {reg(d), imm(1)}));
    for (const auto& m : arith) {
      for (const auto& s : regs) u.push_back(make(m, {reg(d), reg(s)}));
      u.push_back(make(m, {reg(d), imm(1)}));
    }
    for (const auto& s : regs) u.push_back(make("lea", {reg(d), addr(s, 8)}));
    u.push_back(make("push", {reg(d)}));
    u.push_back(make("pop", {reg(d)}));
  }
  return u;
}

// ---------------------------------------------------------------------------
// Perturbation space of a tiny block, enumerated directly: every vertex is
// kept, opcode-swapped among mnemonics sharing its operand shape, or deleted;
// every operand of a later instruction that carries a hazard's register may be
// renamed to a substitutable register the block does not use yet.

struct Preserve {
  std::set<int> inst;  // 1-based
  std::vector<Edge> deps;
  bool num_insts = false;
};

inline std::vector<std::string> tiny_swaps(const TInst& i) {
  auto shape = [](const TInst& x) {
    std::string s;
    for (const auto& o : x.ops) s += o.kind == Op::Reg ? 'R' : o.kind == Op::Imm ? 'I' : 'A';
    return s;
  };
  const std::map<std::string, std::vector<std::string>> by_shape{
      {"RR", {"add", "mov", "sub"}}, {"RI", {"add", "mov", "sub"}}, {"RA", {"lea"}}, {"R", {"pop", "push"}}};
  std::vector<std::string> out;
  for (const auto& m : by_shape.at(shape(i)))
    if (m != i.mnemonic) out.push_back(m);
  return out;
}

inline std::set<std::string> tiny_space(const TBlock& b, const Preserve& F) {
  const std::size_t n = b.size();
  std::set<std::string> used;
  for (const auto& i : b)
    for (const auto& o : i.ops)
      if (o.kind != Op::Imm) used.insert(o.reg);

  struct Site {
    int v, p;
    std::vector<std::string> alts;
  };
  std::vector<Site> sites;
  std::set<std::pair<int, int>> seen;
  for (const auto& [src, dst, kind, res] : hazards(b)) {
    const TInst& i = b[dst - 1];
    for (int p = 0; p < int(i.ops.size()); ++p)
      if (i.ops[p].kind != Op::Imm && i.ops[p].reg == res) seen.insert({dst - 1, p});
  }
  for (const auto& [v, p] : seen) {
    const std::string& cur = b[v].ops[p].reg;
    std::vector<std::string> alts;
    if (cur != "rsp")
      for (const auto& r : tiny_substitutable())
        if (r != cur && !used.count(r)) alts.push_back(r);
    if (!alts.empty()) sites.push_back({v, p, alts});
  }

  std::vector<bool> fixed(n, false);
  for (int k : F.inst) fixed[k - 1] = true;
  std::vector<bool> locked(sites.size(), false);
  for (const auto& [src, dst, kind, res] : F.deps) {
    fixed[src - 1] = fixed[dst - 1] = true;
    for (std::size_t s = 0; s < sites.size(); ++s)
      if ((sites[s].v == src - 1 || sites[s].v == dst - 1) && b[sites[s].v].ops[sites[s].p].reg == res)
        locked[s] = true;
  }

  std::set<std::string> out;
  std::vector<int> vc(n, 0);
  std::vector<int> sc(sites.size(), 0);
  std::function<void(std::size_t)> sites_rec;
  std::function<void(std::size_t)> verts_rec;
  sites_rec = [&](std::size_t k) {
    if (k == sites.size()) {
      TBlock r;
      std::vector<int> map(n, 0);
      for (std::size_t v = 0; v < n; ++v) {
        if (vc[v] < 0) continue;
        TInst x = b[v];
        if (vc[v] > 0) x = make(tiny_swaps(b[v])[vc[v] - 1], x.ops);
        r.push_back(x);
        map[v] = int(r.size());
      }
      if (r.empty()) return;
      for (std::size_t s = 0; s < sites.size(); ++s)
        if (sc[s] > 0 && map[sites[s].v]) r[map[sites[s].v] - 1].ops[sites[s].p].reg = sites[s].alts[sc[s] - 1];
      if (F.num_insts && r.size() != n) return;
      for (int k2 : F.inst)
        if (!map[k2 - 1] || r[map[k2 - 1] - 1].mnemonic != b[k2 - 1].mnemonic) return;
      if (!F.deps.empty()) {
        auto h = hazards(r);
        for (const auto& [src, dst, kind, res] : F.deps)
          if (!map[src - 1] || !map[dst - 1] || !h.count({map[src - 1], map[dst - 1], kind, res})) return;
      }
      out.insert(render(r));
      return;
    }
    int options = (locked[k] || vc[sites[k].v] < 0) ? 1 : 1 + int(sites[k].alts.size());
    for (int o = 0; o < options; ++o) {
      sc[k] = o;
      sites_rec(k + 1);
    }
    sc[k] = 0;
  };
  verts_rec = [&](std::size_t v) {
    if (v == n) {
      sites_rec(0);
      return;
    }
    std::vector<int> options{0};
    if (!fixed[v]) {
      for (std::size_t k = 0; k < tiny_swaps(b[v]).size(); ++k) options.push_back(int(k) + 1);
      if (!F.num_insts) options.push_back(-1);
    }
    for (int o : options) {
      vc[v] = o;
      verts_rec(v + 1);
    }
    vc[v] = 0;
  };
  verts_rec(0);
  return out;
}

// ---------------------------------------------------------------------------
// KL confidence bounds by grid search.

inline double kl(double p, double q) {
  double r = 0.0;
  if (p > 0) r += p * std::log(p / q);
  if (p < 1) r += (1 - p) * std::log((1 - p) / (1 - q));
  return r;
}

inline double grid_ucb(long s, long n, double level, double step = 1e-4) {
  const double p = double(s) / double(n);
  double best = p;
  for (long k = 0;; ++k) {
    double q = p + double(k) * step;
    if (q >= 1.0) {
      if (p == 1.0 || n * kl(p, 1.0 - 1e-12) <= level) best = 1.0;
      break;
    }
    if (n * kl(p, q) <= level) best = q;
    else break;
  }
  return best;
}

inline double grid_lcb(long s, long n, double level, double step = 1e-4) {
  const double p = double(s) / double(n);
  double best = p;
  for (long k = 0;; ++k) {
    double q = p - double(k) * step;
    if (q <= 0.0) {
      if (p == 0.0 || n * kl(p, 1e-12) <= level) best = 0.0;
      break;
    }
    if (n * kl(p, q) <= level) best = q;
    else break;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Hand-evaluated crude-model fixtures under a fixed test table.

inline comet::CostTable hand_table() {
  return comet::CostTable("hand", {{"mov", 0.25},
                                   {"add", 0.25},
                                   {"sub", 0.25},
                                   {"xor", 0.25},
                                   {"lea", 0.5},
                                   {"shl", 0.5},
                                   {"imul", 1.0},
                                   {"div", 10.0},
                                   {"push", 1.0},
                                   {"pop", 0.5},
                                   {"vaddss", 1.0},
                                   {"vmulss", 0.5},
                                   {"vdivss", 5.0}});
}

struct HandFixture {
  const char* name;
  const char* text;
  double prediction;
  std::vector<std::string> ground_truth;
};

// Costs: max(n/4, per-instruction cost, RAW pair sums); WAR/WAW cost 0.
inline const std::vector<HandFixture>& hand_fixtures() {
  static const std::vector<HandFixture> f{
      // n/4 = 0.5 ties RAW(1,2,rax) = 0.25 + 0.25.
      {"mov-add", "mov rax, rbx\nadd rax, 1\n", 0.5, {"dep:1-2:raw:rax", "numinsts"}},
      // One instruction: n/4 = 0.25 = mov.
      {"single-mov", "mov rax, 1\n", 0.25, {"inst:1", "numinsts"}},
      // Eight independent movs: n/4 = 2.0 dominates.
      {"eight-movs",
       "mov rax, 1\nmov rbx, 2\nmov rcx, 3\nmov rdx, 4\nmov rsi, 5\nmov rdi, 6\nmov r8, 7\nmov r9, 8\n",
       2.0,
       {"numinsts"}},
      // div alone, no shared registers with the movs.
      {"lone-div", "mov rbx, 1\ndiv rcx\nmov rsi, 2\n", 10.0, {"inst:2"}},
      // RAW(1,2,rax) = 1 + 1.
      {"imul-chain", "imul rax, rbx\nimul rax, rcx\n", 2.0, {"dep:1-2:raw:rax"}},
      // RAW(4,6,rax) = div + imul = 11 beats RAW(3,4,rax) = 10.5 and RAW(1,4)/(2,4) = 10.25.
      {"div-listing", "mov ecx, edx\nxor edx, edx\nlea rax, [rcx + rax - 1]\ndiv rcx\nmov rdx, rcx\nimul rax, rcx\n",
       11.0,
       {"dep:4-6:raw:rax"}},
      // RAW through xmm0 (family ymm0) = 5 + 1.
      {"vdiv-vadd", "vdivss xmm0, xmm1, xmm2\nvaddss xmm3, xmm0, xmm4\n", 6.0, {"dep:1-2:raw:ymm0"}},
      // Both touch rsp: RAW(1,2,rsp) = 1 + 0.5.
      {"push-pop", "push rax\npop rbx\n", 1.5, {"dep:1-2:raw:rsp"}},
      // imul = 1.0 ties n/4 = 1.0.
      {"imul-tie", "imul rax, rbx\nmov rcx, 1\nmov rdx, 2\nmov rsi, 3\n", 1.0, {"inst:1", "numinsts"}},
      // RAW(2,3,rbx) = 0.25 + 1 beats imul 1.0, n/4 = 0.75 and the store/load pair 0.5.
      {"store-load-imul", "mov qword ptr [rdi + 8], rax\nmov rbx, qword ptr [rdi + 8]\nimul rbx, rbx\n", 1.25,
       {"dep:2-3:raw:rbx"}},
  };
  return f;
}

}  // namespace oracle
