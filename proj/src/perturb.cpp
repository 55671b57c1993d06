#include "comet/perturb.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>

#include "comet/error.hpp"

namespace comet {

void PerturbConfig::validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
  };
  prob(p_inst_retain, "p_inst_retain");
  prob(p_dep_retain, "p_dep_retain");
  prob(p_delete, "p_delete");
  prob(p_dep_explicit_retain, "p_dep_explicit_retain");
  if (max_retries < 1) throw ConfigError("max_retries must be >= 1");
}

std::string_view to_string(PerturbOp::Kind kind) {
  switch (kind) {
    case PerturbOp::Kind::Delete: return "delete";
    case PerturbOp::Kind::ReplaceOpcode: return "replace_opcode";
    case PerturbOp::Kind::Rename: return "rename";
    case PerturbOp::Kind::Lock: return "lock";
  }
  return "?";
}

std::string SpaceSize::scientific() const {
  double exponent = std::floor(log10_count);
  double mantissa = std::pow(10.0, log10_count - exponent);
  if (mantissa >= 9.995) {
    mantissa /= 10.0;
    exponent += 1.0;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2fe+%02d", mantissa, static_cast<int>(exponent));
  return buf;
}

namespace {

constexpr double kExactCountLog10 = 5.0;

std::vector<Operand> operand_alternatives(const IsaKb& kb, const Operand& op, const OperandSlot& slot,
                                         const std::set<std::string>& in_use) {
  std::vector<Operand> out;
  auto add = [&](Operand o) {
    for (const auto& x : out)
      if (x == o) return;
    out.push_back(std::move(o));
  };
  if (op.is_reg()) {
    for (auto& r : replacement_registers(kb, op.as_reg().name, in_use)) add(Operand::reg(r));
  } else if (op.is_mem()) {
    const MemOperand& m = op.as_mem();
    if (m.base) {
      for (auto& r : replacement_registers(kb, *m.base, in_use)) {
        MemOperand c = m;
        c.base = r;
        add(Operand::mem(c));
      }
    }
    if (m.index) {
      for (auto& r : replacement_registers(kb, *m.index, in_use)) {
        MemOperand c = m;
        c.index = r;
        add(Operand::mem(c));
      }
    }
    if (slot.kind == SlotKind::Memory) {
      MemOperand c = m;
      c.displacement += 8;
      add(Operand::mem(c));
    }
  }
  return out;
}

}  // namespace

Perturber::Perturber(const IsaKb& kb, const BlockGraph& g, PerturbConfig cfg) : kb_(&kb), g_(g), cfg_(cfg) {
  cfg_.validate();
  const auto& bb = g_.block();
  replacements_.resize(bb.size());
  for (std::size_t v = 0; v < bb.size(); ++v) replacements_[v] = replacement_opcodes(kb, bb[v]);

  // Renaming targets exclude every register family the block already uses,
  // so a rename breaks dependencies without creating new ones.
  std::set<std::string> in_use;
  for (std::size_t v = 0; v < bb.size(); ++v)
    for (const auto& op : bb[v].operands) {
      if (op.is_reg()) in_use.insert(op.as_reg().name);
      if (op.is_mem()) {
        if (op.as_mem().base) in_use.insert(*op.as_mem().base);
        if (op.as_mem().index) in_use.insert(*op.as_mem().index);
      }
    }

  // Renaming sites: explicit operands of the later instruction that carry
  // the edge's resource. Edges sharing one are perturbed jointly.
  std::map<std::pair<int, int>, bool> seen;
  for (const auto& e : g_.dep_edges()) {
    const int vertex = e.dst - 1;
    const Instruction& instr = bb[vertex];
    const OpcodeForm& form = kb.form_of(instr);
    for (std::size_t p = 0; p < instr.operands.size(); ++p)
      if (operand_carries(kb, instr.operands[p], form.slots[p], e.resource))
        seen[{vertex, static_cast<int>(p)}] = true;
  }
  for (const auto& [key, _] : seen) {
    const Instruction& instr = bb[key.first];
    const OpcodeForm& form = kb.form_of(instr);
    Site s{key.first, key.second,
           operand_alternatives(kb, instr.operands[key.second], form.slots[key.second], in_use)};
    if (!s.alternatives.empty()) sites_.push_back(std::move(s));
  }
}

Perturber::Constraints Perturber::constraints(const FeatureSet& preserve) const {
  const auto& bb = g_.block();
  Constraints c;
  c.fixed.assign(bb.size(), false);
  c.site_locked.assign(sites_.size(), false);
  for (const auto& f : preserve) {
    switch (f.type) {
      case FeatureType::Inst:
        if (f.index < 1 || f.index > static_cast<int>(bb.size()))
          throw PreservationError("instruction feature out of range: " + to_string(f));
        c.fixed[f.index - 1] = true;
        break;
      case FeatureType::NumInsts:
        c.allow_delete = false;
        break;
      case FeatureType::Dep: {
        if (!g_.has_edge(f.dep)) throw PreservationError("not an edge of this block: " + to_string(f));
        c.fixed[f.dep.src - 1] = true;
        c.fixed[f.dep.dst - 1] = true;
        for (std::size_t k = 0; k < sites_.size(); ++k) {
          const Site& s = sites_[k];
          if (s.vertex != f.dep.src - 1 && s.vertex != f.dep.dst - 1) continue;
          const Instruction& instr = bb[s.vertex];
          const OpcodeForm& form = kb_->form_of(instr);
          if (operand_carries(*kb_, instr.operands[s.operand], form.slots[s.operand], f.dep.resource))
            c.site_locked[k] = true;
        }
        break;
      }
    }
  }
  return c;
}

PerturbResult Perturber::apply(const std::vector<int>& vertex_choice, const std::vector<int>& site_choice,
                               std::vector<PerturbOp> ops) const {
  const auto& bb = g_.block();
  std::vector<Instruction> out;
  std::vector<int> targets(bb.size(), 0);
  std::vector<int> new_index(bb.size(), -1);
  for (std::size_t v = 0; v < bb.size(); ++v) {
    if (vertex_choice[v] < 0) continue;
    Instruction instr = bb[v];
    instr.source_text.clear();
    if (vertex_choice[v] > 0) instr.mnemonic = replacements_[v][vertex_choice[v] - 1];
    new_index[v] = static_cast<int>(out.size());
    out.push_back(std::move(instr));
    targets[v] = static_cast<int>(out.size());
  }
  for (std::size_t k = 0; k < sites_.size(); ++k) {
    if (site_choice[k] == 0) continue;
    const Site& s = sites_[k];
    if (new_index[s.vertex] < 0) continue;
    out[new_index[s.vertex]].operands[s.operand] = s.alternatives[site_choice[k] - 1];
  }
  PerturbResult r;
  r.block = BasicBlock(std::move(out));
  r.graph = build_graph(*kb_, r.block, g_.options());
  r.vertex_map = VertexMap(std::move(targets));
  r.ops = std::move(ops);
  return r;
}

bool Perturber::preserves(const PerturbResult& r, const FeatureSet& preserve) const {
  for (const auto& f : preserve)
    if (!feature_present(g_, r.graph, r.vertex_map, f)) return false;
  return true;
}

PerturbResult Perturber::sample(const FeatureSet& preserve, const RandomStream& rng) const {
  const Constraints c = constraints(preserve);
  const std::size_t n = g_.size();
  std::vector<int> vchoice(n);
  std::vector<int> schoice(sites_.size());

  for (int attempt = 0; attempt < cfg_.max_retries; ++attempt) {
    RandomStream s = rng.split(static_cast<std::uint64_t>(attempt));
    std::vector<PerturbOp> ops;
    int survivors = 0;
    for (std::size_t v = 0; v < n; ++v) {
      int choice = 0;
      if (!c.fixed[v] && !s.bernoulli(cfg_.p_inst_retain)) {
        bool can_delete = c.allow_delete && !(v + 1 == n && survivors == 0);
        const auto& repl = replacements_[v];
        if (can_delete && s.bernoulli(cfg_.p_delete)) {
          choice = -1;
          ops.push_back({PerturbOp::Kind::Delete, static_cast<int>(v) + 1, -1, {}});
        } else if (!repl.empty()) {
          choice = 1 + static_cast<int>(s.below(repl.size()));
          ops.push_back({PerturbOp::Kind::ReplaceOpcode, static_cast<int>(v) + 1, -1, repl[choice - 1]});
        }
      }
      vchoice[v] = choice;
      if (choice >= 0) ++survivors;
    }
    for (std::size_t k = 0; k < sites_.size(); ++k) {
      const Site& site = sites_[k];
      schoice[k] = 0;
      if (c.site_locked[k] || vchoice[site.vertex] < 0) continue;
      if (s.bernoulli(cfg_.p_dep_explicit_retain)) {
        ops.push_back({PerturbOp::Kind::Lock, site.vertex + 1, site.operand, {}});
        continue;
      }
      if (s.bernoulli(cfg_.p_dep_retain)) continue;
      schoice[k] = 1 + static_cast<int>(s.below(site.alternatives.size()));
      ops.push_back({PerturbOp::Kind::Rename, site.vertex + 1, site.operand,
                     render_operand(site.alternatives[schoice[k] - 1])});
    }
    PerturbResult r = apply(vchoice, schoice, std::move(ops));
    if (preserves(r, preserve)) return r;
    if (attempt + 1 == cfg_.max_retries) {
      for (const auto& f : preserve)
        if (!feature_present(g_, r.graph, r.vertex_map, f))
          throw PreservationError("could not preserve " + to_string(f) + " after " +
                                  std::to_string(cfg_.max_retries) + " attempts");
    }
  }
  throw PreservationError("preservation failed");
}

SpaceSize Perturber::space_size(const FeatureSet& preserve) const {
  const Constraints c = constraints(preserve);
  const std::size_t n = g_.size();
  std::vector<double> site_factor(n, 1.0);
  for (std::size_t k = 0; k < sites_.size(); ++k)
    if (!c.site_locked[k]) site_factor[sites_[k].vertex] *= 1.0 + static_cast<double>(sites_[k].alternatives.size());

  double log_total = 0.0;
  bool all_deletable = c.allow_delete;
  for (std::size_t v = 0; v < n; ++v) {
    double count = site_factor[v];
    if (c.fixed[v]) {
      all_deletable = false;
    } else {
      count = (1.0 + static_cast<double>(replacements_[v].size())) * site_factor[v] + (c.allow_delete ? 1.0 : 0.0);
    }
    log_total += std::log10(count);
  }
  if (all_deletable) {
    // Drop the empty block.
    if (log_total < 15.0) {
      log_total = std::log10(std::round(std::pow(10.0, log_total)) - 1.0);
    } else {
      log_total += std::log10(1.0 - std::pow(10.0, -log_total));
    }
  }
  // Small spaces are counted exactly: distinct choice vectors can render to
  // the same block (two equal instructions, one deleted), which the product
  // above overcounts.
  if (log_total <= kExactCountLog10) {
    auto members = enumerate(preserve, std::numeric_limits<std::size_t>::max());
    return {std::log10(static_cast<double>(members.size())), true};
  }
  return {std::max(0.0, log_total), false};
}

std::vector<BasicBlock> Perturber::enumerate(const FeatureSet& preserve, std::size_t limit) const {
  const Constraints c = constraints(preserve);
  const std::size_t n = g_.size();
  std::map<std::string, BasicBlock> found;
  std::vector<int> vchoice(n, 0);
  std::vector<int> schoice(sites_.size(), 0);

  auto visit_sites = [&](auto&& self, std::size_t k) -> void {
    if (k == sites_.size()) {
      PerturbResult r = apply(vchoice, schoice, {});
      if (r.block.empty() || !preserves(r, preserve)) return;
      std::string key = render_block(r.block);
      if (found.count(key)) return;
      found.emplace(std::move(key), std::move(r.block));
      if (found.size() > limit)
        throw SpaceLimitError("perturbation space exceeds the enumeration limit of " + std::to_string(limit));
      return;
    }
    const Site& s = sites_[k];
    int options = (c.site_locked[k] || vchoice[s.vertex] < 0) ? 1 : 1 + static_cast<int>(s.alternatives.size());
    for (int o = 0; o < options; ++o) {
      schoice[k] = o;
      self(self, k + 1);
    }
    schoice[k] = 0;
  };
  auto visit_vertices = [&](auto&& self, std::size_t v) -> void {
    if (v == n) {
      visit_sites(visit_sites, 0);
      return;
    }
    std::vector<int> options{0};
    if (!c.fixed[v]) {
      for (std::size_t i = 0; i < replacements_[v].size(); ++i) options.push_back(static_cast<int>(i) + 1);
      if (c.allow_delete) options.push_back(-1);
    }
    for (int o : options) {
      vchoice[v] = o;
      self(self, v + 1);
    }
    vchoice[v] = 0;
  };
  visit_vertices(visit_vertices, 0);

  std::vector<BasicBlock> out;
  out.reserve(found.size());
  for (auto& [_, bb] : found) out.push_back(std::move(bb));
  return out;
}

PerturbResult sample_perturbation(const IsaKb& kb, const BlockGraph& g, const FeatureSet& preserve,
                                  const PerturbConfig& cfg, const RandomStream& rng) {
  return Perturber(kb, g, cfg).sample(preserve, rng);
}

SpaceSize estimate_space_size(const IsaKb& kb, const BlockGraph& g, const FeatureSet& preserve) {
  return Perturber(kb, g).space_size(preserve);
}

std::vector<BasicBlock> enumerate_space(const IsaKb& kb, const BlockGraph& g, const FeatureSet& preserve,
                                        std::size_t limit) {
  return Perturber(kb, g).enumerate(preserve, limit);
}

}  // namespace comet
