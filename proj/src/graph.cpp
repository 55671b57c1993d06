#include "comet/graph.hpp"

#include <algorithm>
#include <cctype>

#include "comet/error.hpp"

namespace comet {

std::string_view to_string(DepKind kind) {
  switch (kind) {
    case DepKind::RAW: return "RAW";
    case DepKind::WAR: return "WAR";
    case DepKind::WAW: return "WAW";
  }
  return "?";
}

std::optional<DepKind> parse_dep_kind(std::string_view s) {
  std::string up;
  for (char c : s) up.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (up == "RAW") return DepKind::RAW;
  if (up == "WAR") return DepKind::WAR;
  if (up == "WAW") return DepKind::WAW;
  return std::nullopt;
}

std::string memory_key(const MemOperand& m) { return render_address(m); }

void operand_resources(const IsaKb& kb, const Operand& op, const OperandSlot& slot,
                       std::vector<std::string>& reads, std::vector<std::string>& writes) {
  if (op.is_reg()) {
    const std::string& fam = kb.family_of(op.as_reg().name);
    if (slot.reads()) reads.push_back(fam);
    if (slot.writes()) writes.push_back(fam);
    return;
  }
  if (!op.is_mem()) return;
  const auto& m = op.as_mem();
  if (m.base) reads.push_back(kb.family_of(*m.base));
  if (m.index) reads.push_back(kb.family_of(*m.index));
  if (slot.kind != SlotKind::Memory) return;
  std::string key = memory_key(m);
  if (slot.reads()) reads.push_back(key);
  if (slot.writes()) writes.push_back(std::move(key));
}

bool operand_carries(const IsaKb& kb, const Operand& op, const OperandSlot& slot,
                     const std::string& resource) {
  if (op.is_reg()) return kb.family_of(op.as_reg().name) == resource;
  if (!op.is_mem()) return false;
  const auto& m = op.as_mem();
  if (m.base && kb.family_of(*m.base) == resource) return true;
  if (m.index && kb.family_of(*m.index) == resource) return true;
  return slot.kind == SlotKind::Memory && memory_key(m) == resource;
}

bool BlockGraph::has_edge(const DepEdge& e) const {
  return std::binary_search(edges_.begin(), edges_.end(), e);
}

namespace {

void sort_unique(std::vector<std::string>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

template <typename F>
void for_common(const std::vector<std::string>& a, const std::vector<std::string>& b, F&& f) {
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      f(*i);
      ++i;
      ++j;
    }
  }
}

}  // namespace

BlockGraph build_graph(const IsaKb& kb, const BasicBlock& bb, const GraphOptions& opts) {
  BlockGraph g;
  g.block_ = bb;
  g.opts_ = opts;
  const std::size_t n = bb.size();
  g.reads_.resize(n);
  g.writes_.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    const Instruction& instr = bb[i];
    const OpcodeForm& form = kb.form_of(instr);
    for (std::size_t p = 0; p < instr.operands.size(); ++p)
      operand_resources(kb, instr.operands[p], form.slots[p], g.reads_[i], g.writes_[i]);
    for (const auto& r : form.implicit_reads) g.reads_[i].push_back(kb.family_of(r));
    for (const auto& r : form.implicit_writes) g.writes_[i].push_back(kb.family_of(r));
    sort_unique(g.reads_[i]);
    sort_unique(g.writes_[i]);
  }

  for (std::size_t j = 1; j < n; ++j) {
    // Walk predecessors nearest-first so the nearest policy can keep the first hit.
    std::vector<std::pair<DepKind, std::string>> seen;
    for (std::size_t k = j; k-- > 0;) {
      auto emit = [&](DepKind kind, const std::string& r) {
        if (opts.policy == EdgePolicy::NearestPredecessor) {
          std::pair<DepKind, std::string> key{kind, r};
          if (std::find(seen.begin(), seen.end(), key) != seen.end()) return;
          seen.push_back(std::move(key));
        }
        g.edges_.push_back({static_cast<int>(k) + 1, static_cast<int>(j) + 1, kind, r});
      };
      for_common(g.writes_[k], g.reads_[j], [&](const std::string& r) { emit(DepKind::RAW, r); });
      for_common(g.reads_[k], g.writes_[j], [&](const std::string& r) { emit(DepKind::WAR, r); });
      for_common(g.writes_[k], g.writes_[j], [&](const std::string& r) { emit(DepKind::WAW, r); });
    }
  }
  std::sort(g.edges_.begin(), g.edges_.end());
  return g;
}

// ---------------------------------------------------------------------------

std::strong_ordering Feature::operator<=>(const Feature& o) const {
  if (auto c = type <=> o.type; c != 0) return c;
  switch (type) {
    case FeatureType::Inst: return index <=> o.index;
    case FeatureType::Dep: return dep <=> o.dep;
    case FeatureType::NumInsts: return count <=> o.count;
  }
  return std::strong_ordering::equal;
}

std::string_view type_name(FeatureType t) {
  switch (t) {
    case FeatureType::Inst: return "inst";
    case FeatureType::Dep: return "dep";
    case FeatureType::NumInsts: return "num_insts";
  }
  return "?";
}

std::string to_string(const Feature& f) {
  switch (f.type) {
    case FeatureType::Inst: return "inst:" + std::to_string(f.index);
    case FeatureType::Dep: {
      std::string kind(to_string(f.dep.kind));
      std::transform(kind.begin(), kind.end(), kind.begin(), ::tolower);
      return "dep:" + std::to_string(f.dep.src) + "-" + std::to_string(f.dep.dst) + ":" + kind + ":" +
             f.dep.resource;
    }
    case FeatureType::NumInsts: return "numinsts";
  }
  return "?";
}

Feature parse_feature(std::string_view spec, const BlockGraph& g) {
  auto bad = [&](const std::string& why) {
    return ConfigError("bad feature '" + std::string(spec) + "': " + why);
  };
  auto to_int = [&](std::string_view s) {
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
      throw bad("expected a positive integer");
    return std::stoi(std::string(s));
  };

  Feature f;
  if (spec == "numinsts" || spec == "num_insts") {
    f = Feature::num_insts(static_cast<int>(g.size()));
  } else if (spec.substr(0, 5) == "inst:") {
    f = Feature::inst(to_int(spec.substr(5)));
  } else if (spec.substr(0, 4) == "dep:") {
    std::string_view rest = spec.substr(4);
    auto c1 = rest.find(':');
    if (c1 == std::string_view::npos) throw bad("expected dep:<src>-<dst>:<kind>:<resource>");
    auto c2 = rest.find(':', c1 + 1);
    if (c2 == std::string_view::npos) throw bad("expected dep:<src>-<dst>:<kind>:<resource>");
    std::string_view pair = rest.substr(0, c1);
    auto dash = pair.find('-');
    if (dash == std::string_view::npos) throw bad("expected <src>-<dst>");
    auto kind = parse_dep_kind(rest.substr(c1 + 1, c2 - c1 - 1));
    if (!kind) throw bad("unknown dependency kind");
    f = Feature::dependency({to_int(pair.substr(0, dash)), to_int(pair.substr(dash + 1)), *kind,
                             std::string(rest.substr(c2 + 1))});
  } else {
    throw bad("expected inst:<i>, dep:<src>-<dst>:<kind>:<resource> or numinsts");
  }
  if (!extract_features(g).contains(f)) throw bad("not a feature of this block");
  return f;
}

FeatureSet::FeatureSet(std::initializer_list<Feature> fs) : FeatureSet(std::vector<Feature>(fs)) {}

FeatureSet::FeatureSet(std::vector<Feature> fs) {
  for (auto& f : fs) insert(f);
}

bool FeatureSet::insert(const Feature& f) {
  auto it = std::lower_bound(items_.begin(), items_.end(), f);
  if (it != items_.end() && *it == f) return false;
  if (f.type == FeatureType::NumInsts && !items_.empty() && items_.back().type == FeatureType::NumInsts)
    throw Error("a feature set holds at most one instruction-count feature");
  items_.insert(it, f);
  return true;
}

bool FeatureSet::contains(const Feature& f) const {
  return std::binary_search(items_.begin(), items_.end(), f);
}

bool FeatureSet::subset_of(const FeatureSet& other) const {
  return std::includes(other.items_.begin(), other.items_.end(), items_.begin(), items_.end());
}

std::strong_ordering FeatureSet::operator<=>(const FeatureSet& o) const {
  return std::lexicographical_compare_three_way(items_.begin(), items_.end(), o.items_.begin(),
                                                o.items_.end());
}

FeatureSet extract_features(const BlockGraph& g) {
  std::vector<Feature> fs;
  fs.reserve(g.size() + g.dep_edges().size() + 1);
  for (std::size_t i = 0; i < g.size(); ++i) fs.push_back(Feature::inst(static_cast<int>(i) + 1));
  for (const auto& e : g.dep_edges()) fs.push_back(Feature::dependency(e));
  fs.push_back(Feature::num_insts(static_cast<int>(g.size())));
  return FeatureSet(std::move(fs));
}

VertexMap VertexMap::identity(std::size_t n) {
  std::vector<int> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = static_cast<int>(i) + 1;
  return VertexMap(std::move(t));
}

bool feature_present(const BlockGraph& original, const BlockGraph& perturbed, const VertexMap& mapping,
                     const Feature& f) {
  switch (f.type) {
    case FeatureType::Inst: {
      auto to = mapping(f.index);
      if (!to || f.index > static_cast<int>(original.size())) return false;
      return perturbed.block()[*to - 1].mnemonic == original.block()[f.index - 1].mnemonic;
    }
    case FeatureType::Dep: {
      auto s = mapping(f.dep.src);
      auto d = mapping(f.dep.dst);
      if (!s || !d) return false;
      return perturbed.has_edge({*s, *d, f.dep.kind, f.dep.resource});
    }
    case FeatureType::NumInsts:
      return static_cast<int>(perturbed.size()) == f.count;
  }
  return false;
}

}  // namespace comet
