#include "aqc/eqbuild.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace aqc {

std::vector<SynthesizedVariable> extract_synthesized(const AAIS& aais) {
  std::vector<SynthesizedVariable> out;
  const auto& instructions = aais.instructions();
  for (std::size_t ins_idx = 0; ins_idx < instructions.size(); ++ins_idx) {
    const auto& ins = instructions[ins_idx];
    struct Member {
      double c;
      const Effect* effect;
    };
    // Keyed by the constant-free residual; insertion order is kept separately
    // so variable numbering follows the instruction's effect order.
    std::map<std::string, std::vector<Member>> groups;
    std::vector<std::string> order;
    for (const auto& eff : ins.effects) {
      auto [c, rest] = split_constant(eff.expr);
      if (c == 0.0) continue;
      std::string key = rest.to_string();
      auto [it, inserted] = groups.try_emplace(key);
      if (inserted) order.push_back(key);
      it->second.push_back({c, &eff});
    }
    std::vector<SynthesizedVariable> local;
    for (const auto& key : order) {
      auto& members = groups[key];
      std::sort(members.begin(), members.end(),
                [](const Member& a, const Member& b) { return canonical_less(a.effect->string, b.effect->string); });
      SynthesizedVariable sv;
      sv.defining_expr = members.front().effect->expr;
      sv.source_instruction = ins_idx;
      sv.amplitude_vars = sv.defining_expr.variables();
      for (const auto& m : members) sv.incidence.push_back({m.effect->string, m.c / members.front().c});
      local.push_back(std::move(sv));
    }
    std::sort(local.begin(), local.end(), [](const auto& a, const auto& b) {
      return canonical_less(a.incidence.front().string, b.incidence.front().string);
    });
    for (auto& sv : local) {
      sv.id = out.size();
      out.push_back(std::move(sv));
    }
  }
  return out;
}

std::optional<Eigen::Index> GlobalLinearSystem::row_of(const PauliString& s) const {
  auto it = std::lower_bound(term_index.begin(), term_index.end(), s, CanonicalLess{});
  if (it == term_index.end() || !(*it == s)) return std::nullopt;
  return static_cast<Eigen::Index>(it - term_index.begin());
}

double GlobalLinearSystem::norm1() const {
  double best = 0.0;
  for (Eigen::Index c = 0; c < matrix.outerSize(); ++c) {
    double col = 0.0;
    for (Eigen::SparseMatrix<double>::InnerIterator it(matrix, c); it; ++it) col += std::abs(it.value());
    best = std::max(best, col);
  }
  return best;
}

Eigen::VectorXd GlobalLinearSystem::rhs_for(const TargetHamiltonian& target) const {
  return target_vector(target, term_index);
}

GlobalLinearSystem build_global_linear(std::vector<SynthesizedVariable> synths, const TargetHamiltonian& target,
                                       std::span<const PauliString> extra_strings) {
  std::set<PauliString, CanonicalLess> strings;
  for (const auto& t : target.terms) strings.insert(t.string);
  for (const auto& s : extra_strings) {
    if (!s.is_identity()) strings.insert(s);
  }
  for (const auto& sv : synths) {
    for (const auto& inc : sv.incidence) strings.insert(inc.string);
  }

  GlobalLinearSystem sys;
  sys.term_index.assign(strings.begin(), strings.end());
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t col = 0; col < synths.size(); ++col) {
    for (const auto& inc : synths[col].incidence) {
      auto row = std::lower_bound(sys.term_index.begin(), sys.term_index.end(), inc.string, CanonicalLess{}) -
                 sys.term_index.begin();
      triplets.emplace_back(static_cast<int>(row), static_cast<int>(col), inc.coeff);
    }
  }
  sys.matrix.resize(static_cast<Eigen::Index>(sys.term_index.size()), static_cast<Eigen::Index>(synths.size()));
  sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
  sys.matrix.makeCompressed();
  sys.synth_vars = std::move(synths);
  sys.rhs = target_vector(target, sys.term_index);
  return sys;
}

namespace {

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

std::vector<LocalSystem> connected_components(std::span<const SynthesizedVariable> synths, const AAIS& aais,
                                              std::vector<std::string>* warnings) {
  // Nodes: synthesized variables first, then amplitude variables.
  const std::size_t n_synth = synths.size();
  UnionFind uf(n_synth + aais.variables().size());
  for (std::size_t s = 0; s < n_synth; ++s) {
    for (VarIndex v : synths[s].amplitude_vars) uf.unite(s, n_synth + v);
  }
  std::map<std::size_t, std::size_t> root_to_component;
  std::vector<LocalSystem> locals;
  for (std::size_t s = 0; s < n_synth; ++s) {
    auto [it, inserted] = root_to_component.try_emplace(uf.find(s), locals.size());
    if (inserted) {
      locals.emplace_back();
      locals.back().component_id = it->second;
    }
    locals[it->second].synth_vars.push_back(s);
  }
  for (auto& local : locals) {
    std::set<VarIndex> vars;
    for (std::size_t s : local.synth_vars) vars.insert(synths[s].amplitude_vars.begin(), synths[s].amplitude_vars.end());
    local.amplitude_vars.assign(vars.begin(), vars.end());
    std::vector<VarIndex> critical;
    for (VarIndex v : local.amplitude_vars) {
      const auto& var = aais.variable(v);
      if (var.kind == VarKind::RuntimeFixed) local.has_fixed_vars = true;
      if (var.time_critical) critical.push_back(v);
    }
    local.n_time_critical = critical.size();
    if (critical.size() == 1) local.time_critical_var = critical.front();
    if (critical.size() > 1 && warnings) {
      warnings->push_back("component " + std::to_string(local.component_id) + " has " +
                          std::to_string(critical.size()) +
                          " time-critical variables; using the bisection minimum-time search");
    }
  }
  return locals;
}

void assign_targets(std::vector<LocalSystem>& locals, const Eigen::VectorXd& alpha) {
  for (auto& local : locals) {
    local.targets.clear();
    for (std::size_t s : local.synth_vars) local.targets.push_back(alpha[static_cast<Eigen::Index>(s)]);
  }
}

}  // namespace aqc
