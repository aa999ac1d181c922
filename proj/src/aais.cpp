#include "aqc/aais.hpp"

#include <algorithm>
#include <cmath>

namespace aqc {

double c6_internal() { return kC6MHz * to_internal_factor(FrequencyUnit::MHz); }

AAIS AAIS::make(std::uint32_t n_sites, std::vector<AmplitudeVariable> variables,
                std::vector<Instruction> instructions, std::vector<Site> sites, double min_separation,
                std::optional<double> t_machine_max) {
  if (n_sites == 0) throw invalid_input("AAIS needs at least one site");
  AAIS a;
  a.n_sites_ = n_sites;
  for (VarIndex i = 0; i < variables.size(); ++i) {
    const auto& v = variables[i];
    if (v.id.empty()) throw invalid_input("variable with empty id");
    if (!(v.bounds.lo <= v.bounds.hi)) throw invalid_input("variable " + v.id + " has lo > hi");
    if (v.time_critical && v.kind != VarKind::RuntimeDynamic) {
      throw invalid_input("variable " + v.id + " is time-critical but runtime-fixed");
    }
    if (v.resolution < 0.0) throw invalid_input("variable " + v.id + " has negative resolution");
    if (!a.by_id_.emplace(v.id, i).second) throw invalid_input("duplicate variable id " + v.id);
  }
  a.variables_ = std::move(variables);

  for (auto& ins : instructions) {
    std::map<PauliString, std::vector<Expr>, CanonicalLess> merged;
    for (auto& e : ins.effects) {
      if (e.string.span() > n_sites) {
        throw invalid_input("instruction " + ins.name + " acts outside the " + std::to_string(n_sites) + " sites");
      }
      if (e.string.is_identity()) continue;
      merged[e.string].push_back(e.expr);
    }
    ins.effects.clear();
    ins.variables.clear();
    for (auto& [s, exprs] : merged) {
      Expr expr = exprs.size() == 1 ? exprs.front() : Expr::sum(exprs);
      for (VarIndex v : expr.variables()) {
        if (v >= a.variables_.size()) throw invalid_input("instruction " + ins.name + " references unknown variable");
        ins.variables.insert(v);
      }
      ins.effects.push_back({expr, s});
    }
  }
  a.instructions_ = std::move(instructions);

  for (const auto& site : sites) {
    for (VarIndex v : site.coords) {
      if (v >= a.variables_.size()) throw invalid_input("site references unknown position variable");
    }
  }
  a.sites_ = std::move(sites);
  if (min_separation < 0.0) throw invalid_input("negative minimum separation");
  a.min_separation_ = min_separation;
  if (t_machine_max && !(*t_machine_max > 0.0)) throw invalid_input("t_machine_max must be positive");
  a.t_machine_max_ = t_machine_max;
  return a;
}

std::optional<VarIndex> AAIS::find(std::string_view id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

VarIndex AAIS::index_of(std::string_view id) const {
  auto v = find(id);
  if (!v) throw invalid_input("unknown variable '" + std::string(id) + "'");
  return *v;
}

std::pair<AAIS, std::vector<VarIndex>> AAIS::with_shared_groups() const {
  std::vector<VarIndex> rep(variables_.size());
  std::map<std::string, VarIndex> first;
  AAIS out = *this;
  for (VarIndex i = 0; i < variables_.size(); ++i) {
    rep[i] = i;
    const auto& g = variables_[i].share_group;
    if (!g) continue;
    auto [it, inserted] = first.emplace(*g, i);
    if (inserted) continue;
    rep[i] = it->second;
    auto& target = out.variables_[it->second];
    const auto& member = variables_[i];
    if (member.kind != target.kind || member.time_critical != target.time_critical) {
      throw invalid_input("share group " + *g + " mixes variable kinds");
    }
    target.bounds.lo = std::max(target.bounds.lo, member.bounds.lo);
    target.bounds.hi = std::min(target.bounds.hi, member.bounds.hi);
    if (target.bounds.lo > target.bounds.hi) throw invalid_input("share group " + *g + " has empty bounds");
  }
  for (auto& ins : out.instructions_) {
    ins.variables.clear();
    for (auto& eff : ins.effects) {
      for (VarIndex i = 0; i < rep.size(); ++i) {
        if (rep[i] != i && eff.expr.depends_on(i)) eff.expr = eff.expr.substituted(i, Expr::var(rep[i]));
      }
      for (VarIndex v : eff.expr.variables()) ins.variables.insert(v);
    }
  }
  return {std::move(out), std::move(rep)};
}

namespace {

Bounds scaled(Bounds b, double factor) { return {b.lo * factor, b.hi * factor}; }

}  // namespace

AAIS build_rydberg_aais(std::uint32_t n_sites, int dims, const RydbergLimits& limits) {
  if (n_sites == 0) throw invalid_input("Rydberg AAIS needs n_sites >= 1");
  if (dims != 1 && dims != 2) throw invalid_input("Rydberg AAIS supports dims 1 or 2");
  const double f = to_internal_factor(limits.unit);

  std::vector<AmplitudeVariable> vars;
  std::vector<Site> sites(n_sites);
  auto add = [&](AmplitudeVariable v) {
    vars.push_back(std::move(v));
    return static_cast<VarIndex>(vars.size() - 1);
  };
  const char* axes[] = {"x_", "y_"};
  for (std::uint32_t i = 0; i < n_sites; ++i) {
    for (int d = 0; d < dims; ++d) {
      sites[i].coords.push_back(add({std::string(axes[d]) + std::to_string(i), VarKind::RuntimeFixed, false,
                                     limits.position, Quantity::Length, std::nullopt,
                                     limits.position_resolution}));
    }
  }
  std::vector<VarIndex> delta(n_sites), omega(n_sites), phi(n_sites);
  for (std::uint32_t i = 0; i < n_sites; ++i) {
    const auto s = std::to_string(i);
    delta[i] = add({"Delta_" + s, VarKind::RuntimeDynamic, true, scaled(limits.delta, f), Quantity::Frequency,
                    "Delta", 0.0});
    omega[i] = add({"Omega_" + s, VarKind::RuntimeDynamic, true, scaled(limits.omega, f), Quantity::Frequency,
                    "Omega", 0.0});
    phi[i] = add({"phi_" + s, VarKind::RuntimeDynamic, false, limits.phi, Quantity::Angle, "phi", 0.0});
  }

  const double c6_quarter = c6_internal() / 4.0;
  std::vector<Instruction> instructions;
  for (std::uint32_t i = 0; i < n_sites; ++i) {
    for (std::uint32_t j = i + 1; j < n_sites; ++j) {
      Expr inv_d6;
      if (dims == 1) {
        inv_d6 = Expr::power(Expr::abs_diff(Expr::var(sites[i].coords[0]), Expr::var(sites[j].coords[0])), -6);
      } else {
        std::vector<Expr> squares;
        for (int d = 0; d < dims; ++d) {
          squares.push_back(Expr::power(Expr::var(sites[i].coords[d]) - Expr::var(sites[j].coords[d]), 2));
        }
        inv_d6 = Expr::power(Expr::sum(std::move(squares)), -3);
      }
      Instruction ins;
      ins.name = "vdw_" + std::to_string(i) + "_" + std::to_string(j);
      // C6/d^6 n_i n_j with n = (I - Z)/2.
      ins.effects.push_back({-c6_quarter * inv_d6, PauliString::single(i, Pauli::Z)});
      ins.effects.push_back({-c6_quarter * inv_d6, PauliString::single(j, Pauli::Z)});
      ins.effects.push_back({c6_quarter * inv_d6, PauliString::pair(i, Pauli::Z, j, Pauli::Z)});
      instructions.push_back(std::move(ins));
    }
  }
  for (std::uint32_t i = 0; i < n_sites; ++i) {
    Instruction det;
    det.name = "detuning_" + std::to_string(i);
    // -Delta n_i = Delta/2 Z_i up to identity.
    det.effects.push_back({0.5 * Expr::var(delta[i]), PauliString::single(i, Pauli::Z)});
    instructions.push_back(std::move(det));
  }
  for (std::uint32_t i = 0; i < n_sites; ++i) {
    Instruction rabi;
    rabi.name = "rabi_" + std::to_string(i);
    rabi.effects.push_back({Expr::product({Expr::constant(0.5), Expr::var(omega[i]), Expr::cos(Expr::var(phi[i]))}),
                            PauliString::single(i, Pauli::X)});
    rabi.effects.push_back({Expr::product({Expr::constant(-0.5), Expr::var(omega[i]), Expr::sin(Expr::var(phi[i]))}),
                            PauliString::single(i, Pauli::Y)});
    instructions.push_back(std::move(rabi));
  }

  AAIS aais = AAIS::make(n_sites, std::move(vars), std::move(instructions), std::move(sites), limits.min_separation,
                         limits.t_machine_max);
  aais.display_unit = limits.unit;
  aais.description = "rydberg n_sites=" + std::to_string(n_sites) + " dims=" + std::to_string(dims);
  return aais;
}

AAIS build_heisenberg_aais(std::uint32_t n_sites, std::span<const std::pair<std::uint32_t, std::uint32_t>> edges,
                           const HeisenbergLimits& limits) {
  if (n_sites == 0) throw invalid_input("Heisenberg AAIS needs n_sites >= 1");
  const double f = to_internal_factor(limits.unit);
  const Bounds amp = scaled(limits.amplitude, f);
  std::vector<AmplitudeVariable> vars;
  std::vector<Instruction> instructions;
  const Pauli paulis[] = {Pauli::X, Pauli::Y, Pauli::Z};

  auto add_term = [&](std::string id, PauliString s) {
    vars.push_back({"a_" + id, VarKind::RuntimeDynamic, true, amp, Quantity::Frequency, std::nullopt, 0.0});
    Instruction ins;
    ins.name = id;
    ins.effects.push_back({Expr::var(static_cast<VarIndex>(vars.size() - 1)), std::move(s)});
    instructions.push_back(std::move(ins));
  };

  for (std::uint32_t i = 0; i < n_sites; ++i) {
    for (Pauli p : paulis) add_term(std::string(1, to_char(p)) + "_" + std::to_string(i), PauliString::single(i, p));
  }
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  for (auto [a, b] : edges) {
    if (a >= n_sites || b >= n_sites || a == b) {
      throw invalid_input("invalid coupling edge (" + std::to_string(a) + ", " + std::to_string(b) + ")");
    }
    if (a > b) std::swap(a, b);
    if (!seen.emplace(a, b).second) continue;
    for (Pauli p : paulis) {
      add_term(std::string(2, to_char(p)) + "_" + std::to_string(a) + "_" + std::to_string(b),
               PauliString::pair(a, p, b, p));
    }
  }
  AAIS aais = AAIS::make(n_sites, std::move(vars), std::move(instructions), {}, 0.0, limits.t_machine_max);
  aais.display_unit = limits.unit;
  aais.description = "heisenberg n_sites=" + std::to_string(n_sites) + " edges=" + std::to_string(seen.size());
  return aais;
}

std::vector<WeightedTerm> simulator_hamiltonian(const AAIS& aais, std::span<const double> values) {
  std::vector<WeightedTerm> terms;
  for (const auto& ins : aais.instructions()) {
    for (const auto& e : ins.effects) terms.push_back({e.expr.evaluate(values), e.string});
  }
  return canonicalize(terms).terms;
}

}  // namespace aqc
