#include "aqc/solve.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <numbers>
#include <queue>
#include <set>
#include <sstream>

#include "aqc/linsolve.hpp"
#include "aqc/nlls.hpp"
#include "aqc/parallel.hpp"

namespace aqc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Targets at or below this magnitude (rad) count as zero.
constexpr double kZeroTarget = 1e-12;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

// r_k = m * e_k(v) - a_k over the free variables `vars`, with m either fixed
// or the last parameter.
struct ExprFit {
  std::vector<Expr> exprs;
  Eigen::VectorXd targets;
  std::vector<VarIndex> vars;
  std::vector<double> base;
  bool mult_param = false;
  double mult = 1.0;
  Bounds mult_bounds{-kInf, kInf};
};

NllsProblem make_problem(std::shared_ptr<const ExprFit> fit, const AAIS& aais) {
  NllsProblem p;
  const auto nv = static_cast<Eigen::Index>(fit->vars.size());
  p.n_params = nv + (fit->mult_param ? 1 : 0);
  p.n_residuals = static_cast<Eigen::Index>(fit->exprs.size());
  p.lo.resize(p.n_params);
  p.hi.resize(p.n_params);
  for (Eigen::Index i = 0; i < nv; ++i) {
    const auto& b = aais.variable(fit->vars[static_cast<std::size_t>(i)]).bounds;
    p.lo[i] = b.lo;
    p.hi[i] = b.hi;
  }
  if (fit->mult_param) {
    p.lo[nv] = fit->mult_bounds.lo;
    p.hi[nv] = fit->mult_bounds.hi;
  }
  auto param_of = std::make_shared<std::vector<int>>(fit->base.size(), -1);
  for (std::size_t i = 0; i < fit->vars.size(); ++i) (*param_of)[fit->vars[i]] = static_cast<int>(i);
  auto tapes = std::make_shared<std::vector<ExprTape>>();
  for (const auto& e : fit->exprs) tapes->emplace_back(e);
  p.residuals = [fit, param_of, tapes, nv](const Eigen::VectorXd& x, Eigen::VectorXd& r,
                                           std::vector<Eigen::Triplet<double>>* jac) {
    thread_local std::vector<double> values;
    thread_local std::vector<std::pair<VarIndex, double>> partials;
    values = fit->base;
    for (Eigen::Index i = 0; i < nv; ++i) values[fit->vars[static_cast<std::size_t>(i)]] = x[i];
    const double m = fit->mult_param ? x[nv] : fit->mult;
    for (std::size_t k = 0; k < tapes->size(); ++k) {
      const auto row = static_cast<Eigen::Index>(k);
      const ExprTape& tape = (*tapes)[k];
      double v = 0.0;
      if (!jac) {
        if (!tape.evaluate(values, v)) v = kInf;
        r[row] = m * v - fit->targets[row];
        continue;
      }
      partials.clear();
      if (!tape.gradient(values, v, partials)) {
        v = kInf;
        partials.clear();
      }
      r[row] = m * v - fit->targets[row];
      for (const auto& [var, d] : partials) {
        int col = (*param_of)[var];
        if (col >= 0 && d != 0.0) jac->emplace_back(static_cast<int>(row), col, m * d);
      }
      if (fit->mult_param) jac->emplace_back(static_cast<int>(row), static_cast<int>(nv), v);
    }
  };
  return p;
}

std::vector<double> default_values(const AAIS& aais) {
  std::vector<double> v;
  for (const auto& var : aais.variables()) v.push_back(var.bounds.clamp(0.0));
  return v;
}

Eigen::VectorXd component_targets(const LocalSystem& local, const Eigen::VectorXd& alpha) {
  Eigen::VectorXd t(static_cast<Eigen::Index>(local.synth_vars.size()));
  for (std::size_t i = 0; i < local.synth_vars.size(); ++i) {
    t[static_cast<Eigen::Index>(i)] = alpha[static_cast<Eigen::Index>(local.synth_vars[i])];
  }
  return t;
}

std::vector<Expr> defining_exprs(const LocalSystem& local, const GlobalLinearSystem& sys) {
  std::vector<Expr> out;
  for (std::size_t s : local.synth_vars) out.push_back(sys.synth_vars[s].defining_expr);
  return out;
}

double component_residual(const LocalSystem& local, const GlobalLinearSystem& sys, const std::vector<double>& values,
                          double t, const Eigen::VectorXd& targets) {
  double r = 0.0;
  for (std::size_t i = 0; i < local.synth_vars.size(); ++i) {
    r += std::abs(sys.synth_vars[local.synth_vars[i]].defining_expr.evaluate(values) * t -
                  targets[static_cast<Eigen::Index>(i)]);
  }
  return r;
}

// Closed-form structure of a component with one time-critical variable v:
// every defining expression equals v * g_k.
struct Absorption {
  VarIndex v = 0;
  std::vector<Expr> factors;  // g_k
  std::vector<VarIndex> companions;
  bool constant = false;  // all g_k constant (Case 1)
};

std::optional<Absorption> classify(const LocalSystem& local, const GlobalLinearSystem& sys) {
  if (!local.time_critical_var) return std::nullopt;
  Absorption a;
  a.v = *local.time_critical_var;
  a.constant = true;
  for (std::size_t s : local.synth_vars) {
    auto g = linear_factor(sys.synth_vars[s].defining_expr, a.v);
    if (!g) return std::nullopt;
    Expr gs = g->simplified();
    if (!gs.is_constant()) a.constant = false;
    a.factors.push_back(gs);
  }
  for (VarIndex u : local.amplitude_vars) {
    if (u != a.v) a.companions.push_back(u);
  }
  return a;
}

Bounds absorbed_bounds(const Bounds& vb) { return {vb.lo < 0.0 ? -kInf : 0.0, vb.hi > 0.0 ? kInf : 0.0}; }

struct AbsorbedSolution {
  double u = 0.0;
  std::map<VarIndex, double> companions;
  double residual = 0.0;
};

// Solves g_k(w) * u = alpha_k for (u, w). Independent of T.
AbsorbedSolution solve_absorbed(const Absorption& a, const AAIS& aais, const Eigen::VectorXd& targets,
                                std::uint64_t seed) {
  AbsorbedSolution out;
  const Bounds ub = absorbed_bounds(aais.variable(a.v).bounds);
  if (a.constant) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < a.factors.size(); ++k) {
      const double c = a.factors[k].evaluate({});
      num += c * targets[static_cast<Eigen::Index>(k)];
      den += c * c;
    }
    out.u = den > 0.0 ? ub.clamp(num / den) : 0.0;
    for (std::size_t k = 0; k < a.factors.size(); ++k) {
      out.residual += std::abs(a.factors[k].evaluate({}) * out.u - targets[static_cast<Eigen::Index>(k)]);
    }
    return out;
  }
  auto fit = std::make_shared<ExprFit>();
  fit->exprs = a.factors;
  fit->targets = targets;
  fit->vars = a.companions;
  fit->base = default_values(aais);
  fit->mult_param = true;
  fit->mult_bounds = ub;
  NllsProblem problem = make_problem(fit, aais);

  Eigen::VectorXd lo = problem.lo.head(problem.n_params - 1);
  Eigen::VectorXd hi = problem.hi.head(problem.n_params - 1);
  std::vector<Eigen::VectorXd> companion_starts;
  Eigen::VectorXd w0(lo.size());
  for (Eigen::Index i = 0; i < lo.size(); ++i) w0[i] = std::clamp(0.0, lo[i], hi[i]);
  companion_starts.push_back(w0);
  for (auto& h : halton_points(lo, hi, 7, seed)) companion_starts.push_back(h);

  std::vector<Eigen::VectorXd> starts;
  for (const auto& w : companion_starts) {
    std::vector<double> values = fit->base;
    for (std::size_t i = 0; i < a.companions.size(); ++i) values[a.companions[i]] = w[static_cast<Eigen::Index>(i)];
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < a.factors.size(); ++k) {
      const double g = a.factors[k].evaluate(values);
      num += g * targets[static_cast<Eigen::Index>(k)];
      den += g * g;
    }
    Eigen::VectorXd x(problem.n_params);
    x.head(lo.size()) = w;
    x[lo.size()] = ub.clamp(den > 0.0 ? num / den : targets.lpNorm<1>());
    starts.push_back(std::move(x));
  }
  NllsResult best = solve_multistart(problem, starts);
  out.u = best.x[lo.size()];
  for (std::size_t i = 0; i < a.companions.size(); ++i) out.companions[a.companions[i]] = best.x[static_cast<Eigen::Index>(i)];
  Eigen::VectorXd r(problem.n_residuals);
  problem.residuals(best.x, r, nullptr);
  out.residual = r.lpNorm<1>();
  return out;
}

// Velocity bound in the direction of u.
double v_max_for(const Bounds& b, double u) { return u > 0.0 ? b.hi : -b.lo; }

LocalSolution zero_solution(const LocalSystem& local, const GlobalLinearSystem& sys, const AAIS& aais) {
  LocalSolution sol;
  sol.component_id = local.component_id;
  sol.time_case = TimeCase::ZeroTarget;
  std::vector<double> values = default_values(aais);
  auto exprs = defining_exprs(local, sys);
  double total = 0.0;
  for (const auto& e : exprs) total += std::abs(e.evaluate(values));
  if (total > 0.0) {
    // Zero is not a root of every expression: drive them to zero instead.
    auto fit = std::make_shared<ExprFit>();
    fit->exprs = exprs;
    fit->targets = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(exprs.size()));
    fit->vars = local.amplitude_vars;
    fit->base = values;
    NllsProblem p = make_problem(fit, aais);
    Eigen::VectorXd x0(p.n_params);
    for (std::size_t i = 0; i < local.amplitude_vars.size(); ++i) x0[static_cast<Eigen::Index>(i)] = values[local.amplitude_vars[i]];
    NllsResult r = solve_bounded_lm(p, x0);
    for (std::size_t i = 0; i < local.amplitude_vars.size(); ++i) values[local.amplitude_vars[i]] = r.x[static_cast<Eigen::Index>(i)];
  }
  for (VarIndex v : local.amplitude_vars) sol.values[v] = values[v];
  return sol;
}

// Bounded least squares of defining(v) * t = alpha at fixed t.
NllsResult fit_at_time(const LocalSystem& local, const GlobalLinearSystem& sys, const AAIS& aais,
                       const Eigen::VectorXd& targets, double t, const std::vector<double>& base,
                       const std::vector<VarIndex>& free_vars, const std::vector<Eigen::VectorXd>& extra_starts,
                       std::uint64_t seed, int halton_count, NllsProblem* problem_out = nullptr) {
  auto fit = std::make_shared<ExprFit>();
  fit->exprs = defining_exprs(local, sys);
  fit->targets = targets;
  fit->vars = free_vars;
  fit->base = base;
  fit->mult = t;
  NllsProblem p = make_problem(fit, aais);
  std::vector<Eigen::VectorXd> starts = extra_starts;
  Eigen::VectorXd x0(p.n_params);
  for (std::size_t i = 0; i < free_vars.size(); ++i) x0[static_cast<Eigen::Index>(i)] = base[free_vars[i]];
  starts.push_back(x0);
  for (auto& h : halton_points(p.lo, p.hi, halton_count, seed)) starts.push_back(std::move(h));
  NllsResult r = solve_multistart(p, starts);
  if (problem_out) *problem_out = std::move(p);
  return r;
}

struct SearchResult {
  double t = 0.0;
  std::map<VarIndex, double> values;
  double residual = 0.0;
};

// Case 3 and several time-critical variables: smallest T at which the
// component's equations are met within tolerance.
SearchResult search_min_time(const LocalSystem& local, const GlobalLinearSystem& sys, const AAIS& aais,
                             const Eigen::VectorXd& targets, std::uint64_t seed) {
  const double tol = 1e-9 * std::max(1.0, targets.lpNorm<1>());
  const std::vector<double> base = default_values(aais);
  const auto& vars = local.amplitude_vars;
  auto to_values = [&](const Eigen::VectorXd& x) {
    std::map<VarIndex, double> m;
    for (std::size_t i = 0; i < vars.size(); ++i) m[vars[i]] = x[static_cast<Eigen::Index>(i)];
    return m;
  };
  auto residual_l1 = [&](const NllsProblem& p, const Eigen::VectorXd& x) {
    Eigen::VectorXd r(p.n_residuals);
    p.residuals(x, r, nullptr);
    return r.lpNorm<1>();
  };

  // Joint fit over (v, T) gives a feasible T to start the bisection from.
  auto joint = std::make_shared<ExprFit>();
  joint->exprs = defining_exprs(local, sys);
  joint->targets = targets;
  joint->vars = vars;
  joint->base = base;
  joint->mult_param = true;
  joint->mult_bounds = {0.0, kInf};
  NllsProblem jp = make_problem(joint, aais);
  std::vector<Eigen::VectorXd> starts;
  Eigen::VectorXd lo = jp.lo.head(static_cast<Eigen::Index>(vars.size()));
  Eigen::VectorXd hi = jp.hi.head(static_cast<Eigen::Index>(vars.size()));
  for (auto& h : halton_points(lo, hi, 8, seed)) {
    Eigen::VectorXd x(jp.n_params);
    x.head(lo.size()) = h;
    x[lo.size()] = 1.0;
    starts.push_back(std::move(x));
  }
  NllsResult jr = solve_multistart(jp, starts);
  double t_hi = std::max(jr.x[lo.size()], 1e-9);

  auto feasible = [&](double t, const Eigen::VectorXd& warm, NllsResult& out) {
    NllsProblem p;
    std::vector<double> b = base;
    for (std::size_t i = 0; i < vars.size(); ++i) b[vars[i]] = warm[static_cast<Eigen::Index>(i)];
    out = fit_at_time(local, sys, aais, targets, t, b, vars, {}, seed, 7, &p);
    return residual_l1(p, out.x) <= tol;
  };

  Eigen::VectorXd warm = jr.x.head(lo.size());
  NllsResult hi_fit;
  bool ok = feasible(t_hi, warm, hi_fit);
  for (int k = 0; k < 40 && !ok; ++k) {
    t_hi *= 2.0;
    ok = feasible(t_hi, hi_fit.x, hi_fit);
  }
  SearchResult out;
  if (!ok) {
    // Nothing meets tolerance: keep the joint fit's best-residual time.
    out.t = jr.x[lo.size()];
    out.values = to_values(warm);
    Eigen::VectorXd r(jp.n_residuals);
    jp.residuals(jr.x, r, nullptr);
    out.residual = r.lpNorm<1>();
    return out;
  }
  double t_lo = 0.0;
  for (int it = 0; it < 200 && t_hi - t_lo > 1e-12 * t_hi; ++it) {
    const double mid = 0.5 * (t_lo + t_hi);
    NllsResult trial;
    if (feasible(mid, hi_fit.x, trial)) {
      t_hi = mid;
      hi_fit = std::move(trial);
    } else {
      t_lo = mid;
    }
  }
  out.t = t_hi;
  out.values = to_values(hi_fit.x);
  std::vector<double> values = base;
  for (auto& [v, x] : out.values) values[v] = x;
  out.residual = component_residual(local, sys, values, out.t, targets);
  return out;
}

}  // namespace

std::string to_string(TimeCase c) {
  switch (c) {
    case TimeCase::ZeroTarget: return "zero_target";
    case TimeCase::Constant: return "constant";
    case TimeCase::Linear: return "linear";
    case TimeCase::Absorbed: return "absorbed";
    case TimeCase::Search: return "search";
    case TimeCase::Fixed: return "fixed";
  }
  return "unknown";
}

LinearSolution solve_global_linear(const Eigen::SparseMatrix<double>& m, const Eigen::VectorXd& rhs) {
  LinearSolution out;
  out.alpha_star = min_norm_lstsq(m, rhs);
  out.residual_l1 = (m * out.alpha_star - rhs).lpNorm<1>();
  return out;
}

LinearSolution solve_global_linear(const GlobalLinearSystem& sys) { return solve_global_linear(sys.matrix, sys.rhs); }

LocalSolution local_min_time(const LocalSystem& local, const GlobalLinearSystem& sys, const AAIS& aais,
                             const Eigen::VectorXd& alpha, std::uint64_t seed) {
  if (local.has_fixed_vars) throw structural("local_min_time called on a component with fixed variables");
  const Eigen::VectorXd targets = component_targets(local, alpha);
  if (local.amplitude_vars.empty()) {
    LocalSolution sol;
    sol.component_id = local.component_id;
    sol.time_case = TimeCase::Constant;
    return sol;
  }
  if (targets.lpNorm<Eigen::Infinity>() <= kZeroTarget) return zero_solution(local, sys, aais);

  LocalSolution sol;
  sol.component_id = local.component_id;
  if (auto a = classify(local, sys)) {
    sol.time_case = a->constant ? TimeCase::Linear : TimeCase::Absorbed;
    AbsorbedSolution abs = solve_absorbed(*a, aais, targets, seed);
    const Bounds& vb = aais.variable(a->v).bounds;
    sol.values = abs.companions;
    sol.residual_l1 = abs.residual;
    if (abs.u == 0.0) {
      sol.values[a->v] = vb.clamp(0.0);
      return sol;
    }
    const double vmax = v_max_for(vb, abs.u);
    if (!(vmax > 0.0)) {
      throw infeasible("component " + std::to_string(local.component_id) + ": variable " + aais.variable(a->v).id +
                       " cannot take the sign its nonzero target needs");
    }
    sol.t_min = std::abs(abs.u) / vmax;
    sol.values[a->v] = abs.u > 0.0 ? vb.hi : vb.lo;
    return sol;
  }
  sol.time_case = TimeCase::Search;
  SearchResult s = search_min_time(local, sys, aais, targets, seed);
  sol.t_min = s.t;
  sol.values = std::move(s.values);
  sol.residual_l1 = s.residual;
  if (sol.t_min <= 0.0 && targets.lpNorm<1>() > 0.0 && s.residual >= targets.lpNorm<1>()) {
    throw infeasible("component " + std::to_string(local.component_id) + " cannot reach its targets at any duration");
  }
  return sol;
}

double choose_t_sim(std::span<const LocalSolution> locals) {
  double t = 0.0;
  for (const auto& l : locals) t = std::max(t, l.t_min);
  return t > 0.0 ? t : kMinScheduleDuration;
}

LocalSolution resolve_dynamic(const LocalSystem& local, const GlobalLinearSystem& sys, const AAIS& aais,
                              const Eigen::VectorXd& alpha, double t_sim, std::uint64_t seed, bool clamp_to_bounds) {
  if (local.has_fixed_vars) throw structural("resolve_dynamic called on a component with fixed variables");
  const Eigen::VectorXd targets = component_targets(local, alpha);
  LocalSolution sol;
  sol.component_id = local.component_id;
  if (local.amplitude_vars.empty()) {
    sol.time_case = TimeCase::Constant;
    return sol;
  }
  if (targets.lpNorm<Eigen::Infinity>() <= kZeroTarget) {
    sol = zero_solution(local, sys, aais);
    return sol;
  }
  if (!(t_sim > 0.0)) throw structural("resolve_dynamic needs a positive duration");
  if (auto a = classify(local, sys)) {
    sol.time_case = a->constant ? TimeCase::Linear : TimeCase::Absorbed;
    AbsorbedSolution abs = solve_absorbed(*a, aais, targets, seed);
    const Bounds& vb = aais.variable(a->v).bounds;
    double v = abs.u / t_sim;
    const double slack = 1e-9 * std::max(std::abs(vb.lo), std::abs(vb.hi));
    if (!vb.contains(v, slack) && !clamp_to_bounds) {
      throw structural("component " + std::to_string(local.component_id) + ": " + aais.variable(a->v).id + " = " +
                       fmt(v) + " out of bounds at t = " + fmt(t_sim));
    }
    v = vb.clamp(v);
    sol.values = abs.companions;
    sol.values[a->v] = v;
  } else {
    sol.time_case = TimeCase::Search;
    NllsResult r = fit_at_time(local, sys, aais, targets, t_sim, default_values(aais), local.amplitude_vars, {}, seed, 7);
    for (std::size_t i = 0; i < local.amplitude_vars.size(); ++i) {
      sol.values[local.amplitude_vars[i]] = r.x[static_cast<Eigen::Index>(i)];
    }
  }
  std::vector<double> values = default_values(aais);
  for (auto& [v, x] : sol.values) values[v] = x;
  sol.residual_l1 = component_residual(local, sys, values, t_sim, targets);
  return sol;
}

namespace {

// Per-site coordinate variables restricted to sites wholly inside `vars`.
std::vector<std::size_t> sites_in(const AAIS& aais, const std::set<VarIndex>& vars) {
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < aais.sites().size(); ++s) {
    const auto& c = aais.sites()[s].coords;
    if (!c.empty() && std::all_of(c.begin(), c.end(), [&](VarIndex v) { return vars.count(v) > 0; })) out.push_back(s);
  }
  return out;
}

double snap_value(double x, const AmplitudeVariable& var) {
  if (var.resolution <= 0.0) return x;
  const double r = var.resolution;
  double snapped = std::round(x / r) * r;
  const double lo = std::ceil(var.bounds.lo / r - 1e-9) * r;
  const double hi = std::floor(var.bounds.hi / r + 1e-9) * r;
  if (lo <= hi) snapped = std::clamp(snapped, lo, hi);
  return snapped;
}

struct PairEdge {
  std::size_t a = 0, b = 0;
  double rate = 0.0;  // target defining value alpha / t
  double distance = 0.0;
};

// Distance at which a pair expression reaches `rate`, by log-space bisection.
std::optional<double> pair_distance(const Expr& e, const AAIS& aais, std::size_t sa, std::size_t sb, double rate) {
  std::vector<double> values = default_values(aais);
  const auto& ca = aais.sites()[sa].coords;
  const auto& cb = aais.sites()[sb].coords;
  auto eval = [&](double d) {
    for (std::size_t k = 0; k < ca.size(); ++k) values[ca[k]] = 0.0;
    for (std::size_t k = 0; k < cb.size(); ++k) values[cb[k]] = k == 0 ? d : 0.0;
    try {
      return e.evaluate(values);
    } catch (const EvalError&) {
      return kInf;
    }
  };
  double lo = std::log(1e-3), hi = std::log(1e6);
  double flo = eval(std::exp(lo)), fhi = eval(std::exp(hi));
  if (!(flo > rate && fhi < rate)) return std::nullopt;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (eval(std::exp(mid)) > rate) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::exp(0.5 * (lo + hi));
}

// Chain and ring initial geometries from pairwise target amplitudes.
std::vector<Eigen::VectorXd> geometric_seeds(const LocalSystem& local, const GlobalLinearSystem& sys, const AAIS& aais,
                                             const Eigen::VectorXd& rates) {
  std::set<VarIndex> varset(local.amplitude_vars.begin(), local.amplitude_vars.end());
  const auto sites = sites_in(aais, varset);
  if (sites.empty()) return {};
  std::map<VarIndex, std::size_t> site_of;
  for (std::size_t s : sites) {
    for (VarIndex v : aais.sites()[s].coords) site_of[v] = s;
  }
  std::vector<PairEdge> edges;
  for (std::size_t i = 0; i < local.synth_vars.size(); ++i) {
    const double rate = rates[static_cast<Eigen::Index>(i)];
    if (!(rate > 0.0)) continue;
    const auto& sv = sys.synth_vars[local.synth_vars[i]];
    std::set<std::size_t> touched;
    bool only_coords = true;
    for (VarIndex v : sv.amplitude_vars) {
      auto it = site_of.find(v);
      if (it == site_of.end()) {
        only_coords = false;
        break;
      }
      touched.insert(it->second);
    }
    if (!only_coords || touched.size() != 2) continue;
    const std::size_t a = *touched.begin(), b = *touched.rbegin();
    if (auto d = pair_distance(sv.defining_expr, aais, a, b, rate)) edges.push_back({a, b, rate, *d});
  }

  const std::size_t dims = aais.sites()[sites.front()].coords.size();
  const double min_sep = aais.min_separation();
  auto axis_bounds = [&](std::size_t axis) {
    Bounds b{kInf, -kInf};
    for (std::size_t s : sites) {
      const auto& vb = aais.variable(aais.sites()[s].coords[axis]).bounds;
      b.lo = std::min(b.lo, vb.lo);
      b.hi = std::max(b.hi, vb.hi);
    }
    if (!std::isfinite(b.lo)) b.lo = 0.0;
    if (!std::isfinite(b.hi)) b.hi = b.lo + 100.0;
    return b;
  };
  const Bounds bx = axis_bounds(0);
  const Bounds by = dims > 1 ? axis_bounds(1) : Bounds{0.0, 0.0};

  auto pack = [&](const std::map<std::size_t, std::vector<double>>& pos) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(local.amplitude_vars.size()));
    for (std::size_t i = 0; i < local.amplitude_vars.size(); ++i) {
      VarIndex v = local.amplitude_vars[i];
      auto it = site_of.find(v);
      double val = aais.variable(v).bounds.clamp(0.0);
      if (it != site_of.end()) {
        const auto& coords = aais.sites()[it->second].coords;
        const std::size_t axis = static_cast<std::size_t>(std::find(coords.begin(), coords.end(), v) - coords.begin());
        val = pos.at(it->second)[axis];
      }
      x[static_cast<Eigen::Index>(i)] = val;
    }
    return x;
  };

  std::vector<Eigen::VectorXd> seeds;
  if (edges.empty()) {
    // No coupling wanted: spread the atoms as far apart as the box allows.
    std::map<std::size_t, std::vector<double>> pos;
    const std::size_t n = sites.size();
    if (dims == 1 || n <= 2) {
      for (std::size_t k = 0; k < n; ++k) {
        std::vector<double> p(dims, dims > 1 ? 0.5 * (by.lo + by.hi) : 0.0);
        p[0] = n == 1 ? bx.lo : bx.lo + (bx.hi - bx.lo) * static_cast<double>(k) / static_cast<double>(n - 1);
        pos[sites[k]] = p;
      }
    } else {
      const auto side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
      for (std::size_t k = 0; k < n; ++k) {
        std::vector<double> p(dims, 0.0);
        const double gx = side > 1 ? static_cast<double>(k % side) / static_cast<double>(side - 1) : 0.0;
        const double gy = side > 1 ? static_cast<double>(k / side) / static_cast<double>(side - 1) : 0.0;
        p[0] = bx.lo + gx * (bx.hi - bx.lo);
        p[1] = by.lo + gy * (by.hi - by.lo);
        pos[sites[k]] = p;
      }
    }
    seeds.push_back(pack(pos));
    return seeds;
  }

  // Maximum spanning forest on target rate.
  std::vector<PairEdge> sorted = edges;
  std::stable_sort(sorted.begin(), sorted.end(), [](const PairEdge& a, const PairEdge& b) { return a.rate > b.rate; });
  std::map<std::size_t, std::size_t> parent;
  for (std::size_t s : sites) parent[s] = s;
  std::function<std::size_t(std::size_t)> root = [&](std::size_t s) {
    while (parent[s] != s) s = parent[s] = parent[parent[s]];
    return s;
  };
  std::map<std::size_t, std::vector<std::pair<std::size_t, double>>> tree;
  double max_d = 0.0;
  for (const auto& e : sorted) {
    auto ra = root(e.a), rb = root(e.b);
    if (ra == rb) continue;
    parent[std::max(ra, rb)] = std::min(ra, rb);
    tree[e.a].push_back({e.b, e.distance});
    tree[e.b].push_back({e.a, e.distance});
    max_d = std::max(max_d, e.distance);
  }
  for (auto& [s, nb] : tree) std::sort(nb.begin(), nb.end());

  // Chain seed: BFS along axis 0; a second child of a node goes the other way.
  {
    std::map<std::size_t, double> x;
    double cursor = 0.0;
    const double gap = 3.0 * std::max(max_d, min_sep);
    for (std::size_t s0 : sites) {
      if (x.count(s0)) continue;
      // Root the tree at a leaf so a path unrolls in one direction.
      std::size_t start = s0;
      {
        std::set<std::size_t> seen{s0};
        std::queue<std::size_t> q;
        q.push(s0);
        while (!q.empty()) {
          std::size_t s = q.front();
          q.pop();
          if (tree[s].size() <= 1 && (tree[start].size() > 1 || s < start)) start = s;
          for (auto [nb, d] : tree[s]) {
            if (seen.insert(nb).second) q.push(nb);
          }
        }
      }
      std::map<std::size_t, double> local_x{{start, 0.0}};
      std::map<std::size_t, double> dir{{start, 1.0}};
      std::queue<std::size_t> q;
      q.push(start);
      while (!q.empty()) {
        std::size_t s = q.front();
        q.pop();
        int children = 0;
        for (auto [nb, d] : tree[s]) {
          if (local_x.count(nb)) continue;
          // First child continues away from the parent; extra branches fold back.
          const double sign = children++ % 2 == 0 ? dir[s] : -dir[s];
          local_x[nb] = local_x[s] + sign * d;
          dir[nb] = sign;
          q.push(nb);
        }
      }
      double mn = kInf, mx = -kInf;
      for (auto& [s, v] : local_x) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
      }
      for (auto& [s, v] : local_x) x[s] = cursor + (v - mn);
      cursor += (mx - mn) + gap;
    }
    std::map<std::size_t, std::vector<double>> pos;
    for (std::size_t s : sites) {
      std::vector<double> p(dims, dims > 1 ? 0.5 * (by.lo + by.hi) : 0.0);
      p[0] = bx.lo + x[s];
      pos[s] = p;
    }
    seeds.push_back(pack(pos));
  }

  // Ring seed: the strong edges form one simple cycle through every site.
  if (dims >= 2 && sites.size() >= 3) {
    double max_rate = 0.0;
    for (const auto& e : edges) max_rate = std::max(max_rate, e.rate);
    std::map<std::size_t, std::vector<std::pair<std::size_t, double>>> strong;
    std::size_t n_strong = 0;
    for (const auto& e : edges) {
      if (e.rate < 0.5 * max_rate) continue;
      strong[e.a].push_back({e.b, e.distance});
      strong[e.b].push_back({e.a, e.distance});
      ++n_strong;
    }
    bool ring = n_strong == sites.size() && strong.size() == sites.size();
    for (auto& [s, nb] : strong) ring = ring && nb.size() == 2;
    if (ring) {
      std::vector<std::size_t> order{sites.front()};
      double total_d = 0.0;
      std::size_t prev = sites.front(), cur = std::min(strong[prev][0].first, strong[prev][1].first);
      total_d += strong[prev][0].first == cur ? strong[prev][0].second : strong[prev][1].second;
      while (cur != sites.front() && order.size() <= sites.size()) {
        order.push_back(cur);
        const auto& nb = strong[cur];
        std::size_t next = nb[0].first == prev ? nb[1].first : nb[0].first;
        total_d += nb[0].first == next ? nb[0].second : nb[1].second;
        prev = cur;
        cur = next;
      }
      if (order.size() == sites.size()) {
        const double n = static_cast<double>(order.size());
        const double side = total_d / n;
        const double radius = side / (2.0 * std::sin(std::numbers::pi / n));
        const double cx = 0.5 * (bx.lo + bx.hi), cy = 0.5 * (by.lo + by.hi);
        std::map<std::size_t, std::vector<double>> pos;
        for (std::size_t k = 0; k < order.size(); ++k) {
          const double th = 2.0 * std::numbers::pi * static_cast<double>(k) / n;
          std::vector<double> p(dims, 0.0);
          p[0] = cx + radius * std::cos(th);
          p[1] = cy + radius * std::sin(th);
          pos[order[k]] = p;
        }
        seeds.push_back(pack(pos));
      }
    }
  }
  return seeds;
}

// Golden-section search over a uniform scale of the site coordinates about
// their centroid; seeds get the right overall size before local refinement.
Eigen::VectorXd best_scaling(const NllsProblem& problem, const Eigen::VectorXd& x0, const LocalSystem& local,
                             const AAIS& aais) {
  std::map<VarIndex, std::size_t> axis_of;
  for (const auto& site : aais.sites()) {
    for (std::size_t k = 0; k < site.coords.size(); ++k) axis_of[site.coords[k]] = k;
  }
  std::vector<std::pair<Eigen::Index, std::size_t>> coords;
  for (std::size_t i = 0; i < local.amplitude_vars.size(); ++i) {
    auto it = axis_of.find(local.amplitude_vars[i]);
    if (it != axis_of.end()) coords.emplace_back(static_cast<Eigen::Index>(i), it->second);
  }
  if (coords.size() < 2) return x0;
  std::vector<double> centroid(3, 0.0), count(3, 0.0);
  for (auto [i, axis] : coords) {
    if (axis >= centroid.size()) return x0;
    centroid[axis] += x0[i];
    count[axis] += 1.0;
  }
  for (std::size_t a = 0; a < 3; ++a) centroid[a] = count[a] > 0 ? centroid[a] / count[a] : 0.0;
  auto scaled = [&](double s) {
    Eigen::VectorXd x = x0;
    std::vector<double> shift(3, 0.0);
    for (auto [i, axis] : coords) x[i] = centroid[axis] + s * (x0[i] - centroid[axis]);
    // Translate back inside the box where scaling pushed past a lower bound.
    for (auto [i, axis] : coords) shift[axis] = std::max(shift[axis], problem.lo[i] - x[i]);
    for (auto [i, axis] : coords) x[i] = std::clamp(x[i] + shift[axis], problem.lo[i], problem.hi[i]);
    return x;
  };
  auto cost = [&](double log_s) {
    Eigen::VectorXd r(problem.n_residuals);
    problem.residuals(scaled(std::exp(log_s)), r, nullptr);
    double c = r.squaredNorm();
    return std::isfinite(c) ? c : kInf;
  };
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = std::log(0.5), b = std::log(2.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = cost(c), fd = cost(d);
  for (int it = 0; it < 60; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = cost(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = cost(d);
    }
  }
  const double best = 0.5 * (a + b);
  return cost(best) < cost(0.0) ? scaled(std::exp(best)) : x0;
}

}  // namespace

double snap_to_resolution(double x, const AmplitudeVariable& var) { return snap_value(x, var); }

std::optional<std::string> geometry_violation(const AAIS& aais, const std::vector<double>& values) {
  const auto& vars = aais.variables();
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (vars[i].kind != VarKind::RuntimeFixed) continue;
    const double slack = 1e-9 * std::max(1.0, std::max(std::abs(vars[i].bounds.lo), std::abs(vars[i].bounds.hi)));
    if (!vars[i].bounds.contains(values[i], slack)) return vars[i].id + " = " + fmt(values[i]) + " is out of bounds";
  }
  const double min_sep = aais.min_separation();
  if (min_sep <= 0.0) return std::nullopt;
  const auto& sites = aais.sites();
  for (std::size_t a = 0; a < sites.size(); ++a) {
    for (std::size_t b = a + 1; b < sites.size(); ++b) {
      if (sites[a].coords.size() != sites[b].coords.size()) continue;
      double d2 = 0.0;
      for (std::size_t k = 0; k < sites[a].coords.size(); ++k) {
        const double diff = values[sites[a].coords[k]] - values[sites[b].coords[k]];
        d2 += diff * diff;
      }
      if (std::sqrt(d2) < min_sep - 1e-9) {
        return "sites " + std::to_string(a) + " and " + std::to_string(b) + " are " + fmt(std::sqrt(d2)) +
               " apart, below the minimum separation " + fmt(min_sep);
      }
    }
  }
  return std::nullopt;
}

FixedSolveResult solve_fixed_vars(const LocalSystem& local, const GlobalLinearSystem& sys, const AAIS& aais,
                                  const Eigen::VectorXd& alpha, double t_sim, const FixedSolveOptions& options) {
  if (!local.has_fixed_vars) throw structural("solve_fixed_vars called on a component without fixed variables");
  if (!(t_sim > 0.0)) throw structural("solve_fixed_vars needs a positive duration");
  const Eigen::VectorXd targets = component_targets(local, alpha);
  const std::vector<double> base = default_values(aais);
  FixedSolveResult out;
  out.t_sim = t_sim;
  const double dt = options.dt_step > 0.0 ? options.dt_step : 0.05 * t_sim;
  std::string last_reason;
  double best_residual = kInf;
  while (true) {
    const double t = out.t_sim;
    const Eigen::VectorXd rates = targets / t;
    auto fit = std::make_shared<ExprFit>();
    fit->exprs = defining_exprs(local, sys);
    fit->targets = rates;
    fit->vars = local.amplitude_vars;
    fit->base = base;
    NllsProblem problem = make_problem(fit, aais);

    std::vector<Eigen::VectorXd> starts = geometric_seeds(local, sys, aais, rates);
    for (auto& seed_x : starts) seed_x = best_scaling(problem, seed_x, local, aais);
    if (static_cast<int>(starts.size()) > options.starts) starts.resize(static_cast<std::size_t>(options.starts));
    const int n_halton = options.starts - static_cast<int>(starts.size());
    for (auto& h : halton_points(problem.lo, problem.hi, n_halton, options.seed)) starts.push_back(std::move(h));

    struct Candidate {
      double cost;
      std::size_t index;
      Eigen::VectorXd x;
    };
    std::vector<Candidate> candidates;
    for (std::size_t i = 0; i < starts.size(); ++i) {
      NllsOptions lm;
      for (const auto& c : candidates) {
        lm.abandon_above = std::min(lm.abandon_above, 10.0 * c.cost);
        lm.abandon_early_above = std::min(lm.abandon_early_above, 1e4 * c.cost);
      }
      NllsResult r = solve_bounded_lm(problem, starts[i], lm);
      if (std::isfinite(r.cost)) candidates.push_back({r.cost, i, std::move(r.x)});
    }
    if (candidates.empty()) {
      throw numerical_failure("component " + std::to_string(local.component_id) +
                              ": no multi-start produced a finite residual");
    }
    // Lowest cost first; starts whose cost is within roundoff of the best keep
    // their start order so the seeded geometries win ties.
    double best_cost = kInf;
    for (const auto& c : candidates) best_cost = std::min(best_cost, c.cost);
    const double tie = best_cost * (1.0 + 1e-9) + 1e-300;
    std::stable_sort(candidates.begin(), candidates.end(), [tie](const Candidate& a, const Candidate& b) {
      const bool ta = a.cost <= tie, tb = b.cost <= tie;
      if (ta != tb) return ta;
      return ta ? false : a.cost < b.cost;
    });
    for (const auto& c : candidates) {
      std::vector<double> values = base;
      for (std::size_t i = 0; i < local.amplitude_vars.size(); ++i) {
        VarIndex v = local.amplitude_vars[i];
        double x = c.x[static_cast<Eigen::Index>(i)];
        if (aais.variable(v).kind == VarKind::RuntimeFixed) x = snap_value(x, aais.variable(v));
        values[v] = x;
      }
      // Only this component's sites are placed; others stay at defaults, so
      // check separation on a copy that parks them out of the way.
      std::vector<double> probe = values;
      std::set<VarIndex> mine(local.amplitude_vars.begin(), local.amplitude_vars.end());
      bool foreign = false;
      for (const auto& site : aais.sites()) {
        for (VarIndex v : site.coords) foreign = foreign || !mine.count(v);
      }
      std::optional<std::string> bad;
      if (!foreign) {
        bad = geometry_violation(aais, probe);
      } else {
        for (std::size_t i = 0; i < aais.variables().size() && !bad; ++i) {
          const auto& var = aais.variable(static_cast<VarIndex>(i));
          if (mine.count(static_cast<VarIndex>(i)) && var.kind == VarKind::RuntimeFixed &&
              !var.bounds.contains(values[i], 1e-9)) {
            bad = var.id + " out of bounds";
          }
        }
      }
      if (bad) {
        last_reason = *bad;
        continue;
      }
      out.solution.component_id = local.component_id;
      out.solution.time_case = TimeCase::Fixed;
      for (VarIndex v : local.amplitude_vars) out.solution.values[v] = values[v];
      out.solution.t_min = t;
      out.solution.residual_l1 = component_residual(local, sys, values, t, targets);
      return out;
    }
    best_residual = std::min(best_residual, std::sqrt(2.0 * candidates.front().cost));
    const double next = t + dt;
    if (next > options.t_max * (1.0 + 1e-12)) {
      throw infeasible("component " + std::to_string(local.component_id) + ": no admissible geometry up to t = " +
                       fmt(t) + " us (limit " + fmt(options.t_max) + "); last violation: " + last_reason);
    }
    out.log.push_back("component " + std::to_string(local.component_id) + ": geometry inadmissible at t = " + fmt(t) +
                      " us (" + last_reason + "); raising t to " + fmt(next) + " us");
    out.t_sim = next;
    ++out.relaxations;
  }
}

namespace {

Eigen::SparseMatrix<double> select_columns(const Eigen::SparseMatrix<double>& m, const std::vector<std::size_t>& cols) {
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t j = 0; j < cols.size(); ++j) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(m, static_cast<Eigen::Index>(cols[j])); it; ++it) {
      trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(j), it.value());
    }
  }
  Eigen::SparseMatrix<double> out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

// min ||A d + r||_1 by iteratively reweighted least squares.
Eigen::VectorXd irls_l1(const Eigen::SparseMatrix<double>& a, const Eigen::VectorXd& r, Eigen::VectorXd d) {
  Eigen::VectorXd best = d;
  double best_obj = (a * d + r).lpNorm<1>();
  const double eta = 1e-12 * std::max(1.0, r.lpNorm<Eigen::Infinity>());
  for (int it = 0; it < 60; ++it) {
    Eigen::VectorXd res = a * d + r;
    Eigen::VectorXd w = res.cwiseAbs().cwiseMax(eta).cwiseInverse().cwiseSqrt();
    Eigen::SparseMatrix<double> wa = w.asDiagonal() * a;
    Eigen::VectorXd next = min_norm_lstsq(wa, -(w.cwiseProduct(r)));
    double obj = (a * next + r).lpNorm<1>();
    if (obj < best_obj) {
      best_obj = obj;
      best = next;
    }
    if ((next - d).lpNorm<Eigen::Infinity>() <= 1e-14 * std::max(1.0, d.lpNorm<Eigen::Infinity>())) break;
    d = std::move(next);
  }
  return best;
}

double total_error(const GlobalLinearSystem& sys, std::span<const SegmentState> segments,
                   std::span<const Eigen::VectorXd> rhs) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(sys.rows());
  for (const auto& r : rhs) b += r;
  return (achieved_vector(segments, sys) - b).lpNorm<1>();
}

}  // namespace

RefineResult refine(const GlobalLinearSystem& sys, const AAIS& aais, std::span<const LocalSystem> components,
                    std::span<const Eigen::VectorXd> rhs_per_segment, std::vector<SegmentState> segments, bool l1,
                    std::uint64_t seed) {
  RefineResult out;
  out.error_before = total_error(sys, segments, rhs_per_segment);
  out.error_after = out.error_before;
  std::vector<std::size_t> dyn_cols;
  std::vector<const LocalSystem*> dyn_comps;
  for (const auto& c : components) {
    if (c.has_fixed_vars || c.amplitude_vars.empty()) continue;
    dyn_comps.push_back(&c);
    dyn_cols.insert(dyn_cols.end(), c.synth_vars.begin(), c.synth_vars.end());
  }
  std::sort(dyn_cols.begin(), dyn_cols.end());
  if (dyn_cols.empty()) {
    out.segments = std::move(segments);
    out.log.push_back("refine: no dynamic columns; schedule unchanged");
    return out;
  }
  const Eigen::SparseMatrix<double> mc = select_columns(sys.matrix, dyn_cols);

  std::vector<Eigen::VectorXd> alpha(segments.size()), delta(segments.size());
  bool any = false;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    alpha[s] = synthesized_values(segments[s], sys);
    const Eigen::VectorXd r = sys.matrix * alpha[s] - rhs_per_segment[s];
    delta[s] = min_norm_lstsq(mc, -r);
    if (l1) delta[s] = irls_l1(mc, r, delta[s]);
    const double scale = std::max(1.0, alpha[s].lpNorm<Eigen::Infinity>());
    if (delta[s].lpNorm<Eigen::Infinity>() > 1e-15 * scale) any = true;
  }
  if (!any) {
    out.segments = std::move(segments);
    out.log.push_back("refine: residual already outside the reach of dynamic columns; schedule unchanged");
    return out;
  }
  for (double step : {1.0, 0.5, 0.25}) {
    std::vector<SegmentState> trial = segments;
    for (std::size_t s = 0; s < segments.size(); ++s) {
      Eigen::VectorXd a = alpha[s];
      for (std::size_t j = 0; j < dyn_cols.size(); ++j) {
        a[static_cast<Eigen::Index>(dyn_cols[j])] += step * delta[s][static_cast<Eigen::Index>(j)];
      }
      for (const LocalSystem* c : dyn_comps) {
        LocalSolution sol = resolve_dynamic(*c, sys, aais, a, trial[s].t, seed + c->component_id, true);
        for (auto& [v, x] : sol.values) trial[s].values[v] = x;
      }
    }
    const double e = total_error(sys, trial, rhs_per_segment);
    if (e <= out.error_before) {
      out.segments = std::move(trial);
      out.applied = true;
      out.error_after = e;
      out.log.push_back("refine: step " + fmt(step) + " lowered E from " + fmt(out.error_before) + " to " + fmt(e));
      return out;
    }
    out.log.push_back("refine: step " + fmt(step) + " would raise E from " + fmt(out.error_before) + " to " + fmt(e));
  }
  out.segments = std::move(segments);
  out.log.push_back("refine: rolled back; schedule unchanged with E = " + fmt(out.error_before));
  return out;
}

CompilationReport build_report(const GlobalLinearSystem& sys, std::span<const LocalSystem> components,
                               std::span<const SegmentState> segments, std::span<const Eigen::VectorXd> alpha_star,
                               std::span<const Eigen::VectorXd> rhs_per_segment, std::span<const double> eps1) {
  CompilationReport r;
  r.term_index = sys.term_index;
  r.b_sim = achieved_vector(segments, sys);
  r.b_tar = Eigen::VectorXd::Zero(sys.rows());
  for (const auto& b : rhs_per_segment) r.b_tar += b;
  auto m = error_metrics(r.b_sim, r.b_tar);
  r.error_l1 = m.error_l1;
  r.relative_error_pct = m.relative_pct;
  for (double e : eps1) r.eps1 += e;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const Eigen::VectorXd a = synthesized_values(segments[s], sys);
    for (const auto& c : components) {
      double e2 = 0.0;
      for (std::size_t j : c.synth_vars) {
        e2 += std::abs(a[static_cast<Eigen::Index>(j)] - alpha_star[s][static_cast<Eigen::Index>(j)]);
      }
      r.eps2.push_back(e2);
    }
    r.t_machine_total += segments[s].t;
  }
  r.m_norm1 = sys.norm1();
  r.bound = theorem1_bound(r.m_norm1, r.eps1, r.eps2);
  return r;
}

CompileResult compile(const TargetHamiltonian& target, const AAIS& aais, const CompileOptions& options) {
  return compile_piecewise(PiecewiseTarget::from_single(target), aais, options);
}

CompileResult compile_piecewise(const PiecewiseTarget& target, const AAIS& aais_in, const CompileOptions& options) {
  using Clock = std::chrono::steady_clock;
  CompileResult result;
  std::vector<std::pair<std::string, double>> timings;
  std::vector<std::string> warnings;
  auto stage = [&](const char* name, auto&& fn) {
    const auto start = Clock::now();
    try {
      fn();
    } catch (const Error& e) {
      rethrow_with_stage(e, name);
    }
    timings.emplace_back(name, std::chrono::duration<double>(Clock::now() - start).count());
  };

  const std::size_t n_seg = target.segments.size();
  AAIS work;
  std::vector<VarIndex> rep;
  std::vector<SynthesizedVariable> synths;
  stage("extract", [&] {
    if (n_seg == 0) throw invalid_input("target has no segments");
    if (target.n_qubits > aais_in.n_sites()) {
      throw invalid_input("target has " + std::to_string(target.n_qubits) + " qubits but the AAIS has " +
                          std::to_string(aais_in.n_sites()) + " sites");
    }
    if (options.share_groups) {
      std::tie(work, rep) = aais_in.with_shared_groups();
    } else {
      work = aais_in;
      rep.resize(aais_in.variables().size());
      std::iota(rep.begin(), rep.end(), 0);
    }
    synths = extract_synthesized(work);
  });

  GlobalLinearSystem& sys = result.system;
  std::vector<Eigen::VectorXd> rhs(n_seg);
  stage("build_linear", [&] {
    std::vector<PauliString> extra;
    for (const auto& seg : target.segments) {
      for (const auto& t : seg.terms) extra.push_back(t.string);
    }
    sys = build_global_linear(std::move(synths), target.segment_target(0), extra);
    for (std::size_t s = 0; s < n_seg; ++s) rhs[s] = sys.rhs_for(target.segment_target(s));
    std::vector<int> row_nnz(static_cast<std::size_t>(sys.rows()), 0);
    for (Eigen::Index c = 0; c < sys.matrix.outerSize(); ++c) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(sys.matrix, c); it; ++it) {
        if (it.value() != 0.0) ++row_nnz[static_cast<std::size_t>(it.row())];
      }
    }
    for (Eigen::Index i = 0; i < sys.rows(); ++i) {
      bool wanted = false;
      for (const auto& b : rhs) wanted = wanted || b[i] != 0.0;
      if (wanted && row_nnz[static_cast<std::size_t>(i)] == 0) {
        warnings.push_back("no instruction produces term " + sys.term_index[static_cast<std::size_t>(i)].to_string() +
                           "; it stays in the compilation error");
      }
    }
  });

  std::vector<Eigen::VectorXd> alpha(n_seg);
  std::vector<double> eps1(n_seg);
  stage("solve_linear", [&] {
    for (std::size_t s = 0; s < n_seg; ++s) {
      LinearSolution lin = solve_global_linear(sys.matrix, rhs[s]);
      alpha[s] = std::move(lin.alpha_star);
      eps1[s] = lin.residual_l1;
    }
  });

  std::vector<LocalSystem>& comps = result.components;
  std::vector<std::size_t> fixed_ids, dyn_ids;
  stage("components", [&] {
    comps = connected_components(sys.synth_vars, work, &warnings);
    for (std::size_t i = 0; i < comps.size(); ++i) (comps[i].has_fixed_vars ? fixed_ids : dyn_ids).push_back(i);
  });

  // Reference segment: smallest L-infinity norm of the fixed-variable targets.
  std::size_t ref = 0;
  {
    double best = kInf;
    for (std::size_t s = 0; s < n_seg; ++s) {
      double norm = 0.0;
      for (std::size_t c : fixed_ids) {
        for (std::size_t j : comps[c].synth_vars) norm = std::max(norm, std::abs(alpha[s][static_cast<Eigen::Index>(j)]));
      }
      if (norm < best) {
        best = norm;
        ref = s;
      }
    }
  }

  auto dynamic_min_times = [&](std::size_t s) {
    std::vector<LocalSolution> sols(dyn_ids.size());
    parallel_for(dyn_ids.size(), options.threads, [&](std::size_t i) {
      const auto& c = comps[dyn_ids[i]];
      sols[i] = local_min_time(c, sys, work, alpha[s], options.seed + c.component_id);
    });
    return sols;
  };

  std::vector<std::vector<LocalSolution>> min_times(n_seg);
  double t0 = 0.0;
  stage("local_min_time", [&] { min_times[ref] = dynamic_min_times(ref); });
  stage("choose_t_sim", [&] {
    t0 = choose_t_sim(min_times[ref]);
    const double t_max = aais_in.t_machine_max().value_or(kInf);
    if (t0 > t_max * (1.0 + 1e-12)) {
      throw infeasible("bottleneck time " + fmt(t0) + " us exceeds the machine limit " + fmt(t_max) + " us");
    }
  });

  std::vector<SegmentState> states(n_seg);
  const std::vector<double> defaults = default_values(work);
  double t_ref = t0;
  stage("solve_fixed_vars", [&] {
    FixedSolveOptions fo;
    fo.dt_step = options.dt_step.value_or(0.05 * t0);
    if (!(fo.dt_step > 0.0)) throw invalid_input("dt_step must be positive");
    fo.t_max = aais_in.t_machine_max().value_or(10.0 * t0);
    std::vector<double> values = defaults;
    bool settled = fixed_ids.empty();
    while (!settled) {
      settled = true;
      for (std::size_t c : fixed_ids) {
        fo.seed = options.seed + comps[c].component_id;
        FixedSolveResult fr = solve_fixed_vars(comps[c], sys, work, alpha[ref], t_ref, fo);
        for (auto& line : fr.log) warnings.push_back(line);
        for (auto& [v, x] : fr.solution.values) values[v] = x;
        if (fr.t_sim > t_ref) {
          t_ref = fr.t_sim;
          settled = fixed_ids.size() == 1;
          if (!settled) break;  // re-solve every fixed component at the raised time
        }
      }
    }
    states[ref].values = values;
    states[ref].t = t_ref;
  });

  stage("resolve_dynamic", [&] {
    // Durations of the other segments follow from the shared fixed values.
    std::vector<std::size_t> fixed_cols;
    for (std::size_t c : fixed_ids) fixed_cols.insert(fixed_cols.end(), comps[c].synth_vars.begin(), comps[c].synth_vars.end());
    std::vector<double> rate(fixed_cols.size());
    for (std::size_t k = 0; k < fixed_cols.size(); ++k) rate[k] = sys.synth_vars[fixed_cols[k]].defining_expr.evaluate(states[ref].values);
    for (std::size_t s = 0; s < n_seg; ++s) {
      if (s == ref) continue;
      min_times[s] = dynamic_min_times(s);
      double num = 0.0, den = 0.0;
      bool same = true;
      for (std::size_t k = 0; k < fixed_cols.size(); ++k) {
        const double a = alpha[s][static_cast<Eigen::Index>(fixed_cols[k])];
        same = same && a == alpha[ref][static_cast<Eigen::Index>(fixed_cols[k])];
        num += rate[k] * a;
        den += rate[k] * rate[k];
      }
      double t = 0.0;
      if (!fixed_cols.empty()) t = same ? t_ref : (den > 0.0 ? std::max(num / den, 0.0) : 0.0);
      for (const auto& m : min_times[s]) t = std::max(t, m.t_min);
      states[s].t = t > 0.0 ? t : kMinScheduleDuration;
      states[s].values = states[ref].values;
    }
    for (std::size_t s = 0; s < n_seg; ++s) {
      std::vector<LocalSolution> sols(dyn_ids.size());
      parallel_for(dyn_ids.size(), options.threads, [&](std::size_t i) {
        const auto& c = comps[dyn_ids[i]];
        sols[i] = resolve_dynamic(c, sys, work, alpha[s], states[s].t, options.seed + c.component_id);
      });
      for (const auto& sol : sols) {
        for (auto& [v, x] : sol.values) states[s].values[v] = x;
      }
      // Dynamic variables inside fixed components follow their segment with
      // the fixed values frozen.
      if (s == ref) continue;
      for (std::size_t c : fixed_ids) {
        std::vector<VarIndex> dyn_vars;
        for (VarIndex v : comps[c].amplitude_vars) {
          if (work.variable(v).kind == VarKind::RuntimeDynamic) dyn_vars.push_back(v);
        }
        if (dyn_vars.empty()) continue;
        NllsResult r = fit_at_time(comps[c], sys, work, component_targets(comps[c], alpha[s]), states[s].t,
                                   states[s].values, dyn_vars, {}, options.seed + comps[c].component_id, 7);
        for (std::size_t i = 0; i < dyn_vars.size(); ++i) states[s].values[dyn_vars[i]] = r.x[static_cast<Eigen::Index>(i)];
      }
    }
    double total = 0.0;
    for (const auto& st : states) total += st.t;
    if (auto t_max = aais_in.t_machine_max(); t_max && total > *t_max * (1.0 + 1e-12)) {
      throw infeasible("total machine time " + fmt(total) + " us exceeds the limit " + fmt(*t_max) + " us");
    }
    // Share-group members take their representative's value.
    for (auto& st : states) {
      for (std::size_t v = 0; v < rep.size(); ++v) st.values[v] = st.values[rep[v]];
    }
  });

  double error_before = 0.0;
  bool refined = false;
  stage("refine", [&] {
    if (!options.refine) return;
    RefineResult rr = refine(sys, work, comps, rhs, states, options.refine_l1, options.seed);
    // A successful pass is reported through refined/error_before_refine.
    if (!rr.applied && !rr.log.empty() && rr.log.back().find("rolled back") != std::string::npos) {
      warnings.push_back(rr.log.back());
    }
    error_before = rr.error_before;
    refined = rr.applied;
    states = std::move(rr.segments);
    for (auto& st : states) {
      for (std::size_t v = 0; v < rep.size(); ++v) st.values[v] = st.values[rep[v]];
    }
  });

  stage("report", [&] {
    result.schedule = make_schedule(aais_in, target.unit, states);
    result.schedule.target_name = target.name;
    // Report on exactly what was written, after unit conversion.
    const auto written = internal_state(result.schedule, aais_in);
    result.report = build_report(sys, comps, written, alpha, rhs, eps1);
    result.report.refined = refined;
    result.report.error_before_refine = refined ? error_before : result.report.error_l1;
    if (result.report.error_l1 > result.report.bound + 1e-7) {
      throw structural("error " + fmt(result.report.error_l1) + " exceeds the theoretical bound " +
                       fmt(result.report.bound));
    }
  });
  result.report.stage_timings = std::move(timings);
  result.report.warnings = std::move(warnings);
  return result;
}

}  // namespace aqc
