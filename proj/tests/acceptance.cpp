// Acceptance checks. Prints one PASS/FAIL line per criterion, with indented
// detail lines, and exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "aqc/bench.hpp"
#include "aqc/errors.hpp"
#include "aqc/io.hpp"
#include "aqc/solve.hpp"
#include "aqc/verify.hpp"
#include "test_util.hpp"

using namespace aqc;
using namespace aqc::testing;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> details;

  void note(const char* fmt, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    details.emplace_back(buf);
  }
  void require(bool ok, const char* fmt, auto... args) {
    if (!ok) pass = false;
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    details.emplace_back(std::string(ok ? "ok   " : "FAIL ") + buf);
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double value_of(const std::vector<NamedValue>& vs, const std::string& id) {
  for (const auto& v : vs) {
    if (v.id == id) return v.value;
  }
  throw std::runtime_error("missing " + id);
}

bool near_rel(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(std::abs(b), 1e-300); }

std::vector<std::uint32_t> suite_sizes() { return {3, 4, 6, 8, 12}; }

// All suite cells, compiled once and shared by criteria 4, 5 and 8.
struct SuiteCell {
  Model model;
  std::uint32_t n;
  AaisKind kind;
  PiecewiseTarget target;
  AAIS aais;
  std::optional<CompileResult> result;
  std::string error;
};

std::vector<SuiteCell>& suite() {
  static std::vector<SuiteCell> cells = [] {
    std::vector<SuiteCell> out;
    for (AaisKind kind : {AaisKind::Rydberg, AaisKind::Heisenberg}) {
      for (Model m : all_models()) {
        for (std::uint32_t n : suite_sizes()) {
          BenchmarkSpec spec;
          spec.model = m;
          spec.n = n;
          if (m == Model::MISChain) spec.segments = 4;
          SuiteCell c{m, n, kind, generate(spec), {}, std::nullopt, {}};
          c.aais = bench_aais(kind, c.target, m);
          out.push_back(std::move(c));
        }
      }
    }
    for (auto& c : out) {
      try {
        c.result = compile_piecewise(c.target, c.aais);
      } catch (const std::exception& e) {
        c.error = e.what();
      }
    }
    return out;
  }();
  return cells;
}

std::string cell_name(const SuiteCell& c) { return to_string(c.model) + "_" + std::to_string(c.n) + "/" + to_string(c.kind); }

Outcome criterion1() {
  Outcome o;
  CompileOptions opt;
  opt.refine = false;
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = compile(ising_chain_mhz(3), worked_rydberg(3), opt);
  const double secs = seconds_since(t0);
  const auto& seg = res.schedule.segments.at(0);
  o.require(std::abs(seg.t_machine_us - 0.8) < 1e-12, "t_sim = %.15g us (expected 0.8)", seg.t_machine_us);
  const double d[3] = {value_of(seg.dynamic, "Delta_0"), value_of(seg.dynamic, "Delta_1"), value_of(seg.dynamic, "Delta_2")};
  o.require(near_rel(d[0], 2.5, 1e-6) && near_rel(d[1], 5.0, 1e-6) && near_rel(d[2], 2.5, 1e-6),
            "Delta = (%.9g, %.9g, %.9g) MHz", d[0], d[1], d[2]);
  bool rabi_ok = true;
  for (int i = 0; i < 3; ++i) {
    const std::string s = std::to_string(i);
    rabi_ok = rabi_ok && near_rel(value_of(seg.dynamic, "Omega_" + s), 2.5, 1e-6) &&
              std::abs(value_of(seg.dynamic, "phi_" + s)) < 1e-6;
  }
  o.require(rabi_ok, "Omega = 2.5 MHz and phi = 0 on every site");
  const double x0 = value_of(res.schedule.fixed, "x_0"), x1 = value_of(res.schedule.fixed, "x_1"),
               x2 = value_of(res.schedule.fixed, "x_2");
  o.require(std::abs(std::abs(x1 - x0) - 7.46) <= 0.05 && std::abs(std::abs(x2 - x1) - 7.46) <= 0.05,
            "spacing %.4f, %.4f um (expected 7.46 +- 0.05)", std::abs(x1 - x0), std::abs(x2 - x1));
  o.require(secs < 1.0, "compile time %.4f s", secs);
  return o;
}

Outcome criterion2() {
  Outcome o;
  const AAIS a = worked_rydberg(3);
  const auto target =
      TargetHamiltonian::make(3, {{1, zz(0, 1)}, {1, zz(1, 2)}, {1, x(0)}, {1, x(1)}, {1, x(2)}}, 1.0);
  const auto sys = build_global_linear(extract_synthesized(a), target);
  // Hand-built system: alpha1..3 are the (0,1), (1,2), (0,2) pairs, alpha4..6
  // the detunings, then (X, Y) drive factors per site.
  const std::vector<PauliString> rows{zz(0, 1), zz(1, 2), zz(0, 2), z(0), z(1), z(2), x(0), x(1), x(2), y(0), y(1), y(2)};
  const double rhs[12] = {1, 1, 0, 0, 0, 0, 1, 1, 1, 0, 0, 0};
  Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(12, 12);
  for (int i = 0; i < 3; ++i) expect(i, i) = 1;
  expect(3, 0) = expect(3, 2) = -1;
  expect(4, 0) = expect(4, 1) = -1;
  expect(5, 1) = expect(5, 2) = -1;
  for (int i = 3; i < 6; ++i) expect(i, i) = 1;
  for (int k = 0; k < 3; ++k) {
    expect(6 + k, 6 + 2 * k) = 1;
    expect(9 + k, 7 + 2 * k) = 1;
  }
  // Column of each hand-built alpha in our system.
  const std::vector<std::pair<std::string, PauliString>> cols{
      {"vdw_0_1", zz(0, 1)}, {"vdw_1_2", zz(1, 2)},  {"vdw_0_2", zz(0, 2)},    {"detuning_0", z(0)},
      {"detuning_1", z(1)},  {"detuning_2", z(2)},   {"rabi_0", x(0)},         {"rabi_0", y(0)},
      {"rabi_1", x(1)},      {"rabi_1", y(1)},       {"rabi_2", x(2)},         {"rabi_2", y(2)}};
  std::vector<Eigen::Index> col_of;
  for (const auto& [name, s] : cols) {
    for (const auto& v : sys.synth_vars) {
      if (a.instructions()[v.source_instruction].name != name) continue;
      for (const auto& e : v.incidence) {
        if (e.string == s) col_of.push_back(static_cast<Eigen::Index>(v.id));
      }
    }
  }
  if (col_of.size() != 12 || sys.rows() != 12 || sys.cols() != 12) {
    o.require(false, "system shape %ldx%ld", static_cast<long>(sys.rows()), static_cast<long>(sys.cols()));
    return o;
  }
  const Eigen::MatrixXd m(sys.matrix);
  double max_diff = 0.0, rhs_diff = 0.0;
  for (int r = 0; r < 12; ++r) {
    const auto row = *sys.row_of(rows[r]);
    rhs_diff = std::max(rhs_diff, std::abs(sys.rhs(row) - rhs[r]));
    for (int c = 0; c < 12; ++c) max_diff = std::max(max_diff, std::abs(m(row, col_of[c]) - expect(r, c)));
  }
  o.require(max_diff == 0.0 && rhs_diff == 0.0, "M and rhs match the hand-built system (max diff %g, %g)", max_diff,
            rhs_diff);
  const auto sol = solve_global_linear(sys);
  const double want[12] = {1, 1, 0, 1, 2, 1, 1, 0, 1, 0, 1, 0};
  double sol_diff = 0.0;
  for (int c = 0; c < 12; ++c) sol_diff = std::max(sol_diff, std::abs(sol.alpha_star(col_of[c]) - want[c]));
  o.require(sol_diff < 1e-12, "alpha4..6 = (%.15g, %.15g, %.15g), max deviation over all alphas %g",
            sol.alpha_star(col_of[3]), sol.alpha_star(col_of[4]), sol.alpha_star(col_of[5]), sol_diff);
  return o;
}

Outcome criterion3() {
  Outcome o;
  CompileOptions unref;
  unref.refine = false;
  const auto before = compile(ising_chain_mhz(3), worked_rydberg(3), unref);
  const auto after = compile(ising_chain_mhz(3), worked_rydberg(3));
  const auto& sb = before.schedule.segments.at(0).dynamic;
  const auto& sa = after.schedule.segments.at(0).dynamic;
  const char* names[3] = {"Delta_0", "Delta_1", "Delta_2"};
  // Reference shifts. The ends use 2.55. For the middle, the achieved-alpha
  // values (alpha5 = 2.002) give 5.005; the printed 5.01 is that number rounded.
  const double ref_alpha[3] = {2.55, 5.005, 2.55};
  const double ref_printed[3] = {2.55, 5.01, 2.55};
  bool ok = true, ok_printed = true;
  for (int i = 0; i < 3; ++i) {
    const double b = value_of(sb, names[i]), a = value_of(sa, names[i]);
    const double shift = a - b;
    const double want = ref_alpha[i] - b, want_printed = ref_printed[i] - b;
    const bool in = std::abs(shift - want) <= 0.3 * std::abs(want);
    const bool in_printed = std::abs(shift - want_printed) <= 0.3 * std::abs(want_printed);
    ok = ok && in;
    ok_printed = ok_printed && in_printed;
    o.note("%s: %.5f -> %.5f (shift %+.5f; reference shift %+.4f, printed-value shift %+.4f)", names[i], b, a, shift,
           want, want_printed);
  }
  o.require(ok, "refined deltas within 30%% of the reference shifts (alpha-derived middle value 5.005)");
  o.note("against the rounded middle value 5.01: %s", ok_printed ? "within 30%" : "outside 30%");
  o.require(after.report.error_l1 <= before.report.error_l1 + 1e-12, "E before %.6g, after %.6g (relative %.4f%% -> %.4f%%)",
            before.report.error_l1, after.report.error_l1, *before.report.relative_error_pct,
            *after.report.relative_error_pct);

  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> uj(0.5, 1.5), uh(0.2, 1.5), uz(-1.0, 1.0);
  int increases = 0, improved = 0, failed = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    std::vector<WeightedTerm> terms;
    for (std::uint32_t i = 0; i + 1 < 4; ++i) terms.push_back({kTwoPi * uj(rng), zz(i, i + 1)});
    for (std::uint32_t i = 0; i < 4; ++i) terms.push_back({kTwoPi * uh(rng), x(i)});
    for (std::uint32_t i = 0; i < 4; ++i) terms.push_back({kTwoPi * uz(rng), z(i)});
    const auto target = TargetHamiltonian::make(4, terms, 1.0);
    try {
      CompileOptions opt;
      opt.seed = static_cast<std::uint64_t>(t);
      const auto r = compile(target, worked_rydberg(4), opt);
      if (r.report.error_l1 > r.report.error_before_refine + 1e-12) ++increases;
      if (r.report.error_l1 < r.report.error_before_refine) ++improved;
    } catch (const std::exception&) {
      ++failed;
    }
  }
  o.require(increases == 0 && failed == 0, "%d random 4-qubit instances: %d increases, %d improved, %d failed", trials,
            increases, improved, failed);
  return o;
}

Outcome criterion4() {
  Outcome o;
  int checked = 0, violations = 0, failed = 0;
  double worst_margin = -1e300;
  for (const auto& c : suite()) {
    if (!c.result) {
      ++failed;
      o.note("compile failed: %s: %s", cell_name(c).c_str(), c.error.c_str());
      continue;
    }
    ++checked;
    const auto& r = c.result->report;
    worst_margin = std::max(worst_margin, r.error_l1 - r.bound);
    if (r.error_l1 > r.bound + 1e-7) {
      ++violations;
      o.note("violation: %s E=%.6g bound=%.6g", cell_name(c).c_str(), r.error_l1, r.bound);
    }
  }
  o.require(violations == 0 && failed == 0, "%d compilations, %d bound violations, %d failures, max(E - bound) = %.3g",
            checked, violations, failed, worst_margin);
  return o;
}

Outcome criterion5() {
  Outcome o;
  int checked = 0, bad = 0;
  double worst = 0.0;
  for (const auto& c : suite()) {
    if (c.kind != AaisKind::Heisenberg || c.model == Model::MISChain) continue;
    ++checked;
    if (!c.result || !c.result->report.relative_error_pct) {
      ++bad;
      continue;
    }
    const double rel = *c.result->report.relative_error_pct;
    worst = std::max(worst, rel);
    if (!(rel < 1e-9)) ++bad;
  }
  o.require(bad == 0, "%d time-independent Heisenberg compilations, worst relative error %.3g%%", checked, worst);
  return o;
}

Outcome criterion6() {
  Outcome o;
  {
    const std::uint32_t n = 12;
    std::vector<WeightedTerm> terms;
    for (std::uint32_t i = 0; i < n; ++i) terms.push_back({0.157, zz(i, (i + 1) % n)});
    for (std::uint32_t i = 0; i < n; ++i) terms.push_back({0.785, x(i)});
    const auto target = TargetHamiltonian::make(n, terms, 1.0, "ising_cycle_12");
    RydbergLimits lim;
    lim.unit = FrequencyUnit::RadPerUs;
    lim.omega = {0.0, 6.28};
    lim.delta = {-125.7, 125.7};
    lim.position = {0.0, 12.0 * n};
    const auto r = compile(target, build_rydberg_aais(n, 2, lim));
    o.require(std::abs(r.report.t_machine_total - 0.25) <= 1e-6, "12-site cycle: t_machine = %.9f us (expected 0.25)",
              r.report.t_machine_total);
    o.note("12-site cycle relative error %.4f%%", r.report.relative_error_pct.value_or(-1));
  }
  {
    BenchmarkSpec spec;
    spec.model = Model::PXP;
    spec.n = 6;
    spec.unit = FrequencyUnit::RadPerUs;
    spec.params = {{"J", 1.26}, {"h", 0.126}};
    spec.t_target = 20.0;
    const auto target = generate(spec);
    RydbergLimits lim;
    lim.unit = FrequencyUnit::RadPerUs;
    lim.omega = {0.0, 13.8};
    lim.delta = {-125.7, 125.7};
    const auto r = compile_piecewise(target, build_rydberg_aais(6, 1, lim));
    o.require(std::abs(r.report.t_machine_total - 0.3652) <= 1e-3, "6-site PXP: t_machine = %.6f us (expected 0.3652)",
              r.report.t_machine_total);
    o.note("6-site PXP relative error %.4f%%", r.report.relative_error_pct.value_or(-1));
  }
  return o;
}

Outcome criterion7() {
  Outcome o;
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> uj(0.5, 1.5), uh(0.2, 1.5), uz(-1.0, 1.0);
  for (AaisKind kind : {AaisKind::Rydberg, AaisKind::Heisenberg}) {
    int worse = 0, errors = 0, pipeline_better = 0;
    double max_ratio = 0.0;
    for (int t = 0; t < 50; ++t) {
      std::vector<WeightedTerm> terms;
      for (std::uint32_t i = 0; i + 1 < 4; ++i) terms.push_back({kTwoPi * uj(rng), zz(i, i + 1)});
      for (std::uint32_t i = 0; i < 4; ++i) terms.push_back({kTwoPi * uh(rng), x(i)});
      for (std::uint32_t i = 0; i < 4; ++i) terms.push_back({kTwoPi * uz(rng), z(i)});
      const auto target = TargetHamiltonian::make(4, terms, 1.0);
      std::vector<std::pair<std::uint32_t, std::uint32_t>> chain{{0, 1}, {1, 2}, {2, 3}};
      const AAIS a = kind == AaisKind::Rydberg ? worked_rydberg(4, 0.0) : build_heisenberg_aais(4, chain);
      try {
        CompileOptions opt;
        opt.seed = static_cast<std::uint64_t>(t);
        const double e = compile(target, a, opt).report.error_l1;
        const double eb = brute_force_compile(target, a, static_cast<std::uint64_t>(t)).report.error_l1;
        if (e > eb * 1.1 + 1e-6) ++worse;
        if (e < eb) ++pipeline_better;
        if (eb > 1e-9) max_ratio = std::max(max_ratio, e / eb);
      } catch (const std::exception& ex) {
        ++errors;
        o.note("instance %d failed: %s", t, ex.what());
      }
    }
    o.require(worse == 0 && errors == 0, "%s: 50 instances, %d worse than the joint solve, %d strictly better, %d errors, max E ratio %.3f",
              to_string(kind).c_str(), worse, pipeline_better, errors, max_ratio);
  }
  return o;
}

Outcome criterion8() {
  Outcome o;
  struct Case {
    std::string name;
    PiecewiseTarget target;
    const AAIS* aais;
    const CompileResult* result;
  };
  const AAIS worked = worked_rydberg(3);
  const auto worked_target = PiecewiseTarget::from_single(ising_chain_mhz(3));
  const auto worked_res = compile(ising_chain_mhz(3), worked);
  std::vector<Case> cases{{"worked_example", worked_target, &worked, &worked_res}};
  for (const auto& c : suite()) {
    if (c.n > 8 || !c.result || !c.result->report.relative_error_pct) continue;
    if (!(*c.result->report.relative_error_pct < 0.5)) continue;
    cases.push_back({cell_name(c), c.target, &c.aais, &*c.result});
  }
  int below[2] = {0, 0};
  double worst[2] = {1.0, 1.0};
  double max_method_gap = 0.0;
  const char* labels[2] = {"|0...0>", "|+...+>"};
  for (const auto& cs : cases) {
    const std::uint32_t n = cs.target.n_qubits;
    const StateVector init[2] = {zeros_state(n), plus_state(n)};
    for (int s = 0; s < 2; ++s) {
      const double f = fidelity(simulate_schedule(cs.result->schedule, *cs.aais, init[s]), evolve_target(cs.target, init[s]));
      worst[s] = std::min(worst[s], f);
      if (f < 0.999) {
        ++below[s];
        o.note("%s from %s: fidelity %.6f (relative error %.4f%%)", cs.name.c_str(), labels[s], f,
               *cs.result->report.relative_error_pct);
      }
    }
    // Independent propagation of the first segment's Hamiltonian.
    const auto states = internal_state(cs.result->schedule, *cs.aais);
    const auto h = simulator_hamiltonian(*cs.aais, states.at(0).values);
    const StateVector a = evolve(build_dense(h, n), states[0].t, init[1]);
    const StateVector b = evolve_rk4(build_sparse(h, n), states[0].t, init[1]);
    max_method_gap = std::max(max_method_gap, (a - b).norm());
  }
  o.require(below[0] == 0, "%zu compilations from %s: %d below 0.999, worst %.6f", cases.size(), labels[0], below[0],
            worst[0]);
  o.require(below[1] == 0, "%zu compilations from %s: %d below 0.999, worst %.6f", cases.size(), labels[1], below[1],
            worst[1]);
  o.require(max_method_gap <= 1e-6, "eigendecomposition vs RK4 max state difference %.3g", max_method_gap);
  return o;
}

Outcome criterion9() {
  Outcome o;
  const std::vector<std::uint32_t> sizes{20, 40, 60, 80, 100};
  std::vector<double> lx, ly;
  double t100 = 0.0;
  for (std::uint32_t n : sizes) {
    BenchmarkSpec spec;
    spec.model = Model::IsingCycle;
    spec.n = n;
    const auto target = generate(spec);
    const AAIS a = bench_aais(AaisKind::Rydberg, target, spec.model);
    double best = 1e300;
    double rel = 0.0;
    for (int rep = 0; rep < 2; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto r = compile_piecewise(target, a);
      best = std::min(best, seconds_since(t0));
      rel = r.report.relative_error_pct.value_or(-1);
    }
    o.note("n=%u: %.3f s (relative error %.3f%%)", n, best, rel);
    lx.push_back(std::log(static_cast<double>(n)));
    ly.push_back(std::log(best));
    if (n == 100) t100 = best;
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  const double slope = sxy / sxx;
  o.require(t100 < 60.0, "n=100 compiles in %.3f s", t100);
  o.require(slope <= 2.2, "fitted exponent %.3f", slope);
  return o;
}

Outcome criterion10() {
  Outcome o;
  BenchmarkSpec spec;
  spec.model = Model::MISChain;
  spec.n = 6;
  spec.segments = 4;
  const auto target = generate(spec);
  const AAIS a = bench_aais(AaisKind::Rydberg, target, spec.model);
  const auto res = compile_piecewise(target, a);
  const auto states = internal_state(res.schedule, a);
  o.require(states.size() == 4, "%zu segments", states.size());
  int out_of_bounds = 0;
  for (const auto& st : states) {
    for (std::size_t i = 0; i < st.values.size(); ++i) {
      const auto& v = a.variable(i);
      if (v.kind == VarKind::RuntimeDynamic && !v.bounds.contains(st.values[i], 1e-9 * std::max(1.0, std::abs(v.bounds.hi))))
        ++out_of_bounds;
    }
  }
  o.require(out_of_bounds == 0, "dynamic values out of bounds: %d", out_of_bounds);
  bool fixed_shared = true;
  for (std::size_t i = 0; i < a.variables().size(); ++i) {
    if (a.variable(i).kind != VarKind::RuntimeFixed) continue;
    for (const auto& st : states) fixed_shared = fixed_shared && st.values[i] == states[0].values[i];
  }
  o.require(fixed_shared, "fixed positions identical in every segment");
  // Per segment: the achieved phases under the shared positions reproduce the
  // segment's target, and the per-segment errors add up to the reported E.
  double sum = 0.0;
  bool seg_ok = true;
  for (std::size_t k = 0; k < states.size(); ++k) {
    const Eigen::VectorXd b_sim = achieved_vector(std::span(&states[k], 1), res.system);
    const Eigen::VectorXd b_tar = res.system.rhs_for(target.segment_target(k));
    const auto m = error_metrics(b_sim, b_tar);
    sum += m.error_l1;
    const bool ok = m.relative_pct && *m.relative_pct < 5.0 && states[k].t > 0.0;
    seg_ok = seg_ok && ok;
    o.note("segment %zu: t_machine %.5f us, E %.5g, relative %.4f%%", k, states[k].t, m.error_l1,
           m.relative_pct.value_or(-1));
  }
  o.require(seg_ok, "every segment reproduces its target within 5%% relative error");
  o.require(std::abs(sum - res.report.error_l1) <= 1e-9 * std::max(1.0, sum), "sum of segment errors %.9g vs reported E %.9g",
            sum, res.report.error_l1);

  spec.segments = 1;
  const auto single = generate(spec);
  const auto pw = compile_piecewise(single, a);
  const auto direct = compile(single.segment_target(0), a);
  const std::string j1 = schedule_to_json(pw.schedule, &pw.report), j2 = schedule_to_json(direct.schedule, &direct.report);
  o.require(j1 == j2, "segments=1 piecewise output is byte-identical to the single-segment compile");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"golden worked example", criterion1},
      {"linear-system fixture", criterion2},
      {"refinement", criterion3},
      {"error bound on the suite", criterion4},
      {"Heisenberg exactness", criterion5},
      {"time-compression closed forms", criterion6},
      {"oracle equivalence", criterion7},
      {"dynamics validation", criterion8},
      {"scaling", criterion9},
      {"piecewise", criterion10},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome out;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out.require(false, "exception: %s", e.what());
    }
    if (!out.pass) ++failures;
    std::printf("criterion %zu %s: %s (%.1f s)\n", i + 1, out.pass ? "PASS" : "FAIL", criteria[i].first,
                seconds_since(t0));
    for (const auto& d : out.details) std::printf("    %s\n", d.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
