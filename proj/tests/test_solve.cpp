#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>

#include "aqc/errors.hpp"
#include "aqc/solve.hpp"
#include "test_util.hpp"

using namespace aqc;
using namespace aqc::testing;

namespace {

double value_of(const std::vector<NamedValue>& vs, const std::string& id) {
  for (const auto& v : vs) {
    if (v.id == id) return v.value;
  }
  throw std::runtime_error("missing " + id);
}

CompileOptions no_refine() {
  CompileOptions o;
  o.refine = false;
  return o;
}

}  // namespace

TEST_CASE("worked example before refinement") {
  const AAIS a = worked_rydberg(3);
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = compile(ising_chain_mhz(3), a, no_refine());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs < 1.0);
  REQUIRE(res.schedule.segments.size() == 1);
  CHECK(res.schedule.unit == FrequencyUnit::MHz);
  const auto& seg = res.schedule.segments[0];
  CHECK(seg.t_machine_us == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(value_of(seg.dynamic, "Delta_0") == doctest::Approx(2.5).epsilon(1e-6));
  CHECK(value_of(seg.dynamic, "Delta_1") == doctest::Approx(5.0).epsilon(1e-6));
  CHECK(value_of(seg.dynamic, "Delta_2") == doctest::Approx(2.5).epsilon(1e-6));
  for (int i = 0; i < 3; ++i) {
    const std::string s = std::to_string(i);
    CHECK(value_of(seg.dynamic, "Omega_" + s) == doctest::Approx(2.5).epsilon(1e-6));
    CHECK(std::abs(value_of(seg.dynamic, "phi_" + s)) < 1e-6);
  }
  const double x0 = value_of(res.schedule.fixed, "x_0");
  const double x1 = value_of(res.schedule.fixed, "x_1");
  const double x2 = value_of(res.schedule.fixed, "x_2");
  CHECK(std::abs(std::abs(x1 - x0) - 7.46) <= 0.05);
  CHECK(std::abs(std::abs(x2 - x1) - 7.46) <= 0.05);
  CHECK(res.report.error_l1 <= res.report.bound + 1e-7);
  CHECK_FALSE(res.report.refined);
}

TEST_CASE("worked example refinement lowers the error") {
  const AAIS a = worked_rydberg(3);
  const auto res = compile(ising_chain_mhz(3), a);
  const auto& seg = res.schedule.segments[0];
  CHECK(res.report.error_l1 <= res.report.error_before_refine + 1e-12);
  CHECK(res.report.error_l1 <= res.report.bound + 1e-7);
  // The ends move up from 2.5 and the middle stays near 5.
  CHECK(value_of(seg.dynamic, "Delta_0") > 2.5);
  CHECK(value_of(seg.dynamic, "Delta_0") == doctest::Approx(value_of(seg.dynamic, "Delta_2")).epsilon(1e-6));
  CHECK(value_of(seg.dynamic, "Delta_1") == doctest::Approx(5.0).epsilon(0.01));
}

TEST_CASE("component time cases on the worked example") {
  const AAIS a = worked_rydberg(3);
  const auto target = ising_chain_mhz(3);
  const auto sys = build_global_linear(extract_synthesized(a), target);
  auto comps = connected_components(sys.synth_vars, a);
  const auto lin = solve_global_linear(sys);
  assign_targets(comps, lin.alpha_star);
  std::vector<LocalSolution> sols;
  for (const auto& c : comps) {
    if (c.has_fixed_vars) continue;
    sols.push_back(local_min_time(c, sys, a, lin.alpha_star));
    const auto& s = sols.back();
    const std::string first = a.variable(c.amplitude_vars.front()).id;
    if (first.rfind("Delta_", 0) == 0) {
      CHECK(s.time_case == TimeCase::Linear);
      const double expect = first == "Delta_1" ? 0.2 : 0.1;
      CHECK(s.t_min == doctest::Approx(expect).epsilon(1e-12));
    } else {
      CHECK(s.t_min == doctest::Approx(0.8).epsilon(1e-9));
    }
  }
  CHECK(sols.size() == 6);
  CHECK(choose_t_sim(sols) == doctest::Approx(0.8).epsilon(1e-9));
  CHECK(choose_t_sim({}) == kMinScheduleDuration);
}

TEST_CASE("compilation is deterministic for a seed") {
  const AAIS a = worked_rydberg(4);
  const auto target = ising_chain_mhz(4, 1.0, 0.7);
  CompileOptions o;
  o.seed = 3;
  const auto r1 = compile(target, a, o);
  const auto r2 = compile(target, a, o);
  CHECK(r1.schedule == r2.schedule);
  CHECK(r1.report.error_l1 == r2.report.error_l1);
  o.threads = 1;
  const auto r3 = compile(target, a, o);
  CHECK(r1.schedule == r3.schedule);
}

TEST_CASE("error never exceeds the bound and refinement is monotone") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> uj(0.5, 1.5), uh(0.2, 1.5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto target = ising_chain_mhz(4, uj(rng), uh(rng));
    const auto res = compile(target, worked_rydberg(4, 0.0));
    CHECK(res.report.error_l1 <= res.report.bound + 1e-7);
    CHECK(res.report.error_l1 <= res.report.error_before_refine + 1e-12);
  }
}

TEST_CASE("Heisenberg device reproduces the chain exactly") {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges{{0, 1}, {1, 2}};
  const auto res = compile(ising_chain_mhz(3), build_heisenberg_aais(3, edges));
  CHECK(res.report.error_l1 < 1e-9);
  CHECK(res.schedule.segments[0].t_machine_us == doctest::Approx(0.2));
}

TEST_CASE("infeasible when the duration exceeds the device limit") {
  RydbergLimits lim;
  lim.t_machine_max = 0.5;
  const AAIS a = build_rydberg_aais(3, 1, lim);
  try {
    compile(ising_chain_mhz(3), a);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Infeasible);
  }
}

TEST_CASE("share groups force one detuning for every site") {
  CompileOptions o;
  o.share_groups = true;
  const auto res = compile(ising_chain_mhz(3), worked_rydberg(3), o);
  const auto& dyn = res.schedule.segments[0].dynamic;
  CHECK(value_of(dyn, "Delta_0") == value_of(dyn, "Delta_1"));
  CHECK(value_of(dyn, "Delta_1") == value_of(dyn, "Delta_2"));
  CHECK(res.report.error_l1 <= res.report.bound + 1e-7);
}

TEST_CASE("zero target compiles to the minimum duration") {
  const auto target = TargetHamiltonian::make(2, {}, 1.0);
  const auto res = compile(target, worked_rydberg(2));
  CHECK(res.schedule.total_time() == doctest::Approx(kMinScheduleDuration));
}

TEST_CASE("snapping and geometry checks") {
  const AAIS a = worked_rydberg(3);
  const auto& xv = a.variable(a.index_of("x_1"));
  CHECK(snap_to_resolution(7.463, xv) == doctest::Approx(7.46));
  CHECK(snap_to_resolution(-1.0, xv) == 0.0);
  CHECK(snap_to_resolution(1000.0, xv) == xv.bounds.hi);
  std::vector<double> v(a.variables().size(), 0.0);
  v[a.index_of("x_1")] = 7.0;
  v[a.index_of("x_2")] = 14.0;
  CHECK_FALSE(geometry_violation(a, v).has_value());
  v[a.index_of("x_2")] = 9.0;
  CHECK(geometry_violation(a, v).has_value());
}
