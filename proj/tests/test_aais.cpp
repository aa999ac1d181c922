#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "aqc/aais.hpp"
#include "aqc/errors.hpp"
#include "test_util.hpp"

using namespace aqc;
using namespace aqc::testing;

namespace {
const Instruction& find_instruction(const AAIS& a, const std::string& name) {
  for (const auto& ins : a.instructions()) {
    if (ins.name == name) return ins;
  }
  throw std::runtime_error("no instruction " + name);
}

const Effect& effect_on(const Instruction& ins, const PauliString& s) {
  for (const auto& e : ins.effects) {
    if (e.string == s) return e;
  }
  throw std::runtime_error("no effect " + s.to_string());
}
}  // namespace

TEST_CASE("Rydberg preset structure") {
  for (std::uint32_t n : {1u, 2u, 3u, 6u}) {
    const AAIS a = build_rydberg_aais(n, 1);
    std::size_t vdw = 0, det = 0, rabi = 0;
    for (const auto& ins : a.instructions()) {
      if (ins.name.rfind("vdw_", 0) == 0) ++vdw;
      if (ins.name.rfind("detuning_", 0) == 0) ++det;
      if (ins.name.rfind("rabi_", 0) == 0) ++rabi;
      for (const auto& e : ins.effects) CHECK_FALSE(e.string.is_identity());
    }
    CHECK(vdw == n * (n - 1) / 2);
    CHECK(det == n);
    CHECK(rabi == n);
  }
  CHECK_THROWS_AS(build_rydberg_aais(0, 1), Error);
}

TEST_CASE("Van der Waals effects share one expression with ratios -1, -1, +1") {
  const AAIS a = build_rydberg_aais(3, 1);
  std::vector<double> v(a.variables().size(), 0.0);
  v[a.index_of("x_0")] = 0.0;
  v[a.index_of("x_1")] = 7.46;
  v[a.index_of("x_2")] = 14.92;
  const auto& ins = find_instruction(a, "vdw_0_1");
  const double zz01 = effect_on(ins, zz(0, 1)).expr.evaluate(v);
  CHECK(effect_on(ins, z(0)).expr.evaluate(v) / zz01 == -1.0);
  CHECK(effect_on(ins, z(1)).expr.evaluate(v) / zz01 == -1.0);
  // C6 / (4 d^6) at d = 7.46 is about 1.25 MHz.
  CHECK(zz01 / kTwoPi == doctest::Approx(1.25).epsilon(2e-3));
  const double expect = 862690.0 / (4.0 * std::pow(7.46, 6));
  CHECK(zz01 / kTwoPi == doctest::Approx(expect).epsilon(1e-12));
  // Sixth-power law between neighbours and next neighbours.
  const double zz02 = effect_on(find_instruction(a, "vdw_0_2"), zz(0, 2)).expr.evaluate(v);
  CHECK(zz02 * 64.0 == doctest::Approx(zz01).epsilon(1e-12));
}

TEST_CASE("Rydberg detuning and Rabi effects") {
  const AAIS a = build_rydberg_aais(1, 1);
  CHECK(a.instructions().size() == 2);
  std::vector<double> v(a.variables().size(), 0.0);
  v[a.index_of("Delta_0")] = 3.0;
  v[a.index_of("Omega_0")] = 2.0;
  v[a.index_of("phi_0")] = std::numbers::pi / 2;
  CHECK(effect_on(find_instruction(a, "detuning_0"), z(0)).expr.evaluate(v) == 1.5);
  const auto& rabi = find_instruction(a, "rabi_0");
  CHECK(effect_on(rabi, x(0)).expr.evaluate(v) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(effect_on(rabi, y(0)).expr.evaluate(v) == doctest::Approx(-1.0));
  const auto& om = a.variable(a.index_of("Omega_0"));
  CHECK(om.time_critical);
  CHECK(om.bounds.hi == doctest::Approx(2.5 * kTwoPi));
  CHECK_FALSE(a.variable(a.index_of("phi_0")).time_critical);
  CHECK(a.variable(a.index_of("Delta_0")).time_critical);
  CHECK(a.variable(a.index_of("x_0")).kind == VarKind::RuntimeFixed);
}

TEST_CASE("Heisenberg preset structure") {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> one{{0, 1}};
  const AAIS two = build_heisenberg_aais(2, one);
  CHECK(two.instructions().size() == 9);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> chain{{0, 1}, {1, 2}};
  const AAIS three = build_heisenberg_aais(3, chain);
  CHECK(three.find("a_XX_0_1").has_value());
  CHECK(three.find("a_XX_1_2").has_value());
  CHECK_FALSE(three.find("a_XX_0_2").has_value());
  for (const auto& ins : three.instructions()) {
    REQUIRE(ins.effects.size() == 1);
    CHECK(ins.effects[0].expr.kind() == Expr::Kind::Var);
  }
  for (const auto& v : three.variables()) {
    CHECK(v.kind == VarKind::RuntimeDynamic);
    CHECK(v.time_critical);
  }
  std::vector<std::pair<std::uint32_t, std::uint32_t>> bad{{0, 3}};
  CHECK_THROWS_AS(build_heisenberg_aais(3, bad), Error);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> loop{{1, 1}};
  CHECK_THROWS_AS(build_heisenberg_aais(3, loop), Error);
}

TEST_CASE("AAIS validation") {
  AmplitudeVariable a{"a", VarKind::RuntimeDynamic, true, {0, 1}, Quantity::Frequency, std::nullopt, 0.0};
  CHECK_THROWS_AS(AAIS::make(1, {a, a}, {}), Error);
  AmplitudeVariable bad = a;
  bad.bounds = {2, 1};
  CHECK_THROWS_AS(AAIS::make(1, {bad}, {}), Error);
  AmplitudeVariable fixed_tc = a;
  fixed_tc.kind = VarKind::RuntimeFixed;
  CHECK_THROWS_AS(AAIS::make(1, {fixed_tc}, {}), Error);
  Instruction outside{"i", {{Expr::var(0), x(3)}}, {}};
  CHECK_THROWS_AS(AAIS::make(1, {a}, {outside}), Error);
}

TEST_CASE("share groups collapse onto one representative") {
  const AAIS a = build_rydberg_aais(3, 1);
  auto [reduced, rep] = a.with_shared_groups();
  CHECK(rep[a.index_of("Delta_2")] == rep[a.index_of("Delta_0")]);
  CHECK(rep[a.index_of("x_2")] != rep[a.index_of("x_0")]);
  const VarIndex d0 = a.index_of("Delta_0"), d2 = a.index_of("Delta_2");
  for (const auto& ins : reduced.instructions()) {
    CHECK(ins.variables.count(d2) == 0);
    if (ins.name == "detuning_2") CHECK(ins.variables.count(d0) == 1);
  }
}

TEST_CASE("simulator Hamiltonian expansion") {
  const AAIS a = build_rydberg_aais(2, 1);
  std::vector<double> v(a.variables().size(), 0.0);
  v[a.index_of("x_0")] = 0.0;
  v[a.index_of("x_1")] = 10.0;
  v[a.index_of("Delta_0")] = 2.0;
  const auto terms = simulator_hamiltonian(a, v);
  const double j = c6_internal() / (4.0 * 1e6);
  bool saw_zz = false, saw_z0 = false;
  for (const auto& t : terms) {
    if (t.string == zz(0, 1)) {
      saw_zz = true;
      CHECK(t.coeff == doctest::Approx(j));
    }
    if (t.string == z(0)) {
      saw_z0 = true;
      CHECK(t.coeff == doctest::Approx(1.0 - j));
    }
  }
  CHECK(saw_zz);
  CHECK(saw_z0);
  CHECK(c6_internal() == doctest::Approx(862690.0 * kTwoPi));
}
