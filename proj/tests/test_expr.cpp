#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "aqc/aais.hpp"
#include "aqc/errors.hpp"
#include "aqc/expr.hpp"
#include "test_util.hpp"

using namespace aqc;
using namespace aqc::testing;

TEST_CASE("evaluation examples") {
  const Expr omega = Expr::var(0), phi = Expr::var(1);
  const Expr rabi = Expr::product({Expr::constant(0.5), omega, Expr::cos(phi)});
  const double om = 2.5 * kTwoPi;
  std::vector<double> v{om, 0.0};
  CHECK(rabi.evaluate(v) / kTwoPi == doctest::Approx(1.25));
  CHECK(Expr::cos(phi).evaluate(v) == 1.0);

  const Expr d6 = Expr::power(Expr::abs_diff(Expr::var(0), Expr::var(1)), -6);
  std::vector<double> near{0.0, 7.46}, far{0.0, 14.92};
  CHECK(d6.evaluate(far) == doctest::Approx(d6.evaluate(near) / 64.0).epsilon(1e-14));
}

TEST_CASE("evaluation errors") {
  const Expr e = Expr::power(Expr::abs_diff(Expr::var(0), Expr::var(1)), -6);
  std::vector<double> tie{1.0, 1.0};
  try {
    e.evaluate(tie);
    FAIL("expected a singularity");
  } catch (const EvalError& err) {
    CHECK(err.reason() == EvalError::Reason::Singularity);
  }
  std::vector<double> unbound{1.0, std::nan("")};
  try {
    e.evaluate(unbound);
    FAIL("expected a missing binding");
  } catch (const EvalError& err) {
    CHECK(err.reason() == EvalError::Reason::MissingBinding);
    CHECK(err.kind() == ErrorKind::InvalidInput);
  }
}

TEST_CASE("gradient examples") {
  const Expr rabi = Expr::product({Expr::constant(0.5), Expr::var(0), Expr::cos(Expr::var(1))});
  std::vector<double> v{3.0, 0.0};
  CHECK(rabi.gradient(v).partial(0) == doctest::Approx(0.5));

  const double k = 5.0, d = 2.0;
  const Expr vdw = k * Expr::power(Expr::abs_diff(Expr::var(0), Expr::var(1)), -6);
  std::vector<double> p{0.0, d};
  CHECK(vdw.gradient(p).partial(1) == doctest::Approx(-6.0 * k * std::pow(d, -7)));

  const Expr tie = Expr::abs_diff(Expr::var(0), Expr::var(1));
  std::vector<double> same{1.0, 1.0};
  Gradient g = tie.gradient(same);
  CHECK(g.non_smooth);
  CHECK(g.partial(0) == 0.0);
}

namespace {
// Central differences with step 1e-6 relative to the variable scale.
void check_against_differences(const Expr& e, std::vector<double> point, const std::vector<VarIndex>& vars) {
  const Gradient g = e.gradient(point);
  for (VarIndex v : vars) {
    const double h = 1e-6 * std::max(1.0, std::abs(point[v]));
    auto plus = point, minus = point;
    plus[v] += h;
    minus[v] -= h;
    const double fd = (e.evaluate(plus) - e.evaluate(minus)) / (2 * h);
    const double exact = g.partial(v);
    CHECK(std::abs(fd - exact) <= 1e-5 * std::max(std::abs(exact), 1e-6 * std::abs(g.value) + 1e-8));
  }
}
}  // namespace

TEST_CASE("gradients match central differences on every Rydberg effect") {
  std::mt19937 rng(3);
  for (int dims : {1, 2}) {
    const AAIS aais = build_rydberg_aais(3, dims);
    for (const auto& ins : aais.instructions()) {
      for (const auto& eff : ins.effects) {
        std::vector<VarIndex> vars(ins.variables.begin(), ins.variables.end());
        for (int trial = 0; trial < 100; ++trial) {
          std::vector<double> point;
          for (const auto& var : aais.variables()) {
            std::uniform_real_distribution<double> u(var.bounds.lo, var.bounds.hi);
            point.push_back(u(rng));
          }
          // Keep pair distances away from the singular and the flat regime.
          for (std::size_t s = 0; s < aais.sites().size(); ++s) {
            for (std::size_t k = 0; k < aais.sites()[s].coords.size(); ++k) {
              point[aais.sites()[s].coords[k]] = 8.0 * s + (k ? 3.0 : 0.0) + std::uniform_real_distribution<double>(0, 2)(rng);
            }
          }
          check_against_differences(eff.expr, point, vars);
        }
      }
    }
  }
}

TEST_CASE("tape evaluation agrees with the tree") {
  std::mt19937 rng(5);
  const AAIS aais = build_rydberg_aais(4, 2);
  for (const auto& ins : aais.instructions()) {
    for (const auto& eff : ins.effects) {
      ExprTape tape(eff.expr);
      for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> point;
        for (const auto& var : aais.variables()) {
          std::uniform_real_distribution<double> u(var.bounds.lo, var.bounds.hi);
          point.push_back(u(rng));
        }
        double v = 0.0;
        std::vector<std::pair<VarIndex, double>> partials;
        REQUIRE(tape.gradient(point, v, partials));
        CHECK(v == doctest::Approx(eff.expr.evaluate(point)).epsilon(1e-12));
        const Gradient g = eff.expr.gradient(point);
        std::map<VarIndex, double> summed;
        for (auto [var, d] : partials) summed[var] += d;
        for (auto [var, d] : g.partials) CHECK(summed[var] == doctest::Approx(d).epsilon(1e-10));
      }
    }
  }
  ExprTape singular(Expr::power(Expr::abs_diff(Expr::var(0), Expr::var(1)), -2));
  std::vector<double> tie{2.0, 2.0};
  double v = 0.0;
  CHECK_FALSE(singular.evaluate(tie, v));
}

TEST_CASE("parsing and printing") {
  const NameResolver names = [](std::string_view n) -> std::optional<VarIndex> {
    if (n == "a") return 0;
    if (n == "b") return 1;
    return std::nullopt;
  };
  const Expr e = parse_expr("(* 0.5 a (cos b))", names);
  std::vector<double> v{4.0, 0.0};
  CHECK(e.evaluate(v) == 2.0);
  CHECK(parse_expr("(/ a 2)", names).evaluate(v) == 2.0);
  CHECK(parse_expr("(- a b)", names).evaluate(v) == 4.0);
  CHECK(parse_expr("(absdiff b a)", names).evaluate(v) == 4.0);
  CHECK(parse_expr("(^ a -2)", names).evaluate(v) == 1.0 / 16.0);
  CHECK(parse_expr(e.to_string([](VarIndex i) { return std::string(i ? "b" : "a"); }), names).to_string() ==
        e.to_string());
  CHECK_THROWS_AS(parse_expr("(* a", names), Error);
  CHECK_THROWS_AS(parse_expr("(* a c)", names), Error);
}

TEST_CASE("constant splitting and linear factors") {
  const Expr e = Expr::product({Expr::constant(-3.0), Expr::var(0), Expr::product({Expr::constant(2.0), Expr::var(1)})});
  auto [c, rest] = split_constant(e);
  CHECK(c == -6.0);
  std::vector<double> v{2.0, 5.0};
  CHECK(rest.evaluate(v) == 10.0);
  auto g = linear_factor(e, 0);
  REQUIRE(g.has_value());
  CHECK(g->evaluate(v) == -30.0);
  CHECK_FALSE(linear_factor(Expr::power(Expr::var(0), 2), 0).has_value());
}
