#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <complex>

#include "aqc/errors.hpp"
#include "aqc/solve.hpp"
#include "aqc/verify.hpp"
#include "test_util.hpp"

using namespace aqc;
using namespace aqc::testing;
using cd = std::complex<double>;

namespace {

std::vector<WeightedTerm> random_terms(std::uint32_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> c(-2.0, 2.0);
  std::uniform_int_distribution<int> p(0, 3);
  std::vector<WeightedTerm> terms;
  for (int k = 0; k < 6; ++k) {
    std::map<std::uint32_t, Pauli> f;
    for (std::uint32_t q = 0; q < n; ++q) {
      const int v = p(rng);
      if (v > 0) f[q] = static_cast<Pauli>(v - 1);
    }
    if (f.empty()) continue;
    terms.push_back({c(rng), PauliString(f)});
  }
  return terms;
}

}  // namespace

TEST_CASE("dense Pauli matrices follow the bit convention") {
  std::vector<WeightedTerm> z0{{1.0, z(0)}};
  const auto m = build_dense(z0, 2);
  CHECK(m(0, 0) == cd(1));
  CHECK(m(1, 1) == cd(-1));
  CHECK(m(2, 2) == cd(1));
  CHECK(m(3, 3) == cd(-1));
  std::vector<WeightedTerm> x1{{2.0, x(1)}};
  const auto mx = build_dense(x1, 2);
  CHECK(mx(2, 0) == cd(2));
  CHECK(mx(0, 2) == cd(2));
  CHECK(mx(1, 0) == cd(0));
  std::vector<WeightedTerm> y0{{1.0, y(0)}};
  const auto my = build_dense(y0, 1);
  CHECK(my(0, 1) == cd(0, -1));
  CHECK(my(1, 0) == cd(0, 1));
  std::vector<WeightedTerm> zz01{{1.0, zz(0, 1)}};
  const auto mzz = build_dense(zz01, 2);
  CHECK(mzz(0, 0) == cd(1));
  CHECK(mzz(1, 1) == cd(-1));
  CHECK(mzz(3, 3) == cd(1));
  CHECK_THROWS_AS(build_dense(z0, kMaxDenseQubits + 1), Error);
}

TEST_CASE("dense and sparse builders agree and are Hermitian") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto terms = random_terms(3, rng);
    const Eigen::MatrixXcd d = build_dense(terms, 3);
    const Eigen::MatrixXcd s(build_sparse(terms, 3));
    CHECK((d - s).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((d - d.adjoint()).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("evolution examples") {
  std::vector<WeightedTerm> xt{{1.0, x(0)}};
  const auto h = build_dense(xt, 1);
  const double t = 0.7;
  const StateVector psi = evolve(h, t, zeros_state(1));
  CHECK(std::abs(psi(0) - cd(std::cos(t), 0)) < 1e-12);
  CHECK(std::abs(psi(1) - cd(0, -std::sin(t))) < 1e-12);

  std::vector<WeightedTerm> zt{{0.5, z(0)}};
  const StateVector p = evolve(build_dense(zt, 1), 2.0, plus_state(1));
  const double r = 1.0 / std::sqrt(2.0);
  CHECK(std::abs(p(0) - r * std::exp(cd(0, -1.0))) < 1e-12);
  CHECK(std::abs(p(1) - r * std::exp(cd(0, 1.0))) < 1e-12);

  Eigen::MatrixXcd bad = Eigen::MatrixXcd::Zero(2, 2);
  bad(0, 1) = 1.0;
  try {
    evolve(bad, 1.0, zeros_state(1));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Structural);
  }
}

TEST_CASE("evolution is unitary on random Hamiltonians") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> ut(0.0, 3.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::uint32_t n = 1 + trial % 4;
    const auto terms = random_terms(n, rng);
    StateVector psi0 = StateVector::Random(std::int64_t{1} << n);
    psi0.normalize();
    const StateVector psi = evolve(build_dense(terms, n), ut(rng), psi0);
    CHECK(std::abs(psi.norm() - 1.0) < 1e-10);
  }
}

TEST_CASE("eigendecomposition and RK4 agree") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const auto terms = random_terms(4, rng);
    const StateVector a = evolve(build_dense(terms, 4), 1.3, plus_state(4));
    const StateVector b = evolve_rk4(build_sparse(terms, 4), 1.3, plus_state(4));
    CHECK((a - b).norm() < 1e-6);
  }
}

TEST_CASE("Heisenberg schedule reproduces the target dynamics") {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges{{0, 1}, {1, 2}};
  const AAIS a = build_heisenberg_aais(3, edges);
  const auto target = ising_chain_mhz(3);
  const auto res = compile(target, a);
  const auto pw = PiecewiseTarget::from_single(target);
  for (const StateVector& psi0 : {zeros_state(3), plus_state(3)}) {
    const double f = fidelity(simulate_schedule(res.schedule, a, psi0), evolve_target(pw, psi0));
    CHECK(f >= 1.0 - 1e-9);
  }
}

TEST_CASE("empty schedule leaves the state alone") {
  const AAIS a = worked_rydberg(2);
  auto res = compile(ising_chain_mhz(2), a);
  res.schedule.segments.clear();
  const StateVector psi = simulate_schedule(res.schedule, a, plus_state(2));
  CHECK((psi - plus_state(2)).norm() < 1e-15);
}

TEST_CASE("observables") {
  const auto z0 = observables(zeros_state(3), 3, false);
  CHECK(z0.z_avg == doctest::Approx(1.0));
  CHECK(z0.zz_avg == doctest::Approx(1.0));
  const auto p = observables(plus_state(3), 3, true);
  CHECK(std::abs(p.z_avg) < 1e-12);
  CHECK(std::abs(p.zz_avg) < 1e-12);
  // |100>: qubit 0 flipped.
  StateVector s = StateVector::Zero(8);
  s(1) = 1.0;
  const auto open = observables(s, 3, false);
  CHECK(open.z_avg == doctest::Approx(1.0 / 3.0));
  CHECK(open.zz_avg == doctest::Approx(0.0));
  const auto ring = observables(s, 3, true);
  CHECK(ring.zz_avg == doctest::Approx(-1.0 / 3.0));
  CHECK(fidelity(zeros_state(2), plus_state(2)) == doctest::Approx(0.25));
}

TEST_CASE("brute-force oracle") {
  const AAIS a = worked_rydberg(2, 0.0);
  const auto target = ising_chain_mhz(2);
  const auto bf = brute_force_compile(target, a, 1);
  CHECK(bf.t_sim > 0.0);
  CHECK(bf.report.error_l1 >= 0.0);
  CHECK(bf.report.error_l1 == doctest::Approx((bf.report.b_sim - bf.report.b_tar).cwiseAbs().sum()));
  const auto pipeline = compile(target, a);
  CHECK(pipeline.report.error_l1 <= bf.report.error_l1 * 1.1 + 1e-6);
  CHECK_THROWS_AS(brute_force_compile(ising_chain_mhz(10), worked_rydberg(10)), Error);
}
