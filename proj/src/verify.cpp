#include "aqc/verify.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <limits>
#include <memory>

#include "aqc/eqbuild.hpp"
#include "aqc/errors.hpp"
#include "aqc/nlls.hpp"
#include "aqc/solve.hpp"

namespace aqc {

namespace {

using cd = std::complex<double>;

void check_size(std::uint32_t n) {
  if (n > kMaxDenseQubits) {
    throw invalid_input("dense simulation supports at most " + std::to_string(kMaxDenseQubits) + " qubits, got " +
                        std::to_string(n));
  }
}

// P|b> = phase |b ^ flip>.
struct PauliAction {
  std::uint64_t flip = 0;
  std::uint64_t z_mask = 0;  // bits contributing a (-1)^bit sign (Z and Y)
  int y_count = 0;           // each Y contributes a factor i
};

PauliAction action_of(const PauliString& s, std::uint32_t n) {
  PauliAction a;
  for (const auto& [q, p] : s.factors()) {
    if (q >= n) throw invalid_input("term " + s.to_string() + " acts outside " + std::to_string(n) + " qubits");
    const std::uint64_t bit = std::uint64_t{1} << q;
    if (p != Pauli::Z) a.flip |= bit;
    if (p != Pauli::X) a.z_mask |= bit;
    if (p == Pauli::Y) ++a.y_count;
  }
  return a;
}

cd phase_of(const PauliAction& a, std::uint64_t b) {
  static const cd kIPow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  const bool negative = (std::popcount(b & a.z_mask) & 1) != 0;
  cd ph = kIPow[a.y_count % 4];
  return negative ? -ph : ph;
}

double sparse_inf_norm(const Eigen::SparseMatrix<cd>& h) {
  Eigen::VectorXd rows = Eigen::VectorXd::Zero(h.rows());
  for (int k = 0; k < h.outerSize(); ++k) {
    for (Eigen::SparseMatrix<cd>::InnerIterator it(h, k); it; ++it) rows[it.row()] += std::abs(it.value());
  }
  return rows.size() ? rows.maxCoeff() : 0.0;
}

}  // namespace

Eigen::MatrixXcd build_dense(std::span<const WeightedTerm> terms, std::uint32_t n) {
  check_size(n);
  const std::uint64_t dim = std::uint64_t{1} << n;
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (const auto& t : terms) {
    const PauliAction a = action_of(t.string, n);
    for (std::uint64_t b = 0; b < dim; ++b) {
      h(static_cast<Eigen::Index>(b ^ a.flip), static_cast<Eigen::Index>(b)) += t.coeff * phase_of(a, b);
    }
  }
  return h;
}

Eigen::SparseMatrix<std::complex<double>> build_sparse(std::span<const WeightedTerm> terms, std::uint32_t n) {
  check_size(n);
  const std::uint64_t dim = std::uint64_t{1} << n;
  std::vector<Eigen::Triplet<cd>> triplets;
  triplets.reserve(terms.size() * dim);
  for (const auto& t : terms) {
    const PauliAction a = action_of(t.string, n);
    for (std::uint64_t b = 0; b < dim; ++b) {
      triplets.emplace_back(static_cast<int>(b ^ a.flip), static_cast<int>(b), t.coeff * phase_of(a, b));
    }
  }
  Eigen::SparseMatrix<cd> h(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  h.setFromTriplets(triplets.begin(), triplets.end());
  return h;
}

StateVector evolve(const Eigen::MatrixXcd& h, double t, const StateVector& psi0) {
  if (h.rows() != h.cols() || h.rows() != psi0.size()) throw structural("evolve: dimension mismatch");
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  if ((h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale) throw structural("evolve: Hamiltonian is not Hermitian");
  if (t == 0.0) return psi0;
  if (h.imag().cwiseAbs().maxCoeff() == 0.0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.real());
    if (es.info() != Eigen::Success) throw numerical_failure("evolve: eigendecomposition failed");
    const Eigen::MatrixXd& v = es.eigenvectors();
    Eigen::VectorXcd c = v.transpose().cast<cd>() * psi0;
    for (Eigen::Index k = 0; k < c.size(); ++k) c[k] *= std::exp(cd(0.0, -es.eigenvalues()[k] * t));
    return v.cast<cd>() * c;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  if (es.info() != Eigen::Success) throw numerical_failure("evolve: eigendecomposition failed");
  const Eigen::MatrixXcd& v = es.eigenvectors();
  Eigen::VectorXcd c = v.adjoint() * psi0;
  for (Eigen::Index k = 0; k < c.size(); ++k) c[k] *= std::exp(cd(0.0, -es.eigenvalues()[k] * t));
  return v * c;
}

StateVector evolve_rk4(const Eigen::SparseMatrix<std::complex<double>>& h, double t, const StateVector& psi0) {
  if (h.rows() != h.cols() || h.rows() != psi0.size()) throw structural("evolve_rk4: dimension mismatch");
  const double norm = sparse_inf_norm(h);
  if (t == 0.0 || norm == 0.0) return psi0;
  const auto steps = static_cast<long>(std::ceil(std::abs(t) * norm / 0.02));
  const double dt = t / static_cast<double>(steps);
  const cd minus_i(0.0, -1.0);
  StateVector psi = psi0;
  for (long s = 0; s < steps; ++s) {
    StateVector k1 = minus_i * (h * psi);
    StateVector k2 = minus_i * (h * (psi + 0.5 * dt * k1));
    StateVector k3 = minus_i * (h * (psi + 0.5 * dt * k2));
    StateVector k4 = minus_i * (h * (psi + dt * k3));
    psi += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return psi;
}

StateVector zeros_state(std::uint32_t n) {
  check_size(n);
  StateVector psi = StateVector::Zero(Eigen::Index{1} << n);
  psi[0] = 1.0;
  return psi;
}

StateVector plus_state(std::uint32_t n) {
  check_size(n);
  const Eigen::Index dim = Eigen::Index{1} << n;
  return StateVector::Constant(dim, cd(1.0 / std::sqrt(static_cast<double>(dim)), 0.0));
}

StateVector simulate_schedule(const PulseSchedule& schedule, const AAIS& aais, const StateVector& psi0) {
  check_size(aais.n_sites());
  StateVector psi = psi0;
  for (const auto& seg : internal_state(schedule, aais)) {
    const auto terms = simulator_hamiltonian(aais, seg.values);
    psi = evolve(build_dense(terms, aais.n_sites()), seg.t, psi);
  }
  return psi;
}

StateVector evolve_target(const PiecewiseTarget& target, const StateVector& psi0) {
  check_size(target.n_qubits);
  StateVector psi = psi0;
  for (const auto& seg : target.segments) psi = evolve(build_dense(seg.terms, target.n_qubits), seg.duration, psi);
  return psi;
}

double fidelity(const StateVector& a, const StateVector& b) { return std::norm(a.dot(b)); }

Observables observables(const StateVector& psi, std::uint32_t n, bool cyclic) {
  Observables o;
  if (n == 0) return o;
  std::vector<double> z(n, 0.0);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  for (std::uint32_t i = 0; i + 1 < n; ++i) pairs.emplace_back(i, i + 1);
  if (cyclic && n > 2) pairs.emplace_back(n - 1, 0);
  std::vector<double> zz(pairs.size(), 0.0);
  for (Eigen::Index b = 0; b < psi.size(); ++b) {
    const double p = std::norm(psi[b]);
    if (p == 0.0) continue;
    const auto bits = static_cast<std::uint64_t>(b);
    for (std::uint32_t i = 0; i < n; ++i) z[i] += ((bits >> i) & 1U) ? -p : p;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const bool odd = (((bits >> pairs[k].first) ^ (bits >> pairs[k].second)) & 1U) != 0;
      zz[k] += odd ? -p : p;
    }
  }
  for (double v : z) o.z_avg += v;
  o.z_avg /= n;
  for (double v : zz) o.zz_avg += v;
  if (!zz.empty()) o.zz_avg /= static_cast<double>(zz.size());
  return o;
}

BruteForceResult brute_force_compile(const TargetHamiltonian& target, const AAIS& aais, std::uint64_t seed) {
  const auto nv = static_cast<Eigen::Index>(aais.variables().size());
  if (nv + 1 > 40) {
    throw invalid_input("brute-force oracle is limited to 40 unknowns, problem has " + std::to_string(nv + 1));
  }
  auto sys = std::make_shared<GlobalLinearSystem>(build_global_linear(extract_synthesized(aais), target));
  auto tapes = std::make_shared<std::vector<ExprTape>>();
  for (const auto& s : sys->synth_vars) tapes->emplace_back(s.defining_expr);

  NllsProblem p;
  p.n_params = nv + 1;
  p.n_residuals = sys->rows();
  p.lo.resize(p.n_params);
  p.hi.resize(p.n_params);
  for (Eigen::Index i = 0; i < nv; ++i) {
    p.lo[i] = aais.variable(static_cast<VarIndex>(i)).bounds.lo;
    p.hi[i] = aais.variable(static_cast<VarIndex>(i)).bounds.hi;
  }
  p.lo[nv] = kMinScheduleDuration;
  p.hi[nv] = aais.t_machine_max().value_or(std::max(10.0 * target.t_target, 1.0));
  p.residuals = [sys, tapes, nv](const Eigen::VectorXd& x, Eigen::VectorXd& r,
                                 std::vector<Eigen::Triplet<double>>* jac) {
    thread_local std::vector<std::pair<VarIndex, double>> partials;
    const std::vector<double> values(x.data(), x.data() + nv);
    const double t = x[nv];
    r = -sys->rhs;
    for (Eigen::Index s = 0; s < sys->cols(); ++s) {
      double f = 0.0;
      partials.clear();
      const ExprTape& tape = (*tapes)[static_cast<std::size_t>(s)];
      const bool ok = jac ? tape.gradient(values, f, partials) : tape.evaluate(values, f);
      if (!ok) {
        r.setConstant(std::numeric_limits<double>::infinity());
        return;
      }
      for (Eigen::SparseMatrix<double>::InnerIterator it(sys->matrix, s); it; ++it) {
        r[it.row()] += it.value() * f * t;
        if (!jac) continue;
        for (const auto& [v, d] : partials) {
          if (d != 0.0) jac->emplace_back(static_cast<int>(it.row()), static_cast<int>(v), it.value() * d * t);
        }
        jac->emplace_back(static_cast<int>(it.row()), static_cast<int>(nv), it.value() * f);
      }
    }
  };

  BruteForceResult out;
  NllsResult best;
  best.cost = std::numeric_limits<double>::infinity();
  for (const auto& start : halton_points(p.lo, p.hi, 32, seed)) {
    NllsResult r = solve_bounded_lm(p, start, {});
    if (!(r.cost < best.cost)) continue;
    std::vector<double> values(r.x.data(), r.x.data() + nv);
    for (Eigen::Index i = 0; i < nv; ++i) {
      const auto& var = aais.variable(static_cast<VarIndex>(i));
      auto& x = values[static_cast<std::size_t>(i)];
      if (var.kind == VarKind::RuntimeFixed) x = snap_to_resolution(x, var);
    }
    if (geometry_violation(aais, values)) continue;
    for (Eigen::Index i = 0; i < nv; ++i) r.x[i] = values[static_cast<std::size_t>(i)];
    best = std::move(r);
  }
  if (best.x.size() == 0) throw infeasible("brute-force oracle found no admissible geometry");

  out.t_sim = best.x[nv];
  out.converged = best.converged;
  SegmentState seg{out.t_sim, std::vector<double>(best.x.data(), best.x.data() + nv)};
  std::vector<SegmentState> segs{seg};
  out.schedule = make_schedule(aais, target.unit, segs);
  out.schedule.target_name = target.name;
  out.schedule.aais_ref = aais.description;
  auto& rep = out.report;
  rep.term_index = sys->term_index;
  rep.b_tar = sys->rhs;
  rep.b_sim = achieved_vector(segs, *sys);
  const auto m = error_metrics(rep.b_sim, rep.b_tar);
  rep.error_l1 = m.error_l1;
  rep.relative_error_pct = m.relative_pct;
  rep.m_norm1 = sys->norm1();
  rep.t_machine_total = out.t_sim;
  return out;
}

}  // namespace aqc
