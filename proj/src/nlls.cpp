#include "aqc/nlls.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace aqc {

namespace {

Eigen::VectorXd project(const Eigen::VectorXd& x, const NllsProblem& p) { return x.cwiseMax(p.lo).cwiseMin(p.hi); }

struct Evaluation {
  Eigen::VectorXd r;
  Eigen::SparseMatrix<double> jac;
  double cost = 0.0;
};

double evaluate_cost(const NllsProblem& p, const Eigen::VectorXd& x, Eigen::VectorXd& r) {
  r.resize(p.n_residuals);
  p.residuals(x, r, nullptr);
  double c = 0.5 * r.squaredNorm();
  return std::isfinite(c) ? c : std::numeric_limits<double>::infinity();
}

void evaluate_full(const NllsProblem& p, const Eigen::VectorXd& x, Evaluation& e) {
  std::vector<Eigen::Triplet<double>> triplets;
  e.r.resize(p.n_residuals);
  p.residuals(x, e.r, &triplets);
  e.jac.resize(p.n_residuals, p.n_params);
  e.jac.setFromTriplets(triplets.begin(), triplets.end());
  e.cost = 0.5 * e.r.squaredNorm();
  if (!std::isfinite(e.cost)) e.cost = std::numeric_limits<double>::infinity();
}

std::vector<int> first_primes(std::size_t count) {
  std::vector<int> primes;
  for (int c = 2; primes.size() < count; ++c) {
    bool prime = true;
    for (int p : primes) {
      if (p * p > c) break;
      if (c % p == 0) {
        prime = false;
        break;
      }
    }
    if (prime) primes.push_back(c);
  }
  return primes;
}

double radical_inverse(std::uint64_t index, int base) {
  double result = 0.0;
  double f = 1.0 / base;
  while (index > 0) {
    result += f * static_cast<double>(index % static_cast<std::uint64_t>(base));
    index /= static_cast<std::uint64_t>(base);
    f /= base;
  }
  return result;
}

}  // namespace

NllsResult solve_bounded_lm(const NllsProblem& p, Eigen::VectorXd x0, const NllsOptions& options) {
  NllsResult out;
  out.x = project(x0, p);
  if (p.n_params == 0) {
    Eigen::VectorXd r;
    out.cost = evaluate_cost(p, out.x, r);
    out.converged = true;
    return out;
  }
  Evaluation e;
  evaluate_full(p, out.x, e);
  double lambda = 1e-3;
  int stalls = 0;
  Eigen::VectorXd r_trial;
  for (out.iterations = 0; out.iterations < options.max_iterations; ++out.iterations) {
    if (e.cost <= options.cost_tol) {
      out.converged = true;
      break;
    }
    if (out.iterations >= options.abandon_after && e.cost > options.abandon_above) break;
    if (out.iterations >= options.abandon_early_after && e.cost > options.abandon_early_above) break;
    Eigen::VectorXd g = e.jac.transpose() * e.r;
    Eigen::VectorXd pg = out.x - project(out.x - g, p);
    if (pg.lpNorm<Eigen::Infinity>() < options.gradient_tol) {
      out.converged = true;
      break;
    }
    std::vector<bool> free(static_cast<std::size_t>(p.n_params));
    for (Eigen::Index i = 0; i < p.n_params; ++i) {
      bool at_lo = out.x[i] <= p.lo[i] && g[i] > 0.0;
      bool at_hi = out.x[i] >= p.hi[i] && g[i] < 0.0;
      free[static_cast<std::size_t>(i)] = !(at_lo || at_hi);
    }
    Eigen::MatrixXd jtj = Eigen::MatrixXd(e.jac.transpose() * e.jac);
    const double max_diag = std::max(jtj.diagonal().maxCoeff(), 1e-300);
    for (Eigen::Index i = 0; i < p.n_params; ++i) {
      if (free[static_cast<std::size_t>(i)]) continue;
      jtj.row(i).setZero();
      jtj.col(i).setZero();
      jtj(i, i) = 1.0;
      g[i] = 0.0;
    }
    Eigen::VectorXd scale = jtj.diagonal().cwiseMax(1e-12 * max_diag);

    bool accepted = false;
    for (int attempt = 0; attempt < 30 && !accepted; ++attempt) {
      Eigen::MatrixXd lhs = jtj;
      lhs.diagonal() += lambda * scale;
      Eigen::VectorXd step = lhs.ldlt().solve(-g);
      if (!step.allFinite()) {
        lambda *= 8.0;
        continue;
      }
      Eigen::VectorXd x_trial = project(out.x + step, p);
      double c = evaluate_cost(p, x_trial, r_trial);
      if (c < e.cost) {
        const double decrease = e.cost - c;
        stalls = decrease <= 1e-10 * e.cost ? stalls + 1 : 0;
        out.x = x_trial;
        evaluate_full(p, out.x, e);
        lambda = std::max(lambda / 3.0, 1e-15);
        accepted = true;
      } else {
        lambda *= 4.0;
      }
    }
    if (!accepted || stalls >= 3) {
      // No descent left at machine precision: a stationary point in practice.
      out.converged = true;
      break;
    }
  }
  out.cost = e.cost;
  return out;
}

NllsResult solve_multistart(const NllsProblem& problem, const std::vector<Eigen::VectorXd>& starts,
                            const NllsOptions& options) {
  NllsResult best;
  best.cost = std::numeric_limits<double>::infinity();
  for (const auto& s : starts) {
    NllsResult r = solve_bounded_lm(problem, s, options);
    if (r.cost < best.cost || best.x.size() == 0) best = std::move(r);
    if (best.cost <= options.cost_tol) break;
  }
  return best;
}

std::vector<Eigen::VectorXd> halton_points(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int count,
                                           std::uint64_t seed, double fallback_span) {
  const auto dim = static_cast<std::size_t>(lo.size());
  const auto primes = first_primes(dim);
  Eigen::VectorXd a(lo.size()), b(lo.size());
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    bool flo = std::isfinite(lo[i]), fhi = std::isfinite(hi[i]);
    a[i] = flo ? lo[i] : (fhi ? hi[i] - fallback_span : -fallback_span / 2);
    b[i] = fhi ? hi[i] : a[i] + fallback_span;
  }
  std::vector<Eigen::VectorXd> points;
  const std::uint64_t offset = 1 + seed * 1013;
  for (int k = 0; k < count; ++k) {
    Eigen::VectorXd x(lo.size());
    for (std::size_t d = 0; d < dim; ++d) {
      double h = radical_inverse(offset + static_cast<std::uint64_t>(k), primes[d]);
      auto i = static_cast<Eigen::Index>(d);
      x[i] = a[i] + h * (b[i] - a[i]);
    }
    points.push_back(std::move(x));
  }
  return points;
}

}  // namespace aqc
