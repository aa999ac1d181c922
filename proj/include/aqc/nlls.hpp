#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace aqc {

/// Residual callback. Fills `r` (size n_residuals) and, when `jac` is non-null,
/// appends Jacobian entries (row, col, value); duplicates are summed.
using ResidualFn =
    std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& r, std::vector<Eigen::Triplet<double>>* jac)>;

struct NllsProblem {
  Eigen::Index n_params = 0;
  Eigen::Index n_residuals = 0;
  ResidualFn residuals;
  Eigen::VectorXd lo;  ///< may hold -inf
  Eigen::VectorXd hi;  ///< may hold +inf
};

struct NllsOptions {
  int max_iterations = 200;
  double gradient_tol = 1e-10;  ///< on the projected gradient, infinity norm
  double cost_tol = 1e-30;      ///< stop once 0.5 ||r||^2 falls below this
  /// A start still above this cost after `abandon_after` iterations is given
  /// up as hopeless.
  double abandon_above = std::numeric_limits<double>::infinity();
  int abandon_after = 20;
  /// Earlier, looser cut for starts that are far off.
  double abandon_early_above = std::numeric_limits<double>::infinity();
  int abandon_early_after = 5;
};

struct NllsResult {
  Eigen::VectorXd x;
  double cost = 0.0;  ///< 0.5 ||r||^2
  int iterations = 0;
  bool converged = false;
};

/// Projected Levenberg-Marquardt. Steps are solved on the free set (variables
/// not pinned at a bound by the gradient) and projected back into the box.
NllsResult solve_bounded_lm(const NllsProblem& problem, Eigen::VectorXd x0, const NllsOptions& options = {});

/// Runs solve_bounded_lm from every start and keeps the lowest cost; ties go
/// to the earlier start.
NllsResult solve_multistart(const NllsProblem& problem, const std::vector<Eigen::VectorXd>& starts,
                            const NllsOptions& options = {});

/// `count` Halton points inside the box. Infinite sides are replaced by a span
/// of `fallback_span` around the finite side or zero. The seed shifts the
/// sequence index so different seeds give different deterministic points.
std::vector<Eigen::VectorXd> halton_points(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int count,
                                           std::uint64_t seed, double fallback_span = 10.0);

}  // namespace aqc
