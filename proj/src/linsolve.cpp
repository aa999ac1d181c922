#include "aqc/linsolve.hpp"

#include <numeric>
#include <vector>

#include <Eigen/IterativeLinearSolvers>

namespace aqc {

namespace {

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

Eigen::VectorXd dense_min_norm(const Eigen::SparseMatrix<double>& a, const Eigen::VectorXd& b) {
  Eigen::MatrixXd dense(a);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(dense);
  return cod.solve(b);
}

Eigen::VectorXd solve_block(const Eigen::SparseMatrix<double>& a, const Eigen::VectorXd& b) {
  if (a.cols() <= kDenseBlockLimit) return dense_min_norm(a, b);
  // A column-scaling preconditioner would converge to a weighted-norm
  // solution, so plain CGLS is used.
  Eigen::LeastSquaresConjugateGradient<Eigen::SparseMatrix<double>, Eigen::IdentityPreconditioner> cg;
  cg.setTolerance(1e-15);
  cg.setMaxIterations(4 * a.cols());
  cg.compute(a);
  Eigen::VectorXd x = cg.solveWithGuess(b, Eigen::VectorXd::Zero(a.cols()));
  if (cg.info() == Eigen::Success) return x;
  // The normal-equation residual is what CGLS minimizes; accept a stalled run
  // when that residual is already at roundoff.
  const double grad = (a.transpose() * (a * x - b)).norm();
  const double scale = (a.transpose() * b).norm();
  if (grad <= 1e-12 * std::max(scale, 1.0)) return x;
  return dense_min_norm(a, b);
}

}  // namespace

Eigen::VectorXd min_norm_lstsq(const Eigen::SparseMatrix<double>& a, const Eigen::VectorXd& b) {
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  if (n == 0 || m == 0) return x;

  // Union columns that touch a common row.
  std::vector<std::size_t> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  std::vector<Eigen::Index> row_owner(static_cast<std::size_t>(m), -1);
  for (Eigen::Index c = 0; c < a.outerSize(); ++c) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(a, c); it; ++it) {
      if (it.value() == 0.0) continue;
      auto& owner = row_owner[static_cast<std::size_t>(it.row())];
      if (owner < 0) {
        owner = c;
      } else {
        auto ra = find_root(parent, static_cast<std::size_t>(owner));
        auto rb = find_root(parent, static_cast<std::size_t>(c));
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
      }
    }
  }

  std::vector<std::vector<Eigen::Index>> block_cols(static_cast<std::size_t>(n));
  std::vector<std::vector<Eigen::Index>> block_rows(static_cast<std::size_t>(n));
  for (Eigen::Index c = 0; c < n; ++c) block_cols[find_root(parent, static_cast<std::size_t>(c))].push_back(c);
  for (Eigen::Index r = 0; r < m; ++r) {
    auto owner = row_owner[static_cast<std::size_t>(r)];
    if (owner >= 0) block_rows[find_root(parent, static_cast<std::size_t>(owner))].push_back(r);
  }

  std::vector<Eigen::Index> local_row(static_cast<std::size_t>(m), -1);
  for (std::size_t root = 0; root < block_cols.size(); ++root) {
    const auto& cols = block_cols[root];
    const auto& rows = block_rows[root];
    if (cols.empty() || rows.empty()) continue;  // empty columns stay at zero
    for (std::size_t i = 0; i < rows.size(); ++i) local_row[static_cast<std::size_t>(rows[i])] = static_cast<Eigen::Index>(i);
    std::vector<Eigen::Triplet<double>> triplets;
    for (std::size_t j = 0; j < cols.size(); ++j) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(a, cols[j]); it; ++it) {
        if (it.value() == 0.0) continue;
        triplets.emplace_back(static_cast<int>(local_row[static_cast<std::size_t>(it.row())]), static_cast<int>(j),
                              it.value());
      }
    }
    Eigen::SparseMatrix<double> block(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    block.setFromTriplets(triplets.begin(), triplets.end());
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) rhs[static_cast<Eigen::Index>(i)] = b[rows[i]];
    if (rhs.cwiseAbs().maxCoeff() == 0.0) continue;
    Eigen::VectorXd xb = solve_block(block, rhs);
    for (std::size_t j = 0; j < cols.size(); ++j) x[cols[j]] = xb[static_cast<Eigen::Index>(j)];
  }
  return x;
}

}  // namespace aqc
