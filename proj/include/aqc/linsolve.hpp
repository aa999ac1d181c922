#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace aqc {

/// Minimum-norm least-squares solution of A x = b.
///
/// Columns are grouped into independent blocks (columns sharing a row belong
/// together). Small blocks use a complete orthogonal decomposition. Large blocks
/// use CGLS from a zero start, whose iterates stay in the row space of A and
/// so converge to the minimum-norm solution; a dense decomposition is the
/// fallback if CGLS stalls.
Eigen::VectorXd min_norm_lstsq(const Eigen::SparseMatrix<double>& a, const Eigen::VectorXd& b);

/// Column count above which a block switches from the dense to the iterative
/// path.
inline constexpr Eigen::Index kDenseBlockLimit = 256;

}  // namespace aqc
