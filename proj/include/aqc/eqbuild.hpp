#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "aqc/aais.hpp"
#include "aqc/hamiltonian.hpp"

namespace aqc {

struct IncidenceEntry {
  PauliString string;
  double coeff = 0.0;
};

/// A scalar factor shared by one or more effects of an instruction. Its value
/// in the linear system is defining_expr * T_sim.
struct SynthesizedVariable {
  std::size_t id = 0;
  Expr defining_expr;
  std::size_t source_instruction = 0;
  std::set<VarIndex> amplitude_vars;
  std::vector<IncidenceEntry> incidence;  ///< constant ratio per Pauli term
};

/// Factors each instruction's effects into synthesized variables. Effects whose
/// expressions agree up to a constant share one variable; the first effect in
/// canonical term order supplies the defining expression, so its incidence is
/// +1 and the rest carry the constant ratios.
std::vector<SynthesizedVariable> extract_synthesized(const AAIS& aais);

struct GlobalLinearSystem {
  Eigen::SparseMatrix<double> matrix;  ///< rows: term_index, cols: synth_vars
  Eigen::VectorXd rhs;
  std::vector<PauliString> term_index;
  std::vector<SynthesizedVariable> synth_vars;

  Eigen::Index rows() const { return matrix.rows(); }
  Eigen::Index cols() const { return matrix.cols(); }
  std::optional<Eigen::Index> row_of(const PauliString& s) const;
  /// Induced L1 operator norm: maximum absolute column sum.
  double norm1() const;
  /// Right-hand side for another target over the same term index.
  Eigen::VectorXd rhs_for(const TargetHamiltonian& target) const;
};

/// Rows cover every string of the target, of `extra_strings`, and of every
/// incidence entry; strings absent from the target get rhs 0.
GlobalLinearSystem build_global_linear(std::vector<SynthesizedVariable> synths, const TargetHamiltonian& target,
                                       std::span<const PauliString> extra_strings = {});

/// One connected component of the bipartite synthesized/amplitude graph.
struct LocalSystem {
  std::size_t component_id = 0;
  std::vector<VarIndex> amplitude_vars;  ///< sorted
  std::vector<std::size_t> synth_vars;   ///< sorted
  std::vector<double> targets;           ///< alpha* restricted to synth_vars, once known
  bool has_fixed_vars = false;
  std::optional<VarIndex> time_critical_var;  ///< set iff exactly one is present
  std::size_t n_time_critical = 0;
};

/// Union-find over synthesized and amplitude variables. Components are ordered
/// by their smallest synthesized index. A component with two or more
/// time-critical variables adds a message to `warnings`.
std::vector<LocalSystem> connected_components(std::span<const SynthesizedVariable> synths, const AAIS& aais,
                                              std::vector<std::string>* warnings = nullptr);

/// Copies alpha restricted to each component's synthesized variables.
void assign_targets(std::vector<LocalSystem>& locals, const Eigen::VectorXd& alpha);

}  // namespace aqc
