#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aqc/aais.hpp"
#include "aqc/eqbuild.hpp"
#include "aqc/hamiltonian.hpp"
#include "aqc/report.hpp"
#include "aqc/schedule.hpp"

namespace aqc {

/// Shortest program the pipeline emits when nothing constrains the duration.
inline constexpr double kMinScheduleDuration = 0.01;  // us

struct LinearSolution {
  Eigen::VectorXd alpha_star;
  double residual_l1 = 0.0;  ///< eps1
};

LinearSolution solve_global_linear(const GlobalLinearSystem& sys);
LinearSolution solve_global_linear(const Eigen::SparseMatrix<double>& m, const Eigen::VectorXd& rhs);

/// How a component's minimum time was obtained.
enum class TimeCase {
  ZeroTarget,   ///< all targets zero, no time constraint
  Constant,     ///< no amplitude variables at all
  Linear,       ///< one time-critical variable with constant factors
  Absorbed,     ///< one time-critical variable times a companion expression
  Search,       ///< bisection on T with bounded least squares
  Fixed,        ///< solved by solve_fixed_vars
};

std::string to_string(TimeCase c);

struct LocalSolution {
  std::size_t component_id = 0;
  std::map<VarIndex, double> values;  ///< internal units
  double t_min = 0.0;
  double residual_l1 = 0.0;  ///< eps2 of this component at the time it was solved
  TimeCase time_case = TimeCase::ZeroTarget;
};

/// Minimum evolution time of a dynamic-only component and the values that
/// realise it. Throws Infeasible when a nonzero target needs a variable whose
/// usable magnitude is zero.
LocalSolution local_min_time(const LocalSystem& local, const GlobalLinearSystem& sys, const AAIS& aais,
                             const Eigen::VectorXd& alpha, std::uint64_t seed = 0);

/// Max of t_min; kMinScheduleDuration when every component is unconstrained.
double choose_t_sim(std::span<const LocalSolution> locals);

/// Re-solves a dynamic-only component at a fixed duration. With
/// `clamp_to_bounds` an over-range closed-form value is clamped instead of
/// raising a Structural error.
LocalSolution resolve_dynamic(const LocalSystem& local, const GlobalLinearSystem& sys, const AAIS& aais,
                              const Eigen::VectorXd& alpha, double t_sim, std::uint64_t seed = 0,
                              bool clamp_to_bounds = false);

struct FixedSolveOptions {
  double dt_step = 0.0;
  double t_max = 0.0;
  std::uint64_t seed = 0;
  int starts = 8;
};

struct FixedSolveResult {
  LocalSolution solution;
  double t_sim = 0.0;
  int relaxations = 0;
  std::vector<std::string> log;
};

/// Bounded least squares on f_k(x) - alpha_k / t over the component's
/// variables, multi-started from chain and ring seeds plus Halton points.
/// Positions are snapped to their resolution; if the geometry is then
/// inadmissible, t grows by dt_step until t_max (Infeasible past that).
FixedSolveResult solve_fixed_vars(const LocalSystem& local, const GlobalLinearSystem& sys, const AAIS& aais,
                                  const Eigen::VectorXd& alpha, double t_sim, const FixedSolveOptions& options);

/// Rounds a fixed variable to its hardware grid, staying inside its bounds.
double snap_to_resolution(double x, const AmplitudeVariable& var);

/// Checks position bounds and pairwise minimum separation of every site whose
/// coordinates are all in `values`. Returns an explanation on failure.
std::optional<std::string> geometry_violation(const AAIS& aais, const std::vector<double>& values);

struct CompileOptions {
  std::uint64_t seed = 0;
  bool refine = true;
  bool refine_l1 = false;
  std::optional<double> dt_step;
  bool share_groups = false;
  unsigned threads = 0;  ///< 0 = hardware concurrency
};

struct CompileResult {
  PulseSchedule schedule;
  CompilationReport report;
  GlobalLinearSystem system;
  std::vector<LocalSystem> components;
};

struct RefineResult {
  std::vector<SegmentState> segments;
  bool applied = false;
  double error_before = 0.0;
  double error_after = 0.0;
  std::vector<std::string> log;
};

/// One refinement pass: with the achieved synthesized values held for
/// fixed-variable columns, solve for a correction of the dynamic columns that
/// minimises the remaining residual, then re-resolve the dynamic components
/// within bounds. The update is backtracked (1, 1/2, 1/4) and dropped if the
/// total error would grow.
RefineResult refine(const GlobalLinearSystem& sys, const AAIS& aais, std::span<const LocalSystem> components,
                    std::span<const Eigen::VectorXd> rhs_per_segment, std::vector<SegmentState> segments,
                    bool l1 = false, std::uint64_t seed = 0);

CompileResult compile(const TargetHamiltonian& target, const AAIS& aais, const CompileOptions& options = {});
CompileResult compile_piecewise(const PiecewiseTarget& target, const AAIS& aais, const CompileOptions& options = {});

/// Builds the report for given segment states. `alpha_star` and
/// `rhs_per_segment` come from the linear stage of the same compilation.
CompilationReport build_report(const GlobalLinearSystem& sys, std::span<const LocalSystem> components,
                               std::span<const SegmentState> segments, std::span<const Eigen::VectorXd> alpha_star,
                               std::span<const Eigen::VectorXd> rhs_per_segment, std::span<const double> eps1);

}  // namespace aqc
