#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "aqc/eqbuild.hpp"
#include "aqc/schedule.hpp"

namespace aqc {

struct CompilationReport {
  std::vector<PauliString> term_index;
  Eigen::VectorXd b_sim;  ///< achieved phase per term, rad
  Eigen::VectorXd b_tar;
  double error_l1 = 0.0;
  /// Percentage of ||b_tar||_1; empty when b_tar is zero and E is not.
  std::optional<double> relative_error_pct;
  double eps1 = 0.0;
  std::vector<double> eps2;  ///< one per component and segment
  double m_norm1 = 0.0;
  double bound = 0.0;
  double t_machine_total = 0.0;
  bool refined = false;
  double error_before_refine = 0.0;
  std::vector<std::pair<std::string, double>> stage_timings;  ///< seconds
  std::vector<std::string> warnings;
};

/// M * alpha(x*) summed over segments: every defining expression is evaluated
/// at the segment's values and scaled by its duration.
Eigen::VectorXd achieved_vector(std::span<const SegmentState> segments, const GlobalLinearSystem& sys);
Eigen::VectorXd achieved_vector(const PulseSchedule& schedule, const GlobalLinearSystem& sys, const AAIS& aais);

/// Synthesized values alpha(x) = defining(x) * t for one segment.
Eigen::VectorXd synthesized_values(const SegmentState& segment, const GlobalLinearSystem& sys);

struct ErrorMetrics {
  double error_l1 = 0.0;
  std::optional<double> relative_pct;
};

ErrorMetrics error_metrics(const Eigen::VectorXd& b_sim, const Eigen::VectorXd& b_tar);

/// ||M||_1 * sum(eps2) + eps1.
double theorem1_bound(double m_norm1, double eps1, std::span<const double> eps2);

/// Human-readable summary used by `inspect`.
std::string format_report(const CompilationReport& report);

}  // namespace aqc
