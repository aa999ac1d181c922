#include "aqc/report.hpp"

#include <cstdio>
#include <numeric>
#include <sstream>

namespace aqc {

Eigen::VectorXd synthesized_values(const SegmentState& segment, const GlobalLinearSystem& sys) {
  Eigen::VectorXd alpha(static_cast<Eigen::Index>(sys.synth_vars.size()));
  for (std::size_t j = 0; j < sys.synth_vars.size(); ++j) {
    alpha[static_cast<Eigen::Index>(j)] = sys.synth_vars[j].defining_expr.evaluate(segment.values) * segment.t;
  }
  return alpha;
}

Eigen::VectorXd achieved_vector(std::span<const SegmentState> segments, const GlobalLinearSystem& sys) {
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(sys.cols());
  for (const auto& seg : segments) alpha += synthesized_values(seg, sys);
  return sys.matrix * alpha;
}

Eigen::VectorXd achieved_vector(const PulseSchedule& schedule, const GlobalLinearSystem& sys, const AAIS& aais) {
  return achieved_vector(internal_state(schedule, aais), sys);
}

ErrorMetrics error_metrics(const Eigen::VectorXd& b_sim, const Eigen::VectorXd& b_tar) {
  if (b_sim.size() != b_tar.size()) throw structural("error_metrics: vector lengths differ");
  ErrorMetrics m;
  m.error_l1 = (b_sim - b_tar).lpNorm<1>();
  const double norm = b_tar.lpNorm<1>();
  if (norm > 0.0) {
    m.relative_pct = 100.0 * m.error_l1 / norm;
  } else if (m.error_l1 == 0.0) {
    m.relative_pct = 0.0;
  }
  return m;
}

double theorem1_bound(double m_norm1, double eps1, std::span<const double> eps2) {
  return m_norm1 * std::accumulate(eps2.begin(), eps2.end(), 0.0) + eps1;
}

std::string format_report(const CompilationReport& r) {
  std::ostringstream os;
  char buf[160];
  auto line = [&](const char* label, double v) {
    std::snprintf(buf, sizeof buf, "%-22s %.10g\n", label, v);
    os << buf;
  };
  line("error_l1 (rad)", r.error_l1);
  if (r.relative_error_pct) {
    line("relative_error_pct", *r.relative_error_pct);
  } else {
    os << "relative_error_pct     undefined (zero target)\n";
  }
  line("eps1", r.eps1);
  line("sum eps2", std::accumulate(r.eps2.begin(), r.eps2.end(), 0.0));
  line("||M||_1", r.m_norm1);
  line("bound", r.bound);
  line("t_machine_total (us)", r.t_machine_total);
  os << "refined                " << (r.refined ? "yes" : "no") << "\n";
  if (r.refined) line("error before refine", r.error_before_refine);
  os << "\nterm                     b_tar            b_sim\n";
  for (std::size_t i = 0; i < r.term_index.size(); ++i) {
    auto k = static_cast<Eigen::Index>(i);
    std::snprintf(buf, sizeof buf, "%-20s %16.9g %16.9g\n", r.term_index[i].to_string().c_str(), r.b_tar[k],
                  r.b_sim[k]);
    os << buf;
  }
  for (const auto& w : r.warnings) os << "warning: " << w << "\n";
  return os.str();
}

}  // namespace aqc
