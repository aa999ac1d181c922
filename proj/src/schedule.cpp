#include "aqc/schedule.hpp"

#include <map>

namespace aqc {

namespace {

double display_factor(const AmplitudeVariable& v, FrequencyUnit unit) {
  return v.quantity == Quantity::Frequency ? to_internal_factor(unit) : 1.0;
}

}  // namespace

double PulseSchedule::total_time() const {
  double t = 0.0;
  for (const auto& s : segments) t += s.t_machine_us;
  return t;
}

PulseSchedule make_schedule(const AAIS& aais, FrequencyUnit unit, const std::vector<SegmentState>& segments) {
  PulseSchedule out;
  out.unit = unit;
  out.aais_ref = aais.description;
  const auto& vars = aais.variables();
  if (!segments.empty()) {
    for (std::size_t i = 0; i < vars.size(); ++i) {
      if (vars[i].kind == VarKind::RuntimeFixed) {
        out.fixed.push_back({vars[i].id, segments.front().values[i] / display_factor(vars[i], unit)});
      }
    }
  }
  for (const auto& seg : segments) {
    ScheduleSegment s;
    s.t_machine_us = seg.t;
    for (std::size_t i = 0; i < vars.size(); ++i) {
      if (vars[i].kind == VarKind::RuntimeDynamic) {
        s.dynamic.push_back({vars[i].id, seg.values[i] / display_factor(vars[i], unit)});
      }
    }
    out.segments.push_back(std::move(s));
  }
  return out;
}

std::vector<SegmentState> internal_state(const PulseSchedule& schedule, const AAIS& aais) {
  const auto& vars = aais.variables();
  std::vector<double> fixed(vars.size(), 0.0);
  std::vector<bool> seen_fixed(vars.size(), false);
  auto lookup = [&](const std::string& id, VarKind expected) {
    auto v = aais.find(id);
    if (!v) throw invalid_input("schedule names unknown variable '" + id + "'");
    if (vars[*v].kind != expected) {
      throw invalid_input("schedule lists '" + id + "' in the wrong section");
    }
    return *v;
  };
  for (const auto& nv : schedule.fixed) {
    VarIndex v = lookup(nv.id, VarKind::RuntimeFixed);
    if (seen_fixed[v]) throw invalid_input("schedule repeats variable '" + nv.id + "'");
    seen_fixed[v] = true;
    fixed[v] = nv.value * display_factor(vars[v], schedule.unit);
  }
  std::vector<SegmentState> out;
  for (const auto& seg : schedule.segments) {
    if (!(seg.t_machine_us >= 0.0)) throw invalid_input("segment duration must be non-negative");
    SegmentState s;
    s.t = seg.t_machine_us;
    s.values = fixed;
    std::vector<bool> seen = seen_fixed;
    for (const auto& nv : seg.dynamic) {
      VarIndex v = lookup(nv.id, VarKind::RuntimeDynamic);
      if (seen[v]) throw invalid_input("schedule repeats variable '" + nv.id + "'");
      seen[v] = true;
      s.values[v] = nv.value * display_factor(vars[v], schedule.unit);
    }
    for (std::size_t i = 0; i < vars.size(); ++i) {
      if (!seen[i]) throw invalid_input("schedule is missing variable '" + vars[i].id + "'");
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace aqc
