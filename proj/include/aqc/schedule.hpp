#pragma once

#include <string>
#include <vector>

#include "aqc/aais.hpp"
#include "aqc/units.hpp"

namespace aqc {

struct NamedValue {
  std::string id;
  double value = 0.0;

  friend bool operator==(const NamedValue&, const NamedValue&) = default;
};

struct ScheduleSegment {
  double t_machine_us = 0.0;
  std::vector<NamedValue> dynamic;  ///< AAIS variable order

  friend bool operator==(const ScheduleSegment&, const ScheduleSegment&) = default;
};

/// Solved program. Frequencies are stored in `unit`, lengths in um and phases
/// in radians, exactly as they are written to disk.
struct PulseSchedule {
  FrequencyUnit unit = FrequencyUnit::RadPerUs;
  std::vector<NamedValue> fixed;  ///< AAIS variable order
  std::vector<ScheduleSegment> segments;
  std::string aais_ref;
  std::string target_name;

  double total_time() const;

  friend bool operator==(const PulseSchedule&, const PulseSchedule&) = default;
};

/// One segment of internal state: full variable vector (rad/us, um, rad) plus
/// its duration.
struct SegmentState {
  double t = 0.0;
  std::vector<double> values;
};

/// Converts internal state to a schedule in `unit`.
PulseSchedule make_schedule(const AAIS& aais, FrequencyUnit unit, const std::vector<SegmentState>& segments);

/// Inverse of make_schedule. Every AAIS variable must be present exactly once
/// in the matching section; throws InvalidInput otherwise.
std::vector<SegmentState> internal_state(const PulseSchedule& schedule, const AAIS& aais);

}  // namespace aqc
