#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "aqc/aais.hpp"
#include "aqc/eqbuild.hpp"
#include "aqc/hamiltonian.hpp"
#include "aqc/report.hpp"
#include "aqc/schedule.hpp"

namespace aqc {

/// Schema version written to and required from every JSON artifact.
inline constexpr int kFormatVersion = 1;

/// Target file: either {"t_target", "terms"} or {"segments": [{"duration",
/// "terms"}]}, with "n_qubits", "unit" and optional "name". Coefficients are
/// converted to rad/us. Throws InvalidInput with the byte offset on malformed
/// JSON.
PiecewiseTarget parse_target(std::string_view json_text, const std::string& default_name = {});
PiecewiseTarget load_target(const std::filesystem::path& path);

/// AAIS file: {"preset": "rydberg" | "heisenberg", ...parameters} or a custom
/// device with "variables", "instructions" and optional "sites". Custom
/// expressions are written in the file's unit and normalized on load.
AAIS parse_aais(std::string_view json_text);
AAIS load_aais(const std::filesystem::path& path);

struct ScheduleFileOptions {
  bool include_timings = false;  ///< off by default so output is reproducible
};

std::string schedule_to_json(const PulseSchedule& schedule, const CompilationReport* report,
                             const ScheduleFileOptions& options = {});
PulseSchedule parse_schedule(std::string_view json_text);
PulseSchedule load_schedule(const std::filesystem::path& path);

/// Report embedded in a schedule file. Throws InvalidInput when absent.
CompilationReport parse_embedded_report(std::string_view json_text);

/// Term index, M as coordinate triplets, rhs, synthesized variables and
/// component membership.
std::string eqsys_to_json(const GlobalLinearSystem& sys, std::span<const LocalSystem> components, const AAIS& aais);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace aqc
