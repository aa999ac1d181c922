#pragma once

#include <numbers>
#include <string>
#include <string_view>

namespace aqc {

/// Declared unit of frequency-valued quantities in an input file. Internally
/// every amplitude is angular frequency in rad/us and every duration is in us.
enum class FrequencyUnit { MHz, RadPerUs };

/// Multiplier taking a value in `unit` to rad/us.
constexpr double to_internal_factor(FrequencyUnit unit) noexcept {
  return unit == FrequencyUnit::MHz ? 2.0 * std::numbers::pi : 1.0;
}

FrequencyUnit parse_frequency_unit(std::string_view text);
std::string to_string(FrequencyUnit unit);

/// What a variable measures; decides whether unit normalization applies.
enum class Quantity { Frequency, Length, Angle, Dimensionless };

/// Van der Waals coefficient of the Rydberg interaction in MHz um^6.
inline constexpr double kC6MHz = 862690.0;

}  // namespace aqc
