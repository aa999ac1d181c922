#pragma once

#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aqc/expr.hpp"
#include "aqc/hamiltonian.hpp"
#include "aqc/units.hpp"

namespace aqc {

enum class VarKind { RuntimeFixed, RuntimeDynamic };

struct Bounds {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v, double slack = 0.0) const { return v >= lo - slack && v <= hi + slack; }
  double clamp(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
};

/// A tunable parameter of the device. Frequency-valued bounds are stored in
/// rad/us.
struct AmplitudeVariable {
  std::string id;
  VarKind kind = VarKind::RuntimeDynamic;
  bool time_critical = false;
  Bounds bounds;
  Quantity quantity = Quantity::Frequency;
  std::optional<std::string> share_group;
  /// Hardware grid for the solved value; 0 means continuous.
  double resolution = 0.0;
};

struct Effect {
  Expr expr;
  PauliString string;
};

struct Instruction {
  std::string name;
  std::vector<Effect> effects;  ///< one per distinct non-identity string
  std::set<VarIndex> variables;
};

/// Position variables of one atom site (one per spatial axis).
struct Site {
  std::vector<VarIndex> coords;
};

class AAIS {
 public:
  AAIS() = default;

  /// Validates ids and references, merges duplicate effect strings and drops
  /// identity effects. Throws InvalidInput.
  static AAIS make(std::uint32_t n_sites, std::vector<AmplitudeVariable> variables,
                   std::vector<Instruction> instructions, std::vector<Site> sites = {},
                   double min_separation = 0.0, std::optional<double> t_machine_max = std::nullopt);

  std::uint32_t n_sites() const noexcept { return n_sites_; }
  const std::vector<AmplitudeVariable>& variables() const noexcept { return variables_; }
  const AmplitudeVariable& variable(VarIndex i) const { return variables_.at(i); }
  const std::vector<Instruction>& instructions() const noexcept { return instructions_; }
  const std::vector<Site>& sites() const noexcept { return sites_; }
  double min_separation() const noexcept { return min_separation_; }
  std::optional<double> t_machine_max() const noexcept { return t_machine_max_; }

  std::optional<VarIndex> find(std::string_view id) const;
  VarIndex index_of(std::string_view id) const;

  /// Unit used when schedules for this device are written out.
  FrequencyUnit display_unit = FrequencyUnit::RadPerUs;
  /// Free-form description of how the AAIS was produced (preset parameters or
  /// "custom"); copied into schedules as aais_ref.
  std::string description;

  /// Merges share-group members into the group's first member. Returns the
  /// reduced AAIS and, for every original variable, its representative.
  std::pair<AAIS, std::vector<VarIndex>> with_shared_groups() const;

 private:
  std::uint32_t n_sites_ = 0;
  std::vector<AmplitudeVariable> variables_;
  std::vector<Instruction> instructions_;
  std::vector<Site> sites_;
  double min_separation_ = 0.0;
  std::optional<double> t_machine_max_;
  std::map<std::string, VarIndex, std::less<>> by_id_;
};

/// Device limits for the Rydberg preset, expressed in `unit` for frequencies,
/// um for lengths and radians for the phase.
struct RydbergLimits {
  FrequencyUnit unit = FrequencyUnit::MHz;
  Bounds delta{-20.0, 20.0};
  Bounds omega{0.0, 2.5};
  Bounds phi{-std::numbers::pi, std::numbers::pi};
  Bounds position{0.0, 75.0};
  double min_separation = 4.0;
  double position_resolution = 0.01;
  std::optional<double> t_machine_max = 4.0;
};

/// Van der Waals pairs, per-site detuning, and a per-site Rabi drive with X
/// and Y effects. dims selects 1D or 2D positions.
AAIS build_rydberg_aais(std::uint32_t n_sites, int dims, const RydbergLimits& limits = {});

struct HeisenbergLimits {
  FrequencyUnit unit = FrequencyUnit::MHz;
  Bounds amplitude{-5.0, 5.0};
  std::optional<double> t_machine_max;
};

/// a^P_i P_i for every site and P in {X,Y,Z}, a^PP_ij P_i P_j for every edge.
AAIS build_heisenberg_aais(std::uint32_t n_sites, std::span<const std::pair<std::uint32_t, std::uint32_t>> edges,
                           const HeisenbergLimits& limits = {});

/// Simulator Hamiltonian at the given variable values (rad/us, canonical).
std::vector<WeightedTerm> simulator_hamiltonian(const AAIS& aais, std::span<const double> values);

/// Equals `C6` in rad/us um^6.
double c6_internal();

}  // namespace aqc
