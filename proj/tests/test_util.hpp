#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "aqc/aais.hpp"
#include "aqc/hamiltonian.hpp"

namespace aqc::testing {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline PauliString zz(std::uint32_t a, std::uint32_t b) { return PauliString::pair(a, Pauli::Z, b, Pauli::Z); }
inline PauliString x(std::uint32_t q) { return PauliString::single(q, Pauli::X); }
inline PauliString y(std::uint32_t q) { return PauliString::single(q, Pauli::Y); }
inline PauliString z(std::uint32_t q) { return PauliString::single(q, Pauli::Z); }

/// J sum Z_i Z_{i+1} + h sum X_i with coefficients given in MHz.
inline TargetHamiltonian ising_chain_mhz(std::uint32_t n, double j = 1.0, double h = 1.0, double t = 1.0) {
  std::vector<WeightedTerm> terms;
  for (std::uint32_t i = 0; i + 1 < n; ++i) terms.push_back({kTwoPi * j, zz(i, i + 1)});
  for (std::uint32_t i = 0; i < n; ++i) terms.push_back({kTwoPi * h, x(i)});
  auto target = TargetHamiltonian::make(n, terms, t, "ising_chain");
  target.unit = FrequencyUnit::MHz;
  return target;
}

/// Rydberg device of the worked example with continuous positions when
/// `resolution` is zero.
inline AAIS worked_rydberg(std::uint32_t n = 3, double resolution = 0.01) {
  RydbergLimits lim;
  lim.position_resolution = resolution;
  return build_rydberg_aais(n, 1, lim);
}

}  // namespace aqc::testing
