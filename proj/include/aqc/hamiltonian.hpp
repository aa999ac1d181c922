#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aqc/units.hpp"

namespace aqc {

enum class Pauli : std::uint8_t { X, Y, Z };

char to_char(Pauli p) noexcept;
Pauli pauli_from_char(char c);

/// Sparse tensor product of single-qubit Pauli operators. Identity factors are
/// never stored, so the empty string is the identity.
class PauliString {
 public:
  using Factors = std::map<std::uint32_t, Pauli>;

  PauliString() = default;
  explicit PauliString(Factors factors) : factors_(std::move(factors)) {}
  PauliString(std::initializer_list<std::pair<const std::uint32_t, Pauli>> init) : factors_(init) {}

  static PauliString single(std::uint32_t qubit, Pauli p) { return PauliString({{qubit, p}}); }
  static PauliString pair(std::uint32_t a, Pauli pa, std::uint32_t b, Pauli pb);

  const Factors& factors() const noexcept { return factors_; }
  std::size_t weight() const noexcept { return factors_.size(); }
  bool is_identity() const noexcept { return factors_.empty(); }
  /// Largest qubit index + 1 (0 for the identity).
  std::uint32_t span() const noexcept;

  /// Renames qubits; `mapping[q]` is the new index of qubit q.
  PauliString remapped(std::span<const std::uint32_t> mapping) const;

  /// e.g. "Z0 Z1"; "I" for the identity.
  std::string to_string() const;

  friend bool operator==(const PauliString&, const PauliString&) = default;

 private:
  Factors factors_;
};

/// Canonical term order: higher weight first, then by the sequence of Pauli
/// letters (Z < X < Y), then by qubit indices. Puts Z-type couplings ahead of
/// fields, and Z fields ahead of X and Y fields.
bool canonical_less(const PauliString& a, const PauliString& b);

struct CanonicalLess {
  bool operator()(const PauliString& a, const PauliString& b) const { return canonical_less(a, b); }
};

struct WeightedTerm {
  double coeff = 0.0;
  PauliString string;

  friend bool operator==(const WeightedTerm&, const WeightedTerm&) = default;
};

struct CanonicalTerms {
  std::vector<WeightedTerm> terms;
  double global_phase = 0.0;  ///< summed identity coefficient
};

/// Merges duplicates, drops zeros, sorts canonically and pulls identity terms
/// out as a global phase.
CanonicalTerms canonicalize(std::span<const WeightedTerm> terms);

struct TargetHamiltonian {
  std::uint32_t n_qubits = 0;
  std::vector<WeightedTerm> terms;  ///< rad/us, canonical
  double t_target = 0.0;            ///< us
  double global_phase = 0.0;
  std::string name;
  FrequencyUnit unit = FrequencyUnit::RadPerUs;  ///< declared unit of the source

  /// Validates and canonicalizes. Throws InvalidInput on bad data.
  static TargetHamiltonian make(std::uint32_t n_qubits, std::vector<WeightedTerm> terms,
                                double t_target, std::string name = {});
};

struct TargetSegment {
  double duration = 0.0;  ///< us
  std::vector<WeightedTerm> terms;
};

struct PiecewiseTarget {
  std::uint32_t n_qubits = 0;
  std::vector<TargetSegment> segments;
  std::string name;
  FrequencyUnit unit = FrequencyUnit::RadPerUs;

  static PiecewiseTarget make(std::uint32_t n_qubits, std::vector<TargetSegment> segments,
                              std::string name = {});
  static PiecewiseTarget from_single(const TargetHamiltonian& target);

  /// Segment `i` as a standalone time-independent target.
  TargetHamiltonian segment_target(std::size_t i) const;
  double total_duration() const;
};

/// B_tar: entry i is coeff_i * t_target for strings in the target, else 0.
/// Throws Structural when a target string is missing from `term_index`.
Eigen::VectorXd target_vector(const TargetHamiltonian& target, std::span<const PauliString> term_index);

}  // namespace aqc
