#include "aqc/hamiltonian.hpp"

#include <algorithm>
#include <cmath>

#include "aqc/errors.hpp"

namespace aqc {

FrequencyUnit parse_frequency_unit(std::string_view text) {
  if (text == "MHz") return FrequencyUnit::MHz;
  if (text == "rad_per_us") return FrequencyUnit::RadPerUs;
  throw invalid_input("unknown unit '" + std::string(text) + "' (expected MHz or rad_per_us)");
}

std::string to_string(FrequencyUnit unit) { return unit == FrequencyUnit::MHz ? "MHz" : "rad_per_us"; }

char to_char(Pauli p) noexcept {
  switch (p) {
    case Pauli::X: return 'X';
    case Pauli::Y: return 'Y';
    case Pauli::Z: return 'Z';
  }
  return '?';
}

Pauli pauli_from_char(char c) {
  switch (c) {
    case 'X': case 'x': return Pauli::X;
    case 'Y': case 'y': return Pauli::Y;
    case 'Z': case 'z': return Pauli::Z;
    default: throw invalid_input(std::string("invalid Pauli operator '") + c + "'");
  }
}

PauliString PauliString::pair(std::uint32_t a, Pauli pa, std::uint32_t b, Pauli pb) {
  if (a == b) throw invalid_input("Pauli pair on a single qubit");
  return PauliString({{a, pa}, {b, pb}});
}

std::uint32_t PauliString::span() const noexcept {
  return factors_.empty() ? 0 : factors_.rbegin()->first + 1;
}

PauliString PauliString::remapped(std::span<const std::uint32_t> mapping) const {
  Factors out;
  for (const auto& [q, p] : factors_) {
    if (q >= mapping.size()) throw invalid_input("qubit " + std::to_string(q) + " has no mapping entry");
    out.emplace(mapping[q], p);
  }
  if (out.size() != factors_.size()) throw invalid_input("qubit mapping is not injective");
  return PauliString(std::move(out));
}

std::string PauliString::to_string() const {
  if (factors_.empty()) return "I";
  std::string s;
  for (const auto& [q, p] : factors_) {
    if (!s.empty()) s += ' ';
    s += to_char(p);
    s += std::to_string(q);
  }
  return s;
}

namespace {

int letter_rank(Pauli p) {
  switch (p) {
    case Pauli::Z: return 0;
    case Pauli::X: return 1;
    case Pauli::Y: return 2;
  }
  return 3;
}

}  // namespace

bool canonical_less(const PauliString& a, const PauliString& b) {
  if (a.weight() != b.weight()) return a.weight() > b.weight();
  const auto& fa = a.factors();
  const auto& fb = b.factors();
  for (auto ia = fa.begin(), ib = fb.begin(); ia != fa.end(); ++ia, ++ib) {
    if (ia->second != ib->second) return letter_rank(ia->second) < letter_rank(ib->second);
  }
  for (auto ia = fa.begin(), ib = fb.begin(); ia != fa.end(); ++ia, ++ib) {
    if (ia->first != ib->first) return ia->first < ib->first;
  }
  return false;
}

CanonicalTerms canonicalize(std::span<const WeightedTerm> terms) {
  std::map<PauliString, double, CanonicalLess> merged;
  CanonicalTerms out;
  for (const auto& t : terms) {
    if (t.string.is_identity()) {
      out.global_phase += t.coeff;
      continue;
    }
    merged[t.string] += t.coeff;
  }
  out.terms.reserve(merged.size());
  for (auto& [s, c] : merged) {
    if (c != 0.0) out.terms.push_back({c, s});
  }
  return out;
}

namespace {

void check_terms(std::uint32_t n_qubits, std::span<const WeightedTerm> terms) {
  for (const auto& t : terms) {
    if (!std::isfinite(t.coeff)) throw invalid_input("non-finite coefficient on " + t.string.to_string());
    if (t.string.span() > n_qubits) {
      throw invalid_input("term " + t.string.to_string() + " exceeds n_qubits=" + std::to_string(n_qubits));
    }
  }
}

}  // namespace

TargetHamiltonian TargetHamiltonian::make(std::uint32_t n_qubits, std::vector<WeightedTerm> terms,
                                          double t_target, std::string name) {
  if (n_qubits == 0) throw invalid_input("n_qubits must be positive");
  if (!(t_target > 0.0) || !std::isfinite(t_target)) throw invalid_input("t_target must be positive");
  check_terms(n_qubits, terms);
  auto canon = canonicalize(terms);
  TargetHamiltonian t;
  t.n_qubits = n_qubits;
  t.terms = std::move(canon.terms);
  t.global_phase = canon.global_phase;
  t.t_target = t_target;
  t.name = std::move(name);
  return t;
}

PiecewiseTarget PiecewiseTarget::make(std::uint32_t n_qubits, std::vector<TargetSegment> segments,
                                      std::string name) {
  if (n_qubits == 0) throw invalid_input("n_qubits must be positive");
  if (segments.empty()) throw invalid_input("piecewise target needs at least one segment");
  for (auto& seg : segments) {
    if (!(seg.duration > 0.0) || !std::isfinite(seg.duration)) {
      throw invalid_input("segment durations must be positive");
    }
    check_terms(n_qubits, seg.terms);
    seg.terms = canonicalize(seg.terms).terms;
  }
  PiecewiseTarget p;
  p.n_qubits = n_qubits;
  p.segments = std::move(segments);
  p.name = std::move(name);
  return p;
}

PiecewiseTarget PiecewiseTarget::from_single(const TargetHamiltonian& target) {
  PiecewiseTarget p;
  p.n_qubits = target.n_qubits;
  p.segments.push_back({target.t_target, target.terms});
  p.name = target.name;
  p.unit = target.unit;
  return p;
}

TargetHamiltonian PiecewiseTarget::segment_target(std::size_t i) const {
  TargetHamiltonian t;
  t.n_qubits = n_qubits;
  t.terms = segments.at(i).terms;
  t.t_target = segments.at(i).duration;
  t.name = name;
  t.unit = unit;
  return t;
}

double PiecewiseTarget::total_duration() const {
  double total = 0.0;
  for (const auto& s : segments) total += s.duration;
  return total;
}

Eigen::VectorXd target_vector(const TargetHamiltonian& target, std::span<const PauliString> term_index) {
  std::map<PauliString, Eigen::Index, CanonicalLess> position;
  for (std::size_t i = 0; i < term_index.size(); ++i) position.emplace(term_index[i], static_cast<Eigen::Index>(i));
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(term_index.size()));
  for (const auto& t : target.terms) {
    auto it = position.find(t.string);
    if (it == position.end()) {
      throw structural("target term " + t.string.to_string() + " missing from term index");
    }
    b[it->second] += t.coeff * target.t_target;
  }
  return b;
}

}  // namespace aqc
