#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "aqc/aais.hpp"
#include "aqc/hamiltonian.hpp"
#include "aqc/report.hpp"
#include "aqc/schedule.hpp"

namespace aqc {

/// Largest register the dense simulator accepts.
inline constexpr std::uint32_t kMaxDenseQubits = 12;

using StateVector = Eigen::VectorXcd;

/// Sum of coeff * P over the terms on n qubits. Basis index bit q is qubit q
/// (0 = |0>, Z eigenvalue +1). Throws InvalidInput past kMaxDenseQubits.
Eigen::MatrixXcd build_dense(std::span<const WeightedTerm> terms, std::uint32_t n);
Eigen::SparseMatrix<std::complex<double>> build_sparse(std::span<const WeightedTerm> terms, std::uint32_t n);

/// exp(-i H t) psi0 by Hermitian eigendecomposition. Throws Structural when H
/// is not Hermitian.
StateVector evolve(const Eigen::MatrixXcd& h, double t, const StateVector& psi0);

/// Same propagation by classical fourth-order Runge-Kutta with step h
/// satisfying h * ||H||_inf <= 0.02. Kept as an independent cross-check.
StateVector evolve_rk4(const Eigen::SparseMatrix<std::complex<double>>& h, double t, const StateVector& psi0);

StateVector zeros_state(std::uint32_t n);
StateVector plus_state(std::uint32_t n);

/// Applies every segment's simulator Hamiltonian for its duration in order.
StateVector simulate_schedule(const PulseSchedule& schedule, const AAIS& aais, const StateVector& psi0);

/// Evolution under the target, segment by segment.
StateVector evolve_target(const PiecewiseTarget& target, const StateVector& psi0);

/// |<a|b>|^2.
double fidelity(const StateVector& a, const StateVector& b);

struct Observables {
  double z_avg = 0.0;
  double zz_avg = 0.0;
};

/// Mean <Z_i> and mean <Z_i Z_{i+1}> over adjacent pairs, wrapping around
/// when `cyclic`.
Observables observables(const StateVector& psi, std::uint32_t n, bool cyclic);

struct BruteForceResult {
  PulseSchedule schedule;
  /// Error fields, b vectors and t_machine_total are filled; the bound terms
  /// do not apply to a joint solve and stay zero.
  CompilationReport report;
  double t_sim = 0.0;
  bool converged = false;
};

/// Joint bounded least squares over every amplitude variable and the
/// duration on the phase-matching residuals, from 32 Halton starts. Throws
/// InvalidInput when the problem has more than 40 unknowns.
BruteForceResult brute_force_compile(const TargetHamiltonian& target, const AAIS& aais, std::uint64_t seed = 0);

}  // namespace aqc
