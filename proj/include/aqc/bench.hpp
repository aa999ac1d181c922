#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aqc/aais.hpp"
#include "aqc/hamiltonian.hpp"
#include "aqc/solve.hpp"

namespace aqc {

enum class Model { IsingChain, IsingCycle, Kitaev, IsingCyclePlus, HeisChain, MISChain, PXP };

/// Snake-case names used on the command line: ising_chain, ising_cycle,
/// kitaev, ising_cycle_plus, heis_chain, mis_chain, pxp.
std::string to_string(Model m);
Model parse_model(std::string_view name);
std::vector<Model> all_models();
/// Whether the model couples the last site back to the first.
bool is_cyclic(Model m);

struct BenchmarkSpec {
  Model model = Model::IsingChain;
  std::uint32_t n = 2;
  /// Coefficients by name in `unit`; missing names default to 1. Names per
  /// model: J, h (Ising, Heisenberg, PXP); mu, t, h (Kitaev); U, omega,
  /// alpha (MIS chain).
  std::map<std::string, double> params;
  double t_target = 1.0;  ///< us
  int segments = 1;       ///< MIS chain only
  FrequencyUnit unit = FrequencyUnit::MHz;

  double param(const std::string& name) const;
};

/// Exact term list of the model. Occupation operators are expanded into Pauli
/// terms with the identity dropped. The MIS chain is sampled at the midpoint
/// of each of its equal segments in normalized time t in [0, 1]; every other
/// model yields one segment. Throws InvalidInput on a bad spec.
PiecewiseTarget generate(const BenchmarkSpec& spec);

enum class AaisKind { Rydberg, Heisenberg };

std::string to_string(AaisKind k);
AaisKind parse_aais_kind(std::string_view name);

/// Device used for a benchmark cell. Rydberg positions span
/// [0, max(75, 12 n)] um; dims 0 picks 2 for cyclic models and 1 otherwise.
/// The Heisenberg coupling graph is the set of pairs the target couples.
AAIS bench_aais(AaisKind kind, const PiecewiseTarget& target, Model model, int dims = 0);

struct SuiteOptions {
  CompileOptions compile;
  int dims = 0;
  unsigned cell_threads = 1;  ///< cells compiled concurrently
};

struct SuiteRow {
  Model model = Model::IsingChain;
  std::uint32_t n = 0;
  AaisKind aais = AaisKind::Rydberg;
  bool ok = false;
  std::string error;
  double compile_seconds = 0.0;
  double t_machine = 0.0;
  double error_l1 = 0.0;
  std::optional<double> relative_error_pct;
  double bound = 0.0;
};

/// Compiles every (model, size) cell with default parameters. A failing cell
/// records its error and the suite continues. Rows come back in input order.
std::vector<SuiteRow> run_suite(std::span<const Model> models, std::span<const std::uint32_t> sizes, AaisKind aais,
                                const SuiteOptions& options = {});

std::string suite_csv(std::span<const SuiteRow> rows);
std::string suite_json(std::span<const SuiteRow> rows);

}  // namespace aqc
