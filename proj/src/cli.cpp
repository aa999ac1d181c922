#include "aqc/cli.hpp"

#include <cstdlib>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "aqc/bench.hpp"
#include "aqc/errors.hpp"
#include "aqc/io.hpp"
#include "aqc/solve.hpp"
#include "aqc/verify.hpp"

namespace aqc {

namespace {

unsigned threads_from_env() {
  const char* v = std::getenv("QTURBO_THREADS");
  if (!v || !*v) return 0;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 0) throw invalid_input(std::string("QTURBO_THREADS must be a non-negative integer, got '") + v + "'");
  return static_cast<unsigned>(n);
}

std::vector<std::uint32_t> parse_mapping(const std::string& text) {
  std::vector<std::uint32_t> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      const unsigned long v = std::stoul(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      out.push_back(static_cast<std::uint32_t>(v));
    } catch (const std::exception&) {
      throw invalid_input("--mapping expects comma-separated site indices, got '" + text + "'");
    }
  }
  return out;
}

// Places target qubit q on site mapping[q] (identity when empty).
PiecewiseTarget place_on_device(const PiecewiseTarget& target, const std::string& mapping_text, const AAIS& aais) {
  const std::uint32_t sites = aais.n_sites();
  if (mapping_text.empty()) {
    if (target.n_qubits > sites) {
      throw invalid_input("target has " + std::to_string(target.n_qubits) + " qubits but the device has " +
                          std::to_string(sites) + " sites");
    }
    if (target.n_qubits == sites) return target;
    PiecewiseTarget out = PiecewiseTarget::make(sites, target.segments, target.name);
    out.unit = target.unit;
    return out;
  }
  const auto mapping = parse_mapping(mapping_text);
  if (mapping.size() != target.n_qubits) {
    throw invalid_input("--mapping has " + std::to_string(mapping.size()) + " entries for " +
                        std::to_string(target.n_qubits) + " qubits");
  }
  std::set<std::uint32_t> used;
  for (auto s : mapping) {
    if (s >= sites) throw invalid_input("--mapping site " + std::to_string(s) + " is outside the device");
    if (!used.insert(s).second) throw invalid_input("--mapping uses site " + std::to_string(s) + " twice");
  }
  std::vector<TargetSegment> segs;
  for (const auto& seg : target.segments) {
    TargetSegment s{seg.duration, {}};
    for (const auto& t : seg.terms) s.terms.push_back({t.coeff, t.string.remapped(mapping)});
    segs.push_back(std::move(s));
  }
  PiecewiseTarget out = PiecewiseTarget::make(sites, std::move(segs), target.name);
  out.unit = target.unit;
  return out;
}

void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
  } else {
    write_file(path, content);
  }
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

struct CompileArgs {
  std::string target, aais, output, mapping;
  bool refine = true, refine_l1 = false, share_groups = false;
  std::uint64_t seed = 0;
  double dt_step = 0.0;
  std::vector<std::string> emit;
};

int do_compile(const CompileArgs& a) {
  const AAIS aais = load_aais(a.aais);
  const PiecewiseTarget target = place_on_device(load_target(a.target), a.mapping, aais);
  CompileOptions opt;
  opt.seed = a.seed;
  opt.refine = a.refine;
  opt.refine_l1 = a.refine_l1;
  if (a.dt_step > 0.0) opt.dt_step = a.dt_step;
  opt.share_groups = a.share_groups;
  opt.threads = threads_from_env();
  const std::set<std::string> emits(a.emit.begin(), a.emit.end());
  for (const auto& e : emits) {
    if (e != "eqsys" && e != "timings") throw invalid_input("--emit accepts eqsys and timings, got '" + e + "'");
  }
  const CompileResult res = compile_piecewise(target, aais, opt);
  for (const auto& w : res.report.warnings) std::cerr << "warning: " << w << "\n";
  ScheduleFileOptions fo;
  fo.include_timings = emits.count("timings") > 0;
  emit(a.output, schedule_to_json(res.schedule, &res.report, fo));
  if (emits.count("timings")) {
    for (const auto& [stage, secs] : res.report.stage_timings) std::cerr << "timing: " << stage << " " << secs << " s\n";
  }
  if (emits.count("eqsys")) {
    const std::string path = a.output.empty() || a.output == "-" ? "eqsys.json" : a.output + ".eqsys.json";
    write_file(path, eqsys_to_json(res.system, res.components, aais));
    std::cerr << "wrote " << path << "\n";
  }
  return 0;
}

struct VerifyArgs {
  std::string schedule, target, aais, psi0 = "zeros", mapping, output;
  bool observables = false, cyclic = false;
};

int do_verify(const VerifyArgs& a) {
  const AAIS aais = load_aais(a.aais);
  const PiecewiseTarget target = place_on_device(load_target(a.target), a.mapping, aais);
  const PulseSchedule schedule = load_schedule(a.schedule);
  StateVector psi0;
  if (a.psi0 == "zeros") {
    psi0 = zeros_state(aais.n_sites());
  } else if (a.psi0 == "plus") {
    psi0 = plus_state(aais.n_sites());
  } else {
    throw invalid_input("--psi0 must be zeros or plus");
  }
  const StateVector sim = simulate_schedule(schedule, aais, psi0);
  const StateVector tar = evolve_target(target, psi0);
  nlohmann::ordered_json j;
  j["format_version"] = kFormatVersion;
  j["psi0"] = a.psi0;
  j["n_qubits"] = aais.n_sites();
  j["fidelity"] = fidelity(sim, tar);
  if (a.observables) {
    auto obs = [&](const StateVector& psi) {
      const Observables o = observables(psi, aais.n_sites(), a.cyclic);
      return nlohmann::ordered_json{{"z_avg", o.z_avg}, {"zz_avg", o.zz_avg}};
    };
    j["observables"] = {{"simulated", obs(sim)}, {"target", obs(tar)}};
  }
  emit(a.output, j.dump(2) + "\n");
  return 0;
}

struct BenchArgs {
  std::string models, sizes = "3,4,6,8", aais = "rydberg", output, json;
  std::uint64_t seed = 0;
  bool no_refine = false;
  int dims = 0;
  unsigned jobs = 1;
};

int do_bench(const BenchArgs& a) {
  std::vector<Model> models;
  if (a.models.empty()) {
    models = all_models();
  } else {
    for (const auto& m : split_list(a.models)) models.push_back(parse_model(m));
  }
  std::vector<std::uint32_t> sizes;
  for (const auto& s : split_list(a.sizes)) {
    const auto v = parse_mapping(s);
    if (v.size() != 1) throw invalid_input("--sizes expects comma-separated integers");
    sizes.push_back(v.front());
  }
  SuiteOptions opt;
  opt.compile.seed = a.seed;
  opt.compile.refine = !a.no_refine;
  opt.compile.threads = threads_from_env();
  opt.dims = a.dims;
  opt.cell_threads = a.jobs;
  const auto rows = run_suite(models, sizes, parse_aais_kind(a.aais), opt);
  for (const auto& r : rows) {
    if (!r.ok) std::cerr << "cell " << to_string(r.model) << " n=" << r.n << " failed: " << r.error << "\n";
  }
  emit(a.output, suite_csv(rows));
  if (!a.json.empty()) write_file(a.json, suite_json(rows));
  return 0;
}

int do_inspect(const std::string& path) {
  const std::string text = read_file(path);
  const PulseSchedule s = parse_schedule(text);
  std::cout << "target      " << s.target_name << "\n";
  std::cout << "device      " << s.aais_ref << "\n";
  std::cout << "unit        " << to_string(s.unit) << "\n";
  std::cout << "segments    " << s.segments.size() << "\n";
  std::cout << "total (us)  " << s.total_time() << "\n\n";
  std::cout << format_report(parse_embedded_report(text));
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Analog Hamiltonian compiler: maps a target Hamiltonian onto a device instruction set"};
  app.require_subcommand(1);

  CompileArgs ca;
  auto* compile_cmd = app.add_subcommand("compile", "Compile a target onto a device");
  compile_cmd->add_option("--target", ca.target, "target JSON file")->required();
  compile_cmd->add_option("--aais", ca.aais, "device JSON file")->required();
  compile_cmd->add_option("-o,--output", ca.output, "schedule output path (stdout when absent)");
  compile_cmd->add_flag("--refine,!--no-refine", ca.refine, "run the refinement pass (default on)");
  compile_cmd->add_flag("--refine-l1", ca.refine_l1, "refine against the L1 residual");
  compile_cmd->add_option("--seed", ca.seed, "multi-start seed");
  compile_cmd->add_option("--dt-step", ca.dt_step, "duration increment for geometry relaxation (us)");
  compile_cmd->add_option("--emit", ca.emit, "debug artifacts: eqsys, timings")->delimiter(',');
  compile_cmd->add_flag("--share-groups", ca.share_groups, "force share-group members to one value");
  compile_cmd->add_option("--mapping", ca.mapping, "site of each target qubit, comma separated");

  VerifyArgs va;
  auto* verify_cmd = app.add_subcommand("verify", "Simulate a schedule against its target");
  verify_cmd->add_option("--schedule", va.schedule, "schedule JSON file")->required();
  verify_cmd->add_option("--target", va.target, "target JSON file")->required();
  verify_cmd->add_option("--aais", va.aais, "device JSON file")->required();
  verify_cmd->add_option("--psi0", va.psi0, "initial state: zeros or plus");
  verify_cmd->add_flag("--observables", va.observables, "report Z and ZZ averages");
  verify_cmd->add_flag("--cyclic", va.cyclic, "wrap the ZZ average around the register");
  verify_cmd->add_option("--mapping", va.mapping, "site of each target qubit, comma separated");
  verify_cmd->add_option("-o,--output", va.output, "output path (stdout when absent)");

  BenchArgs ba;
  auto* bench_cmd = app.add_subcommand("bench", "Compile the benchmark suite and tabulate results");
  bench_cmd->add_option("--models", ba.models, "comma-separated model names (default all)");
  bench_cmd->add_option("--sizes", ba.sizes, "comma-separated sizes");
  bench_cmd->add_option("--aais", ba.aais, "rydberg or heisenberg");
  bench_cmd->add_option("-o,--output", ba.output, "CSV output path (stdout when absent)");
  bench_cmd->add_option("--json", ba.json, "also write the table as JSON");
  bench_cmd->add_option("--seed", ba.seed, "multi-start seed");
  bench_cmd->add_flag("--no-refine", ba.no_refine, "skip refinement");
  bench_cmd->add_option("--dims", ba.dims, "Rydberg position dimensions (0 = auto)");
  bench_cmd->add_option("--jobs", ba.jobs, "cells compiled concurrently");

  std::string inspect_path;
  auto* inspect_cmd = app.add_subcommand("inspect", "Print the report embedded in a schedule");
  inspect_cmd->add_option("--schedule", inspect_path, "schedule JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_code(ErrorKind::InvalidInput);
  }

  try {
    if (*compile_cmd) return do_compile(ca);
    if (*verify_cmd) return do_verify(va);
    if (*bench_cmd) return do_bench(ba);
    if (*inspect_cmd) return do_inspect(inspect_path);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return exit_code(ErrorKind::NumericalFailure);
  }
  return 0;
}

}  // namespace aqc
