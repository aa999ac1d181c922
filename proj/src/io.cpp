#include "aqc/io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "aqc/errors.hpp"

namespace aqc {

namespace {

using ojson = nlohmann::ordered_json;

ojson parse_json(std::string_view text, const std::string& what) {
  try {
    return ojson::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw invalid_input("malformed JSON in " + what + " at byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

const ojson& field(const ojson& j, const char* key, const std::string& what) {
  if (!j.is_object()) throw invalid_input(what + ": expected a JSON object");
  auto it = j.find(key);
  if (it == j.end()) throw invalid_input(what + ": missing field '" + key + "'");
  return *it;
}

double number(const ojson& j, const std::string& what) {
  if (!j.is_number()) throw invalid_input(what + ": expected a number");
  return j.get<double>();
}

std::string text(const ojson& j, const std::string& what) {
  if (!j.is_string()) throw invalid_input(what + ": expected a string");
  return j.get<std::string>();
}

template <typename T>
T opt(const ojson& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw invalid_input(std::string("field '") + key + "' has the wrong type");
  }
}

Bounds bounds_of(const ojson& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2) throw invalid_input(what + ": bounds must be [lo, hi]");
  return {number(j[0], what), number(j[1], what)};
}

Bounds opt_bounds(const ojson& j, const char* key, Bounds fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  return bounds_of(*it, std::string("field '") + key + "'");
}

std::uint32_t qubit_index(const std::string& key, const std::string& what) {
  std::size_t used = 0;
  unsigned long q = 0;
  try {
    q = std::stoul(key, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != key.size() || key.empty()) throw invalid_input(what + ": qubit key '" + key + "' is not an index");
  return static_cast<std::uint32_t>(q);
}

PauliString paulis_of(const ojson& j, const std::string& what) {
  if (!j.is_object()) throw invalid_input(what + ": 'paulis' must map qubit index to X, Y or Z");
  PauliString::Factors f;
  for (const auto& [key, value] : j.items()) {
    const std::string p = text(value, what);
    if (p == "I") continue;
    if (p.size() != 1) throw invalid_input(what + ": unknown Pauli '" + p + "'");
    try {
      f[qubit_index(key, what)] = pauli_from_char(p[0]);
    } catch (const Error&) {
      throw invalid_input(what + ": unknown Pauli '" + p + "'");
    }
  }
  return PauliString(std::move(f));
}

std::vector<WeightedTerm> terms_of(const ojson& j, double factor, const std::string& what) {
  if (!j.is_array()) throw invalid_input(what + ": 'terms' must be an array");
  std::vector<WeightedTerm> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string w = what + " term " + std::to_string(i);
    out.push_back({factor * number(field(j[i], "coeff", w), w), paulis_of(field(j[i], "paulis", w), w)});
  }
  return out;
}

// "Z0 Z1" -> PauliString; "I" -> identity.
PauliString parse_label(const std::string& label) {
  PauliString::Factors f;
  std::istringstream is(label);
  std::string tok;
  while (is >> tok) {
    if (tok == "I") continue;
    if (tok.size() < 2) throw invalid_input("bad Pauli label '" + label + "'");
    f[qubit_index(tok.substr(1), "Pauli label")] = pauli_from_char(tok[0]);
  }
  return PauliString(std::move(f));
}

ojson named_values(const std::vector<NamedValue>& values) {
  ojson o = ojson::object();
  for (const auto& v : values) o[v.id] = v.value;
  return o;
}

std::vector<NamedValue> named_values_of(const ojson& j, const std::string& what) {
  if (!j.is_object()) throw invalid_input(what + ": expected an object of variable values");
  std::vector<NamedValue> out;
  for (const auto& [k, v] : j.items()) out.push_back({k, number(v, what + "." + k)});
  return out;
}

Expr normalize_units(Expr e, const std::vector<AmplitudeVariable>& vars, double f) {
  if (f == 1.0) return e;
  for (VarIndex v : e.variables()) {
    if (vars[v].quantity == Quantity::Frequency) e = e.substituted(v, (1.0 / f) * Expr::var(v));
  }
  return (f * e).simplified();
}

Quantity parse_quantity(const std::string& q) {
  if (q == "frequency") return Quantity::Frequency;
  if (q == "length") return Quantity::Length;
  if (q == "angle") return Quantity::Angle;
  if (q == "dimensionless") return Quantity::Dimensionless;
  throw invalid_input("unknown quantity '" + q + "'");
}

AAIS custom_aais(const ojson& j) {
  const FrequencyUnit unit = parse_frequency_unit(opt<std::string>(j, "unit", "rad_per_us"));
  const double f = to_internal_factor(unit);
  const auto n_sites = static_cast<std::uint32_t>(number(field(j, "n_sites", "aais"), "aais.n_sites"));
  std::vector<AmplitudeVariable> vars;
  const ojson& jv = field(j, "variables", "aais");
  if (!jv.is_array()) throw invalid_input("aais: 'variables' must be an array");
  for (const auto& v : jv) {
    AmplitudeVariable var;
    var.id = text(field(v, "id", "variable"), "variable.id");
    const std::string what = "variable " + var.id;
    const std::string kind = opt<std::string>(v, "kind", "dynamic");
    if (kind == "fixed") {
      var.kind = VarKind::RuntimeFixed;
    } else if (kind == "dynamic") {
      var.kind = VarKind::RuntimeDynamic;
    } else {
      throw invalid_input(what + ": kind must be 'fixed' or 'dynamic'");
    }
    var.time_critical = opt<bool>(v, "time_critical", false);
    var.quantity = parse_quantity(opt<std::string>(v, "quantity", var.kind == VarKind::RuntimeFixed ? "length" : "frequency"));
    var.bounds = bounds_of(field(v, "bounds", what), what);
    if (var.quantity == Quantity::Frequency) var.bounds = {var.bounds.lo * f, var.bounds.hi * f};
    if (auto it = v.find("share_group"); it != v.end() && !it->is_null()) var.share_group = text(*it, what);
    var.resolution = opt<double>(v, "resolution", 0.0);
    vars.push_back(std::move(var));
  }
  std::map<std::string, VarIndex, std::less<>> ids;
  for (VarIndex i = 0; i < vars.size(); ++i) ids.emplace(vars[i].id, i);
  const NameResolver resolve = [&ids](std::string_view name) -> std::optional<VarIndex> {
    auto it = ids.find(name);
    if (it == ids.end()) return std::nullopt;
    return it->second;
  };
  std::vector<Instruction> instructions;
  const ojson& ji = field(j, "instructions", "aais");
  if (!ji.is_array()) throw invalid_input("aais: 'instructions' must be an array");
  for (const auto& ins_j : ji) {
    Instruction ins;
    ins.name = text(field(ins_j, "name", "instruction"), "instruction.name");
    const std::string what = "instruction " + ins.name;
    for (const auto& e : field(ins_j, "effects", what)) {
      Expr expr = parse_expr(text(field(e, "expr", what), what), resolve);
      ins.effects.push_back({normalize_units(std::move(expr), vars, f), paulis_of(field(e, "paulis", what), what)});
    }
    instructions.push_back(std::move(ins));
  }
  std::vector<Site> sites;
  if (auto it = j.find("sites"); it != j.end()) {
    for (const auto& s : *it) {
      Site site;
      for (const auto& c : s) {
        const std::string id = text(c, "site coordinate");
        auto found = ids.find(id);
        if (found == ids.end()) throw invalid_input("site references unknown variable '" + id + "'");
        site.coords.push_back(found->second);
      }
      sites.push_back(std::move(site));
    }
  }
  std::optional<double> t_max;
  if (auto it = j.find("t_machine_max"); it != j.end() && !it->is_null()) t_max = number(*it, "t_machine_max");
  AAIS a = AAIS::make(n_sites, std::move(vars), std::move(instructions), std::move(sites),
                      opt<double>(j, "min_separation", 0.0), t_max);
  a.display_unit = unit;
  a.description = "custom n_sites=" + std::to_string(n_sites);
  return a;
}

AAIS preset_aais(const ojson& j, const std::string& preset) {
  const auto n_sites = static_cast<std::uint32_t>(number(field(j, "n_sites", "aais"), "aais.n_sites"));
  const FrequencyUnit unit = parse_frequency_unit(opt<std::string>(j, "unit", "MHz"));
  auto t_max = [&](std::optional<double> fallback) -> std::optional<double> {
    auto it = j.find("t_machine_max");
    if (it == j.end()) return fallback;
    if (it->is_null()) return std::nullopt;
    return number(*it, "t_machine_max");
  };
  if (preset == "rydberg") {
    RydbergLimits lim;
    lim.unit = unit;
    lim.delta = opt_bounds(j, "delta", lim.delta);
    lim.omega = opt_bounds(j, "omega", lim.omega);
    lim.phi = opt_bounds(j, "phi", lim.phi);
    lim.position = opt_bounds(j, "position", lim.position);
    lim.min_separation = opt<double>(j, "min_separation", lim.min_separation);
    lim.position_resolution = opt<double>(j, "position_resolution", lim.position_resolution);
    lim.t_machine_max = t_max(lim.t_machine_max);
    return build_rydberg_aais(n_sites, opt<int>(j, "dims", 1), lim);
  }
  if (preset == "heisenberg") {
    HeisenbergLimits lim;
    lim.unit = unit;
    lim.amplitude = opt_bounds(j, "amplitude", lim.amplitude);
    lim.t_machine_max = t_max(lim.t_machine_max);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    if (auto it = j.find("edges"); it != j.end()) {
      for (const auto& e : *it) {
        if (!e.is_array() || e.size() != 2) throw invalid_input("aais: each edge must be [a, b]");
        edges.emplace_back(e[0].get<std::uint32_t>(), e[1].get<std::uint32_t>());
      }
    } else {
      for (std::uint32_t i = 0; i + 1 < n_sites; ++i) edges.emplace_back(i, i + 1);
    }
    return build_heisenberg_aais(n_sites, edges, lim);
  }
  throw invalid_input("unknown AAIS preset '" + preset + "'");
}

ojson report_json(const CompilationReport& r, bool include_timings) {
  ojson j;
  ojson terms = ojson::array();
  for (std::size_t i = 0; i < r.term_index.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    terms.push_back({{"term", r.term_index[i].to_string()}, {"b_tar", r.b_tar[k]}, {"b_sim", r.b_sim[k]}});
  }
  j["terms"] = std::move(terms);
  j["error_l1"] = r.error_l1;
  j["relative_error_pct"] = r.relative_error_pct ? ojson(*r.relative_error_pct) : ojson(nullptr);
  j["eps1"] = r.eps1;
  j["eps2"] = r.eps2;
  j["m_norm1"] = r.m_norm1;
  j["bound"] = r.bound;
  j["t_machine_total_us"] = r.t_machine_total;
  j["refined"] = r.refined;
  j["error_before_refine"] = r.error_before_refine;
  j["warnings"] = r.warnings;
  if (include_timings) {
    ojson t = ojson::object();
    for (const auto& [stage, secs] : r.stage_timings) t[stage] = secs;
    j["stage_timings"] = std::move(t);
  }
  return j;
}

void check_version(const ojson& j, const std::string& what) {
  const ojson& v = field(j, "format_version", what);
  if (!v.is_number_integer() || v.get<int>() != kFormatVersion) {
    throw invalid_input(what + ": unsupported format_version (expected " + std::to_string(kFormatVersion) + ")");
  }
}

}  // namespace

PiecewiseTarget parse_target(std::string_view json_text, const std::string& default_name) {
  const ojson j = parse_json(json_text, "target");
  try {
    const auto n = static_cast<std::uint32_t>(number(field(j, "n_qubits", "target"), "target.n_qubits"));
    const FrequencyUnit unit = parse_frequency_unit(text(field(j, "unit", "target"), "target.unit"));
    const double f = to_internal_factor(unit);
    const std::string name = opt<std::string>(j, "name", default_name);
    PiecewiseTarget out;
    if (j.contains("segments")) {
      std::vector<TargetSegment> segs;
      const ojson& js = j["segments"];
      if (!js.is_array()) throw invalid_input("target: 'segments' must be an array");
      for (std::size_t i = 0; i < js.size(); ++i) {
        const std::string what = "target segment " + std::to_string(i);
        segs.push_back({number(field(js[i], "duration", what), what), terms_of(field(js[i], "terms", what), f, what)});
      }
      out = PiecewiseTarget::make(n, std::move(segs), name);
    } else {
      const double t = number(field(j, "t_target", "target"), "target.t_target");
      out = PiecewiseTarget::from_single(
          TargetHamiltonian::make(n, terms_of(field(j, "terms", "target"), f, "target"), t, name));
    }
    out.unit = unit;
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw invalid_input(std::string("target: ") + e.what());
  }
}

PiecewiseTarget load_target(const std::filesystem::path& path) {
  return parse_target(read_file(path), path.stem().string());
}

AAIS parse_aais(std::string_view json_text) {
  const ojson j = parse_json(json_text, "aais");
  try {
    if (auto it = j.find("preset"); it != j.end()) return preset_aais(j, text(*it, "aais.preset"));
    return custom_aais(j);
  } catch (const nlohmann::json::exception& e) {
    throw invalid_input(std::string("aais: ") + e.what());
  }
}

AAIS load_aais(const std::filesystem::path& path) { return parse_aais(read_file(path)); }

std::string schedule_to_json(const PulseSchedule& schedule, const CompilationReport* report,
                             const ScheduleFileOptions& options) {
  ojson j;
  j["format_version"] = kFormatVersion;
  j["target"] = schedule.target_name;
  j["aais"] = schedule.aais_ref;
  j["unit"] = to_string(schedule.unit);
  j["t_total_us"] = schedule.total_time();
  j["fixed"] = named_values(schedule.fixed);
  ojson segs = ojson::array();
  for (const auto& s : schedule.segments) {
    ojson js;
    js["t_machine_us"] = s.t_machine_us;
    js["dynamic"] = named_values(s.dynamic);
    segs.push_back(std::move(js));
  }
  j["segments"] = std::move(segs);
  if (report) j["report"] = report_json(*report, options.include_timings);
  return j.dump(2) + "\n";
}

PulseSchedule parse_schedule(std::string_view json_text) {
  const ojson j = parse_json(json_text, "schedule");
  try {
    check_version(j, "schedule");
    PulseSchedule s;
    s.unit = parse_frequency_unit(text(field(j, "unit", "schedule"), "schedule.unit"));
    s.target_name = opt<std::string>(j, "target", "");
    s.aais_ref = opt<std::string>(j, "aais", "");
    s.fixed = named_values_of(field(j, "fixed", "schedule"), "schedule.fixed");
    const ojson& segs = field(j, "segments", "schedule");
    if (!segs.is_array()) throw invalid_input("schedule: 'segments' must be an array");
    for (std::size_t i = 0; i < segs.size(); ++i) {
      const std::string what = "schedule segment " + std::to_string(i);
      ScheduleSegment seg;
      seg.t_machine_us = number(field(segs[i], "t_machine_us", what), what);
      seg.dynamic = named_values_of(field(segs[i], "dynamic", what), what);
      s.segments.push_back(std::move(seg));
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw invalid_input(std::string("schedule: ") + e.what());
  }
}

PulseSchedule load_schedule(const std::filesystem::path& path) { return parse_schedule(read_file(path)); }

CompilationReport parse_embedded_report(std::string_view json_text) {
  const ojson j = parse_json(json_text, "schedule");
  try {
    const ojson& r = field(j, "report", "schedule");
    CompilationReport out;
    const ojson& terms = field(r, "terms", "report");
    out.b_sim.resize(static_cast<Eigen::Index>(terms.size()));
    out.b_tar.resize(static_cast<Eigen::Index>(terms.size()));
    for (std::size_t i = 0; i < terms.size(); ++i) {
      out.term_index.push_back(parse_label(text(field(terms[i], "term", "report"), "report.term")));
      out.b_tar[static_cast<Eigen::Index>(i)] = number(field(terms[i], "b_tar", "report"), "report.b_tar");
      out.b_sim[static_cast<Eigen::Index>(i)] = number(field(terms[i], "b_sim", "report"), "report.b_sim");
    }
    out.error_l1 = number(field(r, "error_l1", "report"), "report.error_l1");
    if (auto it = r.find("relative_error_pct"); it != r.end() && !it->is_null()) out.relative_error_pct = it->get<double>();
    out.eps1 = opt<double>(r, "eps1", 0.0);
    out.eps2 = opt<std::vector<double>>(r, "eps2", {});
    out.m_norm1 = opt<double>(r, "m_norm1", 0.0);
    out.bound = opt<double>(r, "bound", 0.0);
    out.t_machine_total = opt<double>(r, "t_machine_total_us", 0.0);
    out.refined = opt<bool>(r, "refined", false);
    out.error_before_refine = opt<double>(r, "error_before_refine", 0.0);
    out.warnings = opt<std::vector<std::string>>(r, "warnings", {});
    if (auto it = r.find("stage_timings"); it != r.end()) {
      for (const auto& [k, v] : it->items()) out.stage_timings.emplace_back(k, v.get<double>());
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw invalid_input(std::string("report: ") + e.what());
  }
}

std::string eqsys_to_json(const GlobalLinearSystem& sys, std::span<const LocalSystem> components, const AAIS& aais) {
  auto name = [&aais](VarIndex v) { return aais.variable(v).id; };
  ojson j;
  j["format_version"] = kFormatVersion;
  ojson terms = ojson::array();
  for (const auto& t : sys.term_index) terms.push_back(t.to_string());
  j["term_index"] = std::move(terms);
  j["rows"] = sys.rows();
  j["cols"] = sys.cols();
  ojson m = ojson::array();
  for (int k = 0; k < sys.matrix.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(sys.matrix, k); it; ++it) {
      m.push_back({it.row(), it.col(), it.value()});
    }
  }
  j["M"] = std::move(m);
  j["rhs"] = std::vector<double>(sys.rhs.data(), sys.rhs.data() + sys.rhs.size());
  ojson synth = ojson::array();
  for (const auto& s : sys.synth_vars) {
    ojson js;
    js["id"] = s.id;
    js["expr"] = s.defining_expr.to_string(name);
    js["instruction"] = aais.instructions().at(s.source_instruction).name;
    ojson vars = ojson::array();
    for (VarIndex v : s.amplitude_vars) vars.push_back(name(v));
    js["amplitude_vars"] = std::move(vars);
    synth.push_back(std::move(js));
  }
  j["synthesized"] = std::move(synth);
  ojson comps = ojson::array();
  for (const auto& c : components) {
    ojson jc;
    jc["id"] = c.component_id;
    ojson vars = ojson::array();
    for (VarIndex v : c.amplitude_vars) vars.push_back(name(v));
    jc["amplitude_vars"] = std::move(vars);
    jc["synth_vars"] = c.synth_vars;
    jc["has_fixed_vars"] = c.has_fixed_vars;
    jc["time_critical_var"] = c.time_critical_var ? ojson(name(*c.time_critical_var)) : ojson(nullptr);
    comps.push_back(std::move(jc));
  }
  j["components"] = std::move(comps);
  return j.dump(2) + "\n";
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw invalid_input("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw invalid_input("cannot write " + path.string());
  out << content;
  if (!out) throw invalid_input("failed writing " + path.string());
}

}  // namespace aqc
