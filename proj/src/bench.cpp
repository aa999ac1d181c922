#include "aqc/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <set>
#include <sstream>

#include <json.hpp>

#include "aqc/errors.hpp"
#include "aqc/parallel.hpp"

namespace aqc {

namespace {

constexpr std::pair<Model, const char*> kModelNames[] = {
    {Model::IsingChain, "ising_chain"}, {Model::IsingCycle, "ising_cycle"},
    {Model::Kitaev, "kitaev"},          {Model::IsingCyclePlus, "ising_cycle_plus"},
    {Model::HeisChain, "heis_chain"},   {Model::MISChain, "mis_chain"},
    {Model::PXP, "pxp"},
};

PauliString zz(std::uint32_t a, std::uint32_t b) { return PauliString::pair(a, Pauli::Z, b, Pauli::Z); }

// c * n_i with n = (I - Z) / 2, identity dropped.
void add_n(std::vector<WeightedTerm>& out, double c, std::uint32_t i) {
  out.push_back({-c / 2.0, PauliString::single(i, Pauli::Z)});
}

// c * n_i n_j with n_i n_j = (I - Z_i - Z_j + Z_i Z_j) / 4, identity dropped.
void add_nn(std::vector<WeightedTerm>& out, double c, std::uint32_t i, std::uint32_t j) {
  out.push_back({-c / 4.0, PauliString::single(i, Pauli::Z)});
  out.push_back({-c / 4.0, PauliString::single(j, Pauli::Z)});
  out.push_back({c / 4.0, zz(i, j)});
}

std::vector<WeightedTerm> time_independent_terms(const BenchmarkSpec& s, double f) {
  const std::uint32_t n = s.n;
  std::vector<WeightedTerm> t;
  auto fields = [&](double h, Pauli p) {
    for (std::uint32_t i = 0; i < n; ++i) t.push_back({h, PauliString::single(i, p)});
  };
  auto chain = [&](double j, std::uint32_t step, bool wrap) {
    for (std::uint32_t i = 0; i < n; ++i) {
      if (i + step < n) {
        t.push_back({j, zz(i, i + step)});
      } else if (wrap && n > step) {
        t.push_back({j, zz(i, (i + step) % n)});
      }
    }
  };
  switch (s.model) {
    case Model::IsingChain:
      chain(f * s.param("J"), 1, false);
      fields(f * s.param("h"), Pauli::X);
      break;
    case Model::IsingCycle:
      chain(f * s.param("J"), 1, true);
      fields(f * s.param("h"), Pauli::X);
      break;
    case Model::Kitaev:
      chain(f * s.param("mu") / 2.0, 1, false);
      fields(-f * s.param("t"), Pauli::X);
      fields(-f * s.param("h"), Pauli::Z);
      break;
    case Model::IsingCyclePlus:
      chain(f * s.param("J"), 1, true);
      chain(f * s.param("J") / 64.0, 2, true);
      fields(f * s.param("h"), Pauli::X);
      break;
    case Model::HeisChain:
      for (std::uint32_t i = 0; i + 1 < n; ++i) {
        for (Pauli p : {Pauli::X, Pauli::Y, Pauli::Z}) t.push_back({f * s.param("J"), PauliString::pair(i, p, i + 1, p)});
      }
      fields(f * s.param("h"), Pauli::X);
      break;
    case Model::PXP:
      for (std::uint32_t i = 0; i + 1 < n; ++i) add_nn(t, f * s.param("J"), i, i + 1);
      fields(f * s.param("h"), Pauli::X);
      break;
    case Model::MISChain: break;
  }
  return t;
}

// MIS chain at normalized time tau.
std::vector<WeightedTerm> mis_terms(const BenchmarkSpec& s, double f, double tau) {
  std::vector<WeightedTerm> t;
  const double u = f * s.param("U"), omega = f * s.param("omega"), alpha = f * s.param("alpha");
  for (std::uint32_t i = 0; i < s.n; ++i) {
    add_n(t, (1.0 - 2.0 * tau) * u, i);
    t.push_back({omega / 2.0, PauliString::single(i, Pauli::X)});
  }
  for (std::uint32_t i = 0; i + 1 < s.n; ++i) add_nn(t, alpha, i, i + 1);
  return t;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::string to_string(Model m) {
  for (const auto& [model, name] : kModelNames) {
    if (model == m) return name;
  }
  return "unknown";
}

Model parse_model(std::string_view name) {
  for (const auto& [model, n] : kModelNames) {
    if (name == n) return model;
  }
  throw invalid_input("unknown model '" + std::string(name) + "'");
}

std::vector<Model> all_models() {
  std::vector<Model> out;
  for (const auto& [model, name] : kModelNames) out.push_back(model);
  return out;
}

bool is_cyclic(Model m) { return m == Model::IsingCycle || m == Model::IsingCyclePlus; }

double BenchmarkSpec::param(const std::string& name) const {
  auto it = params.find(name);
  return it == params.end() ? 1.0 : it->second;
}

PiecewiseTarget generate(const BenchmarkSpec& spec) {
  if (spec.n < 2) throw invalid_input("benchmark size must be at least 2");
  if (!(spec.t_target > 0.0)) throw invalid_input("benchmark t_target must be positive");
  const double f = to_internal_factor(spec.unit);
  const std::string name = to_string(spec.model) + "_" + std::to_string(spec.n);
  std::vector<TargetSegment> segments;
  if (spec.model == Model::MISChain) {
    if (spec.segments < 1) throw invalid_input("mis_chain needs at least one segment");
    const double d = spec.t_target / spec.segments;
    for (int k = 0; k < spec.segments; ++k) {
      const double tau = (k + 0.5) / spec.segments;
      segments.push_back({d, mis_terms(spec, f, tau)});
    }
  } else {
    segments.push_back({spec.t_target, time_independent_terms(spec, f)});
  }
  PiecewiseTarget target = PiecewiseTarget::make(spec.n, std::move(segments), name);
  target.unit = spec.unit;
  return target;
}

std::string to_string(AaisKind k) { return k == AaisKind::Rydberg ? "rydberg" : "heisenberg"; }

AaisKind parse_aais_kind(std::string_view name) {
  if (name == "rydberg") return AaisKind::Rydberg;
  if (name == "heisenberg") return AaisKind::Heisenberg;
  throw invalid_input("unknown AAIS kind '" + std::string(name) + "'");
}

AAIS bench_aais(AaisKind kind, const PiecewiseTarget& target, Model model, int dims) {
  const std::uint32_t n = target.n_qubits;
  if (kind == AaisKind::Rydberg) {
    RydbergLimits lim;
    lim.position.hi = std::max(75.0, 12.0 * n);
    return build_rydberg_aais(n, dims > 0 ? dims : (is_cyclic(model) ? 2 : 1), lim);
  }
  std::set<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (const auto& seg : target.segments) {
    for (const auto& t : seg.terms) {
      if (t.string.weight() != 2) continue;
      auto it = t.string.factors().begin();
      const std::uint32_t a = it->first;
      const std::uint32_t b = std::next(it)->first;
      edges.insert({a, b});
    }
  }
  std::vector<std::pair<std::uint32_t, std::uint32_t>> list(edges.begin(), edges.end());
  return build_heisenberg_aais(n, list);
}

std::vector<SuiteRow> run_suite(std::span<const Model> models, std::span<const std::uint32_t> sizes, AaisKind aais,
                                const SuiteOptions& options) {
  std::vector<SuiteRow> rows;
  for (Model m : models) {
    for (std::uint32_t n : sizes) {
      SuiteRow r;
      r.model = m;
      r.n = n;
      r.aais = aais;
      rows.push_back(r);
    }
  }
  parallel_for(rows.size(), options.cell_threads, [&](std::size_t i) {
    SuiteRow& r = rows[i];
    try {
      BenchmarkSpec spec;
      spec.model = r.model;
      spec.n = r.n;
      if (r.model == Model::MISChain) spec.segments = 4;
      const PiecewiseTarget target = generate(spec);
      const AAIS device = bench_aais(aais, target, r.model, options.dims);
      const auto t0 = std::chrono::steady_clock::now();
      const CompileResult res = compile_piecewise(target, device, options.compile);
      r.compile_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      r.t_machine = res.report.t_machine_total;
      r.error_l1 = res.report.error_l1;
      r.relative_error_pct = res.report.relative_error_pct;
      r.bound = res.report.bound;
      r.ok = true;
    } catch (const std::exception& e) {
      r.error = e.what();
    }
  });
  return rows;
}

std::string suite_csv(std::span<const SuiteRow> rows) {
  std::ostringstream os;
  os << "model,n,aais,status,compile_seconds,t_machine_us,error_l1,relative_error_pct,bound,error\n";
  for (const auto& r : rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), '"', '\'');
    os << to_string(r.model) << ',' << r.n << ',' << to_string(r.aais) << ',' << (r.ok ? "ok" : "failed") << ','
       << fmt_double(r.compile_seconds) << ',' << fmt_double(r.t_machine) << ',' << fmt_double(r.error_l1) << ','
       << (r.relative_error_pct ? fmt_double(*r.relative_error_pct) : "") << ',' << fmt_double(r.bound) << ",\""
       << err << "\"\n";
  }
  return os.str();
}

std::string suite_json(std::span<const SuiteRow> rows) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["model"] = to_string(r.model);
    j["n"] = r.n;
    j["aais"] = to_string(r.aais);
    j["status"] = r.ok ? "ok" : "failed";
    j["compile_seconds"] = r.compile_seconds;
    j["t_machine_us"] = r.t_machine;
    j["error_l1"] = r.error_l1;
    j["relative_error_pct"] = r.relative_error_pct ? nlohmann::ordered_json(*r.relative_error_pct) : nullptr;
    j["bound"] = r.bound;
    if (!r.ok) j["error"] = r.error;
    arr.push_back(std::move(j));
  }
  nlohmann::ordered_json doc;
  doc["format_version"] = 1;
  doc["rows"] = std::move(arr);
  return doc.dump(2) + "\n";
}

}  // namespace aqc
