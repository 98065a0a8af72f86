// Copyright 2026 The keldysh-map Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "keldysh/scenario.hpp"

#include <fftw3.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace keldysh {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError(path.empty() ? msg : path + ": " + msg);
}

const Json& req(const Json& j, const char* key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) fail(path, std::string("missing required field '") + key + "'");
  return j.at(key);
}

double num(const Json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "expected a finite number");
  return v;
}

double num_or(const Json& j, const char* key, double def, const std::string& path) {
  return j.contains(key) ? num(j.at(key), path + "." + key) : def;
}

int int_or(const Json& j, const char* key, int def, const std::string& path) {
  if (!j.contains(key)) return def;
  const Json& v = j.at(key);
  if (!v.is_number_integer()) fail(path + "." + key, "expected an integer");
  return v.get<int>();
}

std::string str(const Json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

std::string str_or(const Json& j, const char* key, const std::string& def, const std::string& path) {
  return j.contains(key) ? str(j.at(key), path + "." + key) : def;
}

bool bool_or(const Json& j, const char* key, bool def, const std::string& path) {
  if (!j.contains(key)) return def;
  if (!j.at(key).is_boolean()) fail(path + "." + key, "expected true or false");
  return j.at(key).get<bool>();
}

// A time is a number, {"periods": n, "omega": w}, or {"fraction": f} of tau.
double time_value(const Json& j, double tau, const std::string& path) {
  if (j.is_number()) return num(j, path);
  if (j.is_object() && j.contains("periods")) return num(j.at("periods"), path) * kTwoPi / num_or(j, "omega", 1.0, path);
  if (j.is_object() && j.contains("fraction")) return num(j.at("fraction"), path) * tau;
  fail(path, "expected a number, {\"periods\": n} or {\"fraction\": f}");
}

double time_or(const Json& j, const char* key, double def, double tau, const std::string& path) {
  return j.contains(key) ? time_value(j.at(key), tau, path + "." + key) : def;
}

template <class F>
auto guarded(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    fail(path, e.what());
  }
}

NoiseSpectrum parse_spectrum(const Json& j, const std::string& path) {
  if (j.is_string() && j.get<std::string>() == "none") return NoiseSpectrum();
  const std::string type = str(req(j, "type", path), path + ".type");
  return guarded(path, [&]() -> NoiseSpectrum {
    if (type == "none") return NoiseSpectrum();
    if (type == "white") return NoiseSpectrum(WhiteSpectrum{num(req(j, "gamma", path), path + ".gamma")});
    if (type == "ohmic")
      return NoiseSpectrum(OhmicSpectrum{num(req(j, "amplitude", path), path + ".amplitude"),
                                         num_or(j, "cutoff", 50.0, path)});
    if (type == "one-over-f")
      return NoiseSpectrum(OneOverFSpectrum{num(req(j, "amplitude", path), path + ".amplitude"),
                                            num(req(j, "omega_ir", path), path + ".omega_ir"),
                                            num(req(j, "omega_uv", path), path + ".omega_uv")});
    if (type == "tls")
      return NoiseSpectrum(TlsSpectrum{num(req(j, "weight", path), path + ".weight"),
                                       num(req(j, "omega", path), path + ".omega"),
                                       time_value(req(j, "t_relax", path), 0.0, path + ".t_relax")});
    if (type == "tabulated") {
      TabulatedSpectrum t;
      const Json& w = req(j, "omega", path);
      const Json& v = req(j, "value", path);
      if (!w.is_array() || !v.is_array()) fail(path, "tabulated omega and value must be arrays");
      for (std::size_t i = 0; i < w.size(); ++i) t.omega.push_back(num(w[i], path + ".omega"));
      for (std::size_t i = 0; i < v.size(); ++i) t.value.push_back(num(v[i], path + ".value"));
      return NoiseSpectrum(std::move(t));
    }
    if (type == "sum") {
      const Json& parts = req(j, "parts", path);
      if (!parts.is_array() || parts.empty()) fail(path + ".parts", "expected a non-empty array");
      SumSpectrum s;
      for (std::size_t i = 0; i < parts.size(); ++i)
        s.parts.push_back(parse_spectrum(parts[i], path + ".parts[" + std::to_string(i) + "]"));
      return NoiseSpectrum(std::move(s));
    }
    fail(path + ".type", "unknown spectrum type '" + type + "'");
  });
}

DriveEnvelope parse_envelope(const Json& j, double tau, const std::string& path) {
  const std::string type = str(req(j, "type", path), path + ".type");
  const auto sinusoid = [&]() {
    return SinusoidEnvelope{num(req(j, "amplitude", path), path + ".amplitude"), num_or(j, "omega", 0.0, path),
                            num_or(j, "phase", 0.0, path)};
  };
  return guarded(path, [&]() -> DriveEnvelope {
    if (type == "constant") return DriveEnvelope(ConstantEnvelope{num(req(j, "amplitude", path), path + ".amplitude")});
    if (type == "sinusoid") return DriveEnvelope(sinusoid());
    if (type == "hyperbolic")
      return DriveEnvelope(HyperbolicWindowEnvelope{time_value(req(j, "t_mid1", path), tau, path + ".t_mid1"),
                                                    time_value(req(j, "t_mid2", path), tau, path + ".t_mid2"),
                                                    time_value(req(j, "t_ramp", path), tau, path + ".t_ramp"),
                                                    sinusoid()});
    if (type == "switch-off")
      return DriveEnvelope(SwitchOffEnvelope{time_value(req(j, "t_mid", path), tau, path + ".t_mid"),
                                             time_value(req(j, "t_ramp", path), tau, path + ".t_ramp"), sinusoid()});
    if (type == "piecewise") {
      PiecewiseConstantEnvelope p;
      const Json& a = req(j, "amplitudes", path);
      if (!a.is_array()) fail(path + ".amplitudes", "expected an array");
      for (const auto& v : a) p.amplitudes.push_back(num(v, path + ".amplitudes"));
      p.tau = tau;
      if (j.contains("carrier_omega")) p.carrier_omega = num(j.at("carrier_omega"), path + ".carrier_omega");
      p.carrier_phase = num_or(j, "carrier_phase", 0.0, path);
      return DriveEnvelope(p);
    }
    if (type == "echo-pi") {
      EchoPiEnvelope e;
      e.center = time_or(j, "center", 0.5 * tau, tau, path);
      e.flat_width = time_or(j, "flat_width", 0.0, tau, path);
      e.sigma = time_value(req(j, "sigma", path), tau, path + ".sigma");
      e.area = num_or(j, "area", kPi, path);
      e.omega = num_or(j, "omega", 0.0, path);
      e.phase = num_or(j, "phase", 0.0, path);
      return DriveEnvelope(e);
    }
    fail(path + ".type", "unknown envelope type '" + type + "'");
  });
}

void qubit_operators(std::map<std::string, Operator>& ops) {
  ops["identity"] = identity_op(2);
  ops["sigma_x"] = sigma_x();
  ops["sigma_y"] = sigma_y();
  ops["sigma_z"] = sigma_z();
  ops["sigma_plus"] = sigma_plus();
  ops["sigma_minus"] = sigma_minus();
}

Operator parse_operator(const Json& j, const std::map<std::string, Operator>& ops, const std::string& path) {
  const auto lookup = [&](const std::string& name) -> const Operator& {
    auto it = ops.find(name);
    if (it == ops.end()) fail(path, "unknown operator '" + name + "' for this model template");
    return it->second;
  };
  if (j.is_string()) return lookup(j.get<std::string>());
  if (j.is_object() && !j.empty()) {
    Operator out;
    for (const auto& [name, w] : j.items()) {
      const Operator term = num(w, path + "." + name) * lookup(name);
      out = out.size() ? Operator(out + term) : term;
    }
    return out;
  }
  fail(path, "expected an operator name or an object of weights");
}

int next_pow2(double x) {
  int n = 1;
  while (n < x && n < (1 << 20)) n <<= 1;
  return n;
}

int auto_samples(const SystemModel& m, double tau) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m.h_static, Eigen::EigenvaluesOnly);
  double w = es.eigenvalues().maxCoeff() - es.eigenvalues().minCoeff();
  for (const auto& d : m.drives) w = std::max(w, d.envelope.max_frequency() + 2.0 * d.envelope.peak());
  return std::clamp(next_pow2(8.0 * w * tau / kPi), 256, 16384);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12e", v);
  return buf;
}

struct Csv {
  std::ofstream f;
  explicit Csv(const fs::path& p) : f(p) {
    if (!f) throw std::runtime_error("cannot write " + p.string());
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) f << (i ? "," : "") << cells[i];
    f << "\n";
  }
};

void write_strengths(const fs::path& p, const std::vector<StrengthEntry>& s) {
  Csv c(p);
  c.row({"k", "omega_k", "M_k"});
  for (const auto& e : s) c.row({std::to_string(e.k), fmt(e.omega), fmt(e.m)});
}

void write_pulse(const fs::path& p, const PulseParams& pulse, double tau) {
  Csv c(p);
  c.row({"t_start", "t_end", "amplitude"});
  const int n = pulse.segments();
  for (int i = 0; i < n; ++i)
    c.row({fmt(tau * i / n), fmt(tau * (i + 1) / n), fmt(pulse.amplitudes[static_cast<std::size_t>(i)])});
}

void write_json(const fs::path& p, const Json& j) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << j.dump(2) << "\n";
}

std::vector<double> guess_from(const Json& j, int segments, double tau, const std::string& path) {
  if (j.is_number()) return std::vector<double>(static_cast<std::size_t>(segments), num(j, path));
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "zero") return std::vector<double>(static_cast<std::size_t>(segments), 0.0);
    // Constant carrier amplitude whose rotating-wave area is pi.
    if (s == "pi-area") return std::vector<double>(static_cast<std::size_t>(segments), kPi / tau);
    fail(path, "unknown initial guess '" + s + "'");
  }
  if (j.is_array()) {
    if (static_cast<int>(j.size()) != segments) fail(path, "initial guess needs one amplitude per segment");
    std::vector<double> out;
    for (const auto& v : j) out.push_back(num(v, path));
    return out;
  }
  fail(path, "expected \"zero\", \"pi-area\", a number or an array");
}

}  // namespace

Operator ScenarioConfig::named_operator(const std::string& n) const {
  auto it = operators.find(n);
  if (it == operators.end()) throw ConfigError("unknown operator '" + n + "' for model template " + model_template);
  return it->second;
}

Operator ScenarioConfig::named_state(const std::string& n) const {
  const int d = model.dim();
  CVector ket;
  if (n == "g" || n == "0") {
    ket = basis_ket(d, 0);
  } else if (n == "e" || n == "1") {
    ket = basis_ket(d, 1);
  } else if (n == "plus" || n == "minus" || n == "plus_i") {
    ket = basis_ket(d, 0);
    const cplx c = n == "plus" ? cplx(1.0) : n == "minus" ? cplx(-1.0) : cplx(0.0, 1.0);
    ket += c * basis_ket(d, 1);
    ket /= std::sqrt(2.0);
  } else {
    throw ConfigError("unknown state '" + n + "' (use g, e, plus, minus, plus_i)");
  }
  return DensityMatrix::pure(ket).op();
}

Operator ScenarioConfig::named_unitary(const std::string& n) const {
  const int d = model.dim();
  if (n == "identity") return identity_op(d);
  if (d != 2) throw ConfigError("gate '" + n + "' is only defined for qubits");
  if (n == "x") return sigma_x();
  if (n == "y") return sigma_y();
  if (n == "z") return sigma_z();
  if (n == "sqrt_x") return matexp(Operator(cplx(0.0, -kPi / 4.0) * sigma_x()));
  if (n == "s") {
    Operator s = Operator::Identity(2, 2);
    s(1, 1) = cplx(0.0, 1.0);
    return s;
  }
  throw ConfigError("unknown gate '" + n + "'");
}

ScenarioConfig parse_scenario(const Json& j) {
  if (!j.is_object()) throw ConfigError("scenario: top level must be a JSON object");
  ScenarioConfig c;
  c.raw = j;
  c.name = str(req(j, "name", ""), "name");
  c.description = str_or(j, "description", "", "");
  c.tau = time_value(req(j, "tau", ""), 0.0, "tau");
  if (!(c.tau > 0.0)) fail("tau", "must be positive");

  const Json& m = req(j, "model", "");
  c.model_template = str(req(m, "template", "model"), "model.template");
  if (c.model_template == "qubit") {
    qubit_operators(c.operators);
    c.model.h_static = 0.5 * num_or(m, "omega_q", 1.0, "model") * sigma_z();
  } else if (c.model_template == "floquet-fluxonium-2level") {
    qubit_operators(c.operators);
    c.model.h_static = 0.5 * (num_or(m, "delta", 1.0, "model") * sigma_x() + num_or(m, "bias", 0.0, "model") * sigma_z());
  } else if (c.model_template == "oscillator") {
    const int dim = int_or(m, "dim", 12, "model");
    if (dim < 2) fail("model.dim", "must be >= 2");
    const Operator a = destroy(dim);
    c.operators["identity"] = identity_op(dim);
    c.operators["a"] = a;
    c.operators["adag"] = a.adjoint();
    c.operators["a_plus_adag"] = a + a.adjoint();
    c.operators["n"] = a.adjoint() * a;
    c.model.h_static = num_or(m, "omega_r", 1.0, "model") * c.operators["n"];
  } else {
    fail("model.template", "unknown template '" + c.model_template +
                               "' (expected qubit, floquet-fluxonium-2level or oscillator)");
  }

  c.model.coupling = parse_operator(req(j, "coupling", ""), c.operators, "coupling");
  if (!is_hermitian(c.model.coupling, 1e-12)) fail("coupling", "must be Hermitian");
  if (j.contains("drives")) {
    const Json& ds = j.at("drives");
    if (!ds.is_array()) fail("drives", "expected an array");
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const std::string p = "drives[" + std::to_string(i) + "]";
      const Operator op = parse_operator(req(ds[i], "operator", p), c.operators, p + ".operator");
      const std::string form = str_or(ds[i], "form", "lab", p);
      if (form != "lab" && form != "rotating") fail(p + ".form", "expected lab or rotating");
      c.model.drives.push_back(DriveTerm{op, parse_envelope(req(ds[i], "envelope", p), c.tau, p + ".envelope"),
                                         form == "lab" ? DriveForm::Lab : DriveForm::Rotating});
    }
  }
  if (c.model_template == "oscillator") {
    const Operator& x = c.operators.at("a_plus_adag");
    bool linear = (c.model.coupling - x).norm() < 1e-14;
    for (const auto& d : c.model.drives) linear = linear && d.form == DriveForm::Lab && (d.op - x).norm() < 1e-14;
    if (linear) c.displaced_omega_r = num_or(m, "omega_r", 1.0, "model");
  }
  guarded("model", [&] {
    c.model.validate();
    return 0;
  });
  c.spectrum = parse_spectrum(req(j, "spectrum", ""), "spectrum");

  c.n_t = j.contains("n_t") ? int_or(j, "n_t", 0, "") : auto_samples(c.model, c.tau);
  if (c.n_t < 2) fail("n_t", "must be >= 2");
  const std::string mode = str_or(j, "mode", "secular", "");
  if (mode != "secular" && mode != "fullwave") fail("mode", "expected secular or fullwave");
  c.mode = mode == "secular" ? MapMode::Secular : MapMode::Fullwave;
  c.k_cut = int_or(j, "k_cut", 0, "");
  if (c.k_cut < 0) fail("k_cut", "must be >= 0");
  c.lamb_shift = bool_or(j, "lamb_shift", true, "");
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) fail("seed", "expected a non-negative integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  c.output = str_or(j, "output", "out/" + c.name, "");

  const Json& a = req(j, "analysis", "");
  const std::string kind = str(req(a, "type", "analysis"), "analysis.type");
  if (kind == "filter-strengths")
    c.analysis = AnalysisKind::FilterStrengths;
  else if (kind == "map")
    c.analysis = AnalysisKind::Map;
  else if (kind == "time-sweep")
    c.analysis = AnalysisKind::TimeSweep;
  else if (kind == "optimize")
    c.analysis = AnalysisKind::Optimize;
  else if (kind == "repeat-gates")
    c.analysis = AnalysisKind::RepeatGates;
  else
    fail("analysis.type", "unknown analysis '" + kind + "'");
  c.analysis_options = a;

  // Resolve analysis-specific fields now so validation catches them.
  if (a.contains("initial_state")) c.named_state(str(a.at("initial_state"), "analysis.initial_state"));
  if (a.contains("target")) {
    if (!a.at("target").is_string()) fail("analysis.target", "expected a gate name");
    c.named_unitary(a.at("target").get<std::string>());
  }
  if (c.analysis == AnalysisKind::TimeSweep && int_or(a, "points", 41, "analysis") < 2)
    fail("analysis.points", "must be >= 2");
  if (c.analysis == AnalysisKind::Optimize) control_problem(c);
  return c;
}

ScenarioConfig load_scenario(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open scenario file " + path.string());
  Json j;
  try {
    j = Json::parse(f);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_scenario(j);
}

fs::path scenario_dir() {
  if (const char* env = std::getenv("KELDYSH_SCENARIO_DIR")) return env;
  return KELDYSH_SCENARIO_DIR;
}

std::vector<std::string> list_scenarios(const fs::path& dir) {
  std::vector<std::string> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".json") out.push_back(e.path().stem().string());
  std::sort(out.begin(), out.end());
  return out;
}

fs::path resolve_scenario(const std::string& s) {
  if (fs::exists(s)) return s;
  const fs::path p = scenario_dir() / (s + ".json");
  if (fs::exists(p)) return p;
  throw ConfigError("no scenario file or bundled scenario named '" + s + "'");
}

ScenarioConfig with_overrides(ScenarioConfig cfg, const RunOptions& o) {
  if (o.seed) cfg.seed = *o.seed;
  if (o.mode) cfg.mode = *o.mode;
  if (o.k_cut) {
    if (*o.k_cut < 0) throw ConfigError("--kcut must be >= 0");
    cfg.k_cut = *o.k_cut;
  }
  if (o.out_dir) cfg.output = o.out_dir->string();
  return cfg;
}

// ---- analyses -------------------------------------------------------------

FilterDecomposition decompose_model(const SystemModel& m, double tau, int n_t, double truncation_tol) {
  const std::vector<double> grid = uniform_grid(tau, n_t);
  Propagation p = propagate(m, grid, PropagateOptions{});
  DecomposeOptions o;
  o.truncation_tol = truncation_tol;
  return fourier_decompose(interaction_coupling(m, p.unitaries), tau, o);
}

namespace {

// Decomposition of the scenario's own coupling; u_s receives U_s(tau).
FilterDecomposition decompose_config(const ScenarioConfig& cfg, double tau, double tol, Operator* u_s = nullptr) {
  DecomposeOptions o;
  o.truncation_tol = tol;
  if (cfg.displaced_omega_r) {
    const double wr = *cfg.displaced_omega_r;
    std::vector<DriveEnvelope> env;
    for (const auto& d : cfg.model.drives) env.push_back(d.envelope);
    const Displacement disp = coherent_displacement(wr, env, tau, cfg.n_t);
    if (u_s) *u_s = matexp(Operator(cplx(0.0, -wr * tau) * cfg.operators.at("n")));
    return fourier_decompose(oscillator_coupling_samples(wr, cfg.model.dim(), disp), tau, o);
  }
  const std::vector<double> grid = uniform_grid(tau, cfg.n_t, true);
  Propagation p = propagate(cfg.model, grid, PropagateOptions{});
  if (u_s) *u_s = p.unitaries.back();
  p.unitaries.pop_back();
  return fourier_decompose(interaction_coupling(cfg.model, p.unitaries), tau, o);
}

}  // namespace

FilterStrengthResult filter_strength_analysis(const ScenarioConfig& cfg) {
  FilterStrengthResult r;
  const double tol = num_or(cfg.analysis_options, "truncation_tol", 1e-8, "analysis");
  r.decomposition = decompose_config(cfg, cfg.tau, tol);
  r.strengths = filter_strengths(r.decomposition);
  if (bool_or(cfg.analysis_options, "undriven_reference", false, "analysis")) {
    ScenarioConfig bare = cfg;
    bare.model.drives.clear();
    r.undriven = filter_strengths(decompose_config(bare, cfg.tau, tol));
  }
  return r;
}

MapAnalysis map_analysis(const ScenarioConfig& cfg, double tau, int threads) {
  MapAnalysis r;
  r.decomposition = decompose_config(cfg, tau, DecomposeOptions{}.truncation_tol, &r.u_s);
  MapOptions mo;
  mo.lamb_shift = cfg.lamb_shift;
  mo.threads = threads;
  r.result = build_keldysh_map(r.decomposition, cfg.spectrum, cfg.mode, cfg.k_cut, mo);
  return r;
}

SweepResult time_sweep(const ScenarioConfig& cfg, int threads) {
  const Json& a = cfg.analysis_options;
  const int points = int_or(a, "points", 41, "analysis");
  const Operator rho0 = cfg.named_state(str_or(a, "initial_state", "plus", "analysis"));
  const bool fullwave = bool_or(a, "fullwave", true, "analysis");
  const int k_cut = cfg.k_cut > 0 ? cfg.k_cut : int_or(a, "k_cut", 20, "analysis");
  std::vector<double> snaps;
  if (a.contains("snapshots"))
    for (const auto& v : a.at("snapshots")) snaps.push_back(num(v, "analysis.snapshots"));
  const auto element = [](const Operator& rho) { return std::abs(rho(1, 0)); };

  SweepResult out;
  MapOptions mo;
  mo.lamb_shift = cfg.lamb_shift;
  for (int i = 0; i < points; ++i) {
    const double tau = cfg.tau * i / (points - 1);
    SweepPoint pt;
    pt.tau = tau;
    if (i == 0) {
      pt.secular = element(rho0);
      if (fullwave) pt.fullwave = pt.secular;
      out.points.push_back(pt);
      continue;
    }
    // Each point is an independent map over [0, tau].
    FilterDecomposition d = decompose_config(cfg, tau, DecomposeOptions{}.truncation_tol);
    OverlapIntegrator integ(cfg.spectrum, tau);
    const int km = d.k_max();
    PhiTable table(integ, -km, km, fullwave, threads);
    KeldyshMapResult sec = build_keldysh_map(d, table, MapMode::Secular, 0, mo);
    pt.secular = element(sec.map.apply(rho0));
    pt.cptp = sec.cptp;
    if (fullwave) pt.fullwave = element(build_keldysh_map(d, table, MapMode::Fullwave, k_cut, mo).map.apply(rho0));
    out.points.push_back(pt);
  }
  for (double f : snaps) {
    if (!(f > 0.0)) throw ConfigError("analysis.snapshots: fractions must be positive");
    out.snapshots.emplace_back(f, filter_strengths(decompose_config(cfg, f * cfg.tau, DecomposeOptions{}.truncation_tol)));
  }
  return out;
}

ControlProblem control_problem(const ScenarioConfig& cfg, int threads) {
  const Json& a = cfg.analysis_options;
  const std::string path = "analysis";
  ControlProblem p;
  p.h_static = cfg.model.h_static;
  p.coupling = cfg.model.coupling;
  p.drive_op = cfg.named_operator(str_or(a, "drive_operator", "sigma_x", path));
  p.tau = cfg.tau;
  p.spectrum = cfg.spectrum;
  const Json& obj = req(a, "objective", path);
  const std::string type = str(req(obj, "type", path + ".objective"), path + ".objective.type");
  if (type == "state-transfer") {
    p.objective = StateTransferObjective{cfg.named_state(str_or(obj, "initial", "g", path)),
                                         cfg.named_state(str_or(obj, "target", "e", path))};
  } else if (type == "gate") {
    p.objective = GateObjective{cfg.named_unitary(str_or(obj, "target", "identity", path))};
  } else {
    fail(path + ".objective.type", "expected state-transfer or gate");
  }
  p.segments = int_or(a, "segments", 64, path);
  if (a.contains("bounds")) {
    const Json& b = a.at("bounds");
    if (!b.is_array() || b.size() != 2) fail(path + ".bounds", "expected [a_min, a_max]");
    p.a_min = num(b[0], path + ".bounds");
    p.a_max = num(b[1], path + ".bounds");
  }
  if (a.contains("carrier_omega")) p.carrier_omega = num(a.at("carrier_omega"), path + ".carrier_omega");
  p.carrier_phase = num_or(a, "carrier_phase", 0.0, path);
  p.n_t = int_or(a, "n_t", 1024, path);
  p.map.lamb_shift = cfg.lamb_shift;
  p.settings.iterations = int_or(a, "iterations", 500, path);
  p.settings.restarts = int_or(a, "restarts", 8, path);
  p.settings.momentum = num_or(a, "momentum", 0.9, path);
  p.settings.step = num_or(a, "step", 0.0, path);
  p.settings.restart_spread = num_or(a, "restart_spread", 0.25, path);
  p.settings.seed = cfg.seed;
  p.settings.threads = threads;
  if (a.contains("initial_guess")) p.initial = guess_from(a.at("initial_guess"), p.segments, p.tau, path + ".initial_guess");
  const std::string baseline = str_or(a, "baseline", "unaware", path);
  if (baseline != "unaware" && baseline != "idle") fail(path + ".baseline", "expected unaware or idle");
  guarded(path, [&] {
    p.validate();
    return 0;
  });
  return p;
}

OptimizationReport optimization_analysis(const ScenarioConfig& cfg, int threads) {
  const auto t0 = Clock::now();
  const Json& a = cfg.analysis_options;
  OptimizationReport r;
  ControlProblem p = control_problem(cfg, threads);
  r.baseline_kind = str_or(a, "baseline", "unaware", "analysis");
  ControlEvaluator aware(p);
  if (r.baseline_kind == "unaware") {
    ControlProblem q = p;
    q.noise_aware = false;
    q.settings.restarts = int_or(a, "baseline_restarts", 1, "analysis");
    ControlEvaluator closed(q);
    r.baseline = optimize(closed).best;
  } else {
    r.baseline = p.params(std::vector<double>(static_cast<std::size_t>(p.segments), 0.0));
  }
  r.baseline_detail = aware.evaluate_noisy(r.baseline);
  r.baseline_cost = r.baseline_detail.cost;
  r.aware = optimize(aware);
  r.improvement = r.baseline_cost / r.aware.cost;
  const int reps = int_or(a, "repeat", 0, "analysis");
  if (reps > 0) {
    const auto* gate = std::get_if<GateObjective>(&p.objective);
    if (!gate) throw ConfigError("analysis.repeat: only defined for gate objectives");
    const auto map_of = [&](const CostDetail& d) {
      return d.map ? d.map->map : SuperOperator::identity(p.dim());
    };
    r.repeat_aware = repeat_gate_fidelity(map_of(r.aware.final), r.aware.final.u_s, gate->u_target, reps);
    r.repeat_baseline = repeat_gate_fidelity(map_of(r.baseline_detail), r.baseline_detail.u_s, gate->u_target, reps);
  }
  r.seconds = seconds_since(t0);
  return r;
}

// ---- output ----------------------------------------------------------------

Json matrix_json(const Eigen::MatrixXcd& m) {
  Json rows = Json::array();
  for (int i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (int k = 0; k < m.cols(); ++k) row.push_back({m(i, k).real(), m(i, k).imag()});
    rows.push_back(row);
  }
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

Json cptp_json(const CptpReport& r) {
  return Json{{"min_choi_eigenvalue", r.min_choi_eigenvalue}, {"tp_defect", r.tp_defect}, {"tol", r.tol},
              {"cptp", r.cptp()}};
}

namespace {

Json strengths_summary(const std::vector<StrengthEntry>& s, int top) {
  std::vector<StrengthEntry> v = s;
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.m > b.m; });
  Json out = Json::array();
  for (int i = 0; i < top && i < static_cast<int>(v.size()); ++i)
    out.push_back({{"k", v[static_cast<std::size_t>(i)].k}, {"omega_k", v[static_cast<std::size_t>(i)].omega},
                   {"M_k", v[static_cast<std::size_t>(i)].m}});
  return out;
}

std::string mode_name(MapMode m) { return m == MapMode::Secular ? "secular" : "fullwave"; }

void write_manifest(const ScenarioConfig& cfg, const RunOptions& opts, const RunReport& rep, const std::string& command) {
  Json m;
  m["name"] = cfg.name;
  m["command"] = command;
  m["version"] = KELDYSH_VERSION;
  m["libraries"] = {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                  std::to_string(EIGEN_MINOR_VERSION)},
                    {"fftw", std::string(fftw_version)}};
  m["inputs"] = cfg.raw;
  m["effective"] = {{"tau", cfg.tau}, {"n_t", cfg.n_t}, {"mode", mode_name(cfg.mode)}, {"k_cut", cfg.k_cut},
                    {"seed", cfg.seed}, {"threads", opts.threads}, {"lamb_shift", cfg.lamb_shift}};
  Json t = Json::object();
  for (const auto& [k, v] : rep.timings) t[k] = v;
  m["timings_s"] = t;
  Json c = Json::array();
  bool all = true;
  for (const auto& e : rep.cptp) {
    Json x = cptp_json(e.report);
    x["label"] = e.label;
    all = all && e.report.cptp();
    c.push_back(x);
  }
  m["cptp_report"] = {{"all_cptp", all}, {"maps", c}};
  m["outputs"] = rep.files;
  m["summary"] = rep.summary;
  write_json(rep.out_dir / "manifest.json", m);
}

}  // namespace

RunReport run_scenario(const ScenarioConfig& cfg_in, const RunOptions& opts) {
  const auto t0 = Clock::now();
  const ScenarioConfig cfg = with_overrides(cfg_in, opts);
  RunReport rep;
  rep.out_dir = cfg.output;
  fs::create_directories(rep.out_dir);
  const auto out = [&](const std::string& f) {
    rep.files.push_back(f);
    return rep.out_dir / f;
  };
  const Json& a = cfg.analysis_options;

  switch (cfg.analysis) {
    case AnalysisKind::FilterStrengths: {
      FilterStrengthResult r = filter_strength_analysis(cfg);
      write_strengths(out("strengths.csv"), r.strengths);
      if (r.undriven) write_strengths(out("strengths_undriven.csv"), *r.undriven);
      rep.summary = {{"sum_rule", r.decomposition.sum_rule()},
                     {"discarded_strength", r.decomposition.discarded_strength()},
                     {"k_max", r.decomposition.k_max()},
                     {"omega_p", r.decomposition.omega_p()},
                     {"largest", strengths_summary(r.strengths, 6)}};
      break;
    }
    case AnalysisKind::Map: {
      MapAnalysis r = map_analysis(cfg, cfg.tau, opts.threads);
      write_strengths(out("strengths.csv"), filter_strengths(r.decomposition));
      write_json(out("map.json"), Json{{"dim", cfg.model.dim()},
                                       {"mode", mode_name(r.result.mode)},
                                       {"k_cut", r.result.k_cut},
                                       {"map", matrix_json(r.result.map.matrix())},
                                       {"sigma", matrix_json(r.result.sigma.matrix())},
                                       {"u_s", matrix_json(r.u_s)},
                                       {"frame", cfg.displaced_omega_r ? "displaced" : "interaction"}});
      rep.cptp.push_back({"map", r.result.cptp});
      rep.summary["decoherence_error"] = gate_error(r.u_s, r.u_s, r.result.map);
      if (a.contains("target")) rep.summary["gate_error"] = gate_error(cfg.named_unitary(a.at("target")), r.u_s, r.result.map);
      if (a.contains("initial_state")) {
        const Operator rho = r.result.map.apply(cfg.named_state(a.at("initial_state")));
        rep.summary["final_state"] = matrix_json(rho);
      }
      rep.summary["largest"] = strengths_summary(filter_strengths(r.decomposition), 6);
      break;
    }
    case AnalysisKind::TimeSweep: {
      SweepResult r = time_sweep(cfg, opts.threads);
      {
        Csv c(out("sweep.csv"));
        const bool fw = !r.points.empty() && r.points.back().fullwave.has_value();
        c.row(fw ? std::vector<std::string>{"tau", "abs_rho_eg_secular", "abs_rho_eg_fullwave"}
                 : std::vector<std::string>{"tau", "abs_rho_eg_secular"});
        for (const auto& p : r.points) {
          std::vector<std::string> row{fmt(p.tau), fmt(p.secular)};
          if (fw) row.push_back(fmt(*p.fullwave));
          c.row(row);
        }
      }
      for (std::size_t i = 1; i < r.points.size(); ++i)
        rep.cptp.push_back({"tau=" + fmt(r.points[i].tau), r.points[i].cptp});
      Json snaps = Json::array();
      for (const auto& [f, s] : r.snapshots) {
        char name[64];
        std::snprintf(name, sizeof name, "strengths_tau_%.3f.csv", f);
        write_strengths(out(name), s);
        snaps.push_back({{"fraction", f}, {"largest", strengths_summary(s, 4)}});
      }
      rep.summary["snapshots"] = snaps;
      break;
    }
    case AnalysisKind::Optimize: {
      OptimizationReport r = optimization_analysis(cfg, opts.threads);
      write_pulse(out("pulse_optimized.csv"), r.aware.best, cfg.tau);
      write_pulse(out("pulse_baseline.csv"), r.baseline, cfg.tau);
      {
        Csv c(out("trace.csv"));
        c.row({"iteration", "best_cost"});
        for (std::size_t i = 0; i < r.aware.trace.size(); ++i) c.row({std::to_string(i), fmt(r.aware.trace[i])});
      }
      write_strengths(out("strengths_optimized.csv"), filter_strengths(r.aware.final.decomposition));
      write_strengths(out("strengths_baseline.csv"), filter_strengths(r.baseline_detail.decomposition));
      if (!r.repeat_aware.empty()) {
        Csv c(out("repeat.csv"));
        c.row({"n", "fidelity_baseline", "fidelity_optimized"});
        for (std::size_t i = 0; i < r.repeat_aware.size(); ++i)
          c.row({std::to_string(i + 1), fmt(r.repeat_baseline[i]), fmt(r.repeat_aware[i])});
      }
      if (r.aware.final.map) rep.cptp.push_back({"optimized", r.aware.final.map->cptp});
      if (r.baseline_detail.map) rep.cptp.push_back({"baseline", r.baseline_detail.map->cptp});
      double peak = 0.0;
      for (double v : r.aware.best.amplitudes) peak = std::max(peak, std::abs(v));
      rep.summary = {{"baseline", r.baseline_kind},
                     {"baseline_cost", r.baseline_cost},
                     {"optimized_cost", r.aware.cost},
                     {"improvement_ratio", r.improvement},
                     {"iterations", r.aware.iterations},
                     {"converged", r.aware.converged},
                     {"best_restart", r.aware.best_restart},
                     {"restart_costs", r.aware.restart_costs},
                     {"peak_amplitude", peak}};
      rep.timings["optimize"] = r.seconds;
      write_json(out("summary.json"), rep.summary);
      break;
    }
    case AnalysisKind::RepeatGates: {
      MapAnalysis r = map_analysis(cfg, cfg.tau, opts.threads);
      const Operator target = cfg.named_unitary(str_or(a, "target", "identity", "analysis"));
      const int reps = int_or(a, "repeat", 10, "analysis");
      if (reps < 1) throw ConfigError("analysis.repeat: must be >= 1");
      const std::vector<double> f = repeat_gate_fidelity(r.result.map, r.u_s, target, reps);
      Csv c(out("repeat.csv"));
      c.row({"n", "fidelity"});
      for (std::size_t i = 0; i < f.size(); ++i) c.row({std::to_string(i + 1), fmt(f[i])});
      rep.cptp.push_back({"map", r.result.cptp});
      rep.summary = {{"gate_error", 1.0 - f.front()}};
      break;
    }
  }
  rep.timings["total"] = seconds_since(t0);
  rep.files.push_back("manifest.json");
  write_manifest(cfg, opts, rep, "run");
  return rep;
}

RunReport write_phi_table(const ScenarioConfig& cfg_in, const RunOptions& opts, int k_max, bool with_lines) {
  const auto t0 = Clock::now();
  const ScenarioConfig cfg = with_overrides(cfg_in, opts);
  if (k_max < 0) throw ConfigError("--kmax must be >= 0");
  RunReport rep;
  rep.out_dir = cfg.output;
  fs::create_directories(rep.out_dir);
  OverlapIntegrator integ(cfg.spectrum, cfg.tau);
  PhiTable table(integ, -k_max, k_max, with_lines, opts.threads);
  {
    Csv c(rep.out_dir / "phi_table.csv");
    std::vector<std::string> head{"k", "omega_k", "re_phi_kk", "im_phi_kk"};
    if (with_lines) head.insert(head.end(), {"re_J_k", "im_J_k"});
    c.row(head);
    for (int k = -k_max; k <= k_max; ++k) {
      const cplx v = table.diagonal(k);
      std::vector<std::string> row{std::to_string(k), fmt(k * kTwoPi / cfg.tau), fmt(v.real()), fmt(v.imag())};
      if (with_lines) {
        const cplx l = table.line(k);
        row.push_back(fmt(l.real()));
        row.push_back(fmt(l.imag()));
      }
      c.row(row);
    }
  }
  rep.files = {"phi_table.csv", "manifest.json"};
  rep.summary = {{"k_max", k_max}, {"tau", cfg.tau}, {"with_lines", with_lines}};
  rep.timings["total"] = seconds_since(t0);
  write_manifest(cfg, opts, rep, "phi-table");
  return rep;
}

}  // namespace keldysh
