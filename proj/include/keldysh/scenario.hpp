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


#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "keldysh/control.hpp"
#include "keldysh/core.hpp"
#include "keldysh/filter.hpp"
#include "keldysh/maps.hpp"
#include "keldysh/propagator.hpp"
#include "keldysh/spectra.hpp"

namespace keldysh {

using Json = nlohmann::ordered_json;

// Schema or semantic error in a scenario file; maps to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class AnalysisKind { FilterStrengths, Map, TimeSweep, Optimize, RepeatGates };

struct ScenarioConfig {
  std::string name;
  std::string description;
  Json raw;

  std::string model_template;
  SystemModel model;
  // Set when an oscillator is driven and coupled only through a + a^dag: x(t)
  // then comes from the exact displaced frame instead of truncated propagation.
  std::optional<double> displaced_omega_r;
  // Named operators of the template ("sigma_x", "a_plus_adag", ...).
  std::map<std::string, Operator> operators;
  NoiseSpectrum spectrum;
  double tau = 1.0;
  int n_t = 1024;
  MapMode mode = MapMode::Secular;
  int k_cut = 0;
  bool lamb_shift = true;
  std::uint64_t seed = 1;
  std::string output = "out";

  AnalysisKind analysis = AnalysisKind::Map;
  Json analysis_options;

  Operator named_operator(const std::string& name) const;
  // Pure state or density matrix by name ("g", "e", "plus", ...).
  Operator named_state(const std::string& name) const;
  Operator named_unitary(const std::string& name) const;
};

ScenarioConfig parse_scenario(const Json& j);
ScenarioConfig load_scenario(const std::filesystem::path& path);

std::filesystem::path scenario_dir();
std::vector<std::string> list_scenarios(const std::filesystem::path& dir = scenario_dir());
// A path to an existing file or the name of a bundled scenario.
std::filesystem::path resolve_scenario(const std::string& name_or_path);

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::optional<MapMode> mode;
  std::optional<int> k_cut;
};

// Applies command-line overrides to a parsed configuration.
ScenarioConfig with_overrides(ScenarioConfig cfg, const RunOptions& opts);

struct CptpEntry {
  std::string label;
  CptpReport report;
};

struct RunReport {
  std::filesystem::path out_dir;
  std::vector<std::string> files;
  std::vector<CptpEntry> cptp;
  std::map<std::string, double> timings;
  Json summary;
};

// ---- analyses -------------------------------------------------------------

struct FilterStrengthResult {
  FilterDecomposition decomposition;
  std::vector<StrengthEntry> strengths;
  std::optional<std::vector<StrengthEntry>> undriven;  // reference without drives
};

FilterDecomposition decompose_model(const SystemModel& m, double tau, int n_t, double truncation_tol = 1e-8);
FilterStrengthResult filter_strength_analysis(const ScenarioConfig& cfg);

struct MapAnalysis {
  FilterDecomposition decomposition;
  KeldyshMapResult result;
  Operator u_s;
};

MapAnalysis map_analysis(const ScenarioConfig& cfg, double tau, int threads = 1);

struct SweepPoint {
  double tau = 0.0;
  double secular = 0.0;
  std::optional<double> fullwave;
  CptpReport cptp;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  std::vector<std::pair<double, std::vector<StrengthEntry>>> snapshots;
};

SweepResult time_sweep(const ScenarioConfig& cfg, int threads = 1);

ControlProblem control_problem(const ScenarioConfig& cfg, int threads = 1);

struct OptimizationReport {
  OptimizeResult aware;
  std::string baseline_kind;  // "unaware" or "idle"
  PulseParams baseline;
  double baseline_cost = 0.0;  // noisy cost of the baseline pulse
  CostDetail baseline_detail;
  double improvement = 0.0;
  std::vector<double> repeat_aware;
  std::vector<double> repeat_baseline;
  double seconds = 0.0;
};

OptimizationReport optimization_analysis(const ScenarioConfig& cfg, int threads = 1);

// ---- top level -------------------------------------------------------------

RunReport run_scenario(const ScenarioConfig& cfg, const RunOptions& opts);
// Writes phi_{k,k} (and J_k when lines are requested) for |k| <= k_max.
RunReport write_phi_table(const ScenarioConfig& cfg, const RunOptions& opts, int k_max, bool with_lines);

Json matrix_json(const Eigen::MatrixXcd& m);
Json cptp_json(const CptpReport& r);

}  // namespace keldysh
