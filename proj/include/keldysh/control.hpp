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
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "keldysh/core.hpp"
#include "keldysh/filter.hpp"
#include "keldysh/maps.hpp"
#include "keldysh/propagator.hpp"
#include "keldysh/spectra.hpp"

namespace keldysh {

struct PulseParams {
  std::vector<double> amplitudes;
  double a_min = -0.3;
  double a_max = 0.3;

  int segments() const { return static_cast<int>(amplitudes.size()); }
  double range() const { return a_max - a_min; }
  void validate() const;
};

struct StateTransferObjective {
  Operator rho_init;
  Operator rho_target;
};

struct GateObjective {
  Operator u_target;
};

using ControlObjective = std::variant<StateTransferObjective, GateObjective>;

struct OptimizerSettings {
  int iterations = 500;
  double step = 0.0;  // 0: 1e-2 * (a_max - a_min)
  double momentum = 0.9;
  int restarts = 8;
  std::uint64_t seed = 1;
  int threads = 1;
  // Restarts after the first perturb the initial guess by uniform noise of
  // this fraction of the bound range.
  double restart_spread = 0.25;
  // Stop after `patience` accepted steps that each gain less than ftol (relative).
  double ftol = 1e-7;
  int patience = 15;
};

struct ControlProblem {
  Operator h_static;
  Operator drive_op;
  Operator coupling;
  double tau = 1.0;
  NoiseSpectrum spectrum;
  ControlObjective objective;

  int segments = 64;
  double a_min = -0.3;
  double a_max = 0.3;
  // d(t) = a_i cos(carrier_omega t + carrier_phase) when set, otherwise d(t) = a_i.
  std::optional<double> carrier_omega;
  double carrier_phase = 0.0;
  bool noise_aware = true;
  int n_t = 1024;
  double step_tol = 1e-6;
  MapOptions map;
  OptimizerSettings settings;
  std::optional<std::vector<double>> initial;

  int dim() const { return static_cast<int>(h_static.rows()); }
  void validate() const;
  PulseParams params(std::vector<double> amplitudes) const;
  SystemModel model(const PulseParams& p) const;
};

struct CostDetail {
  double cost = 0.0;
  Operator u_s;
  FilterDecomposition decomposition;
  std::optional<KeldyshMapResult> map;  // empty when the map is the identity
};

// Owns the drive-independent pieces (phi table, step count) of one problem.
class ControlEvaluator {
 public:
  explicit ControlEvaluator(ControlProblem problem);

  const ControlProblem& problem() const { return problem_; }
  int substeps() const { return substeps_; }
  bool uses_map() const { return table_.has_value(); }

  CostDetail evaluate(const PulseParams& p) const;
  // Same pulse, cost under the noise model regardless of noise_aware.
  CostDetail evaluate_noisy(const PulseParams& p) const;
  double cost(const PulseParams& p) const { return evaluate(p).cost; }
  // Central differences with h = 1e-5 (a_max - a_min); only the perturbed
  // segment is re-propagated.
  std::vector<double> gradient(const PulseParams& p) const;
  std::vector<double> gradient(const PulseParams& p, int threads) const;

 private:
  std::vector<Operator> forward(const PulseParams& p) const;
  void check_unitaries(const std::vector<Operator>& us) const;
  CostDetail finish(std::vector<Operator> us, bool with_map) const;
  double perturbed_cost(const std::vector<double>& a, const std::vector<Operator>& base, int seg, double delta) const;
  void ensure_table() const;

  ControlProblem problem_;
  std::vector<double> grid_;
  int substeps_ = 1;
  mutable std::optional<PhiTable> table_;
};

using ScalarFunction = std::function<double(const std::vector<double>&)>;
using GradientFunction = std::function<std::vector<double>(const std::vector<double>&)>;

// Central differences with per-component step h.
std::vector<double> fd_gradient(const ScalarFunction& f, const std::vector<double>& x, double h, int threads = 1);

struct DescentResult {
  std::vector<double> x;
  double value = 0.0;
  std::vector<double> trace;  // best-so-far after each iteration, starting with f(x0)
  int iterations = 0;
  bool converged = false;
};

// Projected gradient descent with heavy-ball momentum and backtracking.
DescentResult descend(const ScalarFunction& f, const GradientFunction& grad, std::vector<double> x0, double lo,
                      double hi, const OptimizerSettings& s);

struct OptimizeResult {
  PulseParams best;
  double cost = 0.0;
  std::vector<double> trace;  // of the winning restart
  std::vector<double> restart_costs;
  int best_restart = 0;
  int iterations = 0;
  bool converged = false;
  CostDetail final;
};

OptimizeResult optimize(const ControlProblem& problem);
OptimizeResult optimize(const ControlEvaluator& evaluator);

// E_gate of (V_target^dag V_s Pi)^n for n = 1..n_reps.
std::vector<double> repeat_gate_error(const SuperOperator& map, const Operator& u_s, const Operator& u_target,
                                      int n_reps);
std::vector<double> repeat_gate_fidelity(const SuperOperator& map, const Operator& u_s, const Operator& u_target,
                                         int n_reps);

}  // namespace keldysh
