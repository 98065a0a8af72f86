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

#include <optional>
#include <variant>
#include <vector>

#include "keldysh/core.hpp"

namespace keldysh {

// Every envelope is evaluated as a complex signal c(t); the lab-frame drive
// value is Re c(t), and the rotating-wave form uses c(t) directly.

struct ConstantEnvelope {
  double amplitude = 0.0;
};

// d cos(w t + phase), c(t) = d exp(-i (w t + phase)).
struct SinusoidEnvelope {
  double amplitude = 0.0;
  double omega = 0.0;
  double phase = 0.0;
};

// F(t) = [1 + tanh((t - t1)/(pi tr))][1 + tanh((t2 - t)/(pi tr))] / 4 times a sinusoid.
struct HyperbolicWindowEnvelope {
  double t_mid1 = 0.0;
  double t_mid2 = 0.0;
  double t_ramp = 1.0;
  SinusoidEnvelope inner;
};

// F(t) = [1 + tanh((t_mid - t)/(pi tr))] / 2 times a sinusoid.
struct SwitchOffEnvelope {
  double t_mid = 0.0;
  double t_ramp = 1.0;
  SinusoidEnvelope inner;
};

// Uniform segments on [0, tau]. With a carrier, c(t) = a_i exp(-i (w t + phase)).
struct PiecewiseConstantEnvelope {
  std::vector<double> amplitudes;
  double tau = 1.0;
  std::optional<double> carrier_omega;
  double carrier_phase = 0.0;
};

// Gaussian-flattop pulse centred at `center`: flat for |t - center| <= flat_width/2,
// Gaussian flanks of width sigma, carrier w. The peak is fixed by the rotation
// angle `area` = integral of the slow amplitude.
struct EchoPiEnvelope {
  double center = 0.0;
  double flat_width = 0.0;
  double sigma = 1.0;
  double area = kPi;
  double omega = 1.0;
  double phase = 0.0;
};

class DriveEnvelope {
 public:
  using Variant = std::variant<ConstantEnvelope, SinusoidEnvelope, HyperbolicWindowEnvelope,
                               SwitchOffEnvelope, PiecewiseConstantEnvelope, EchoPiEnvelope>;

  DriveEnvelope(Variant v);
  const Variant& variant() const { return v_; }

  cplx signal(double t) const;
  double value(double t) const { return signal(t).real(); }
  // Fastest oscillation frequency carried by the signal.
  double max_frequency() const;
  // Carrier period if the signal is exactly periodic.
  std::optional<double> period() const;
  // Upper bound of |c(t)|.
  double peak() const;

 private:
  Variant v_;
};

enum class DriveForm { Lab, Rotating };

// Lab: H += Re c(t) * op (op Hermitian).
// Rotating: H += c(t)/2 * op + h.c. (op is the raising part, e.g. sigma_plus).
struct DriveTerm {
  Operator op;
  DriveEnvelope envelope;
  DriveForm form = DriveForm::Lab;
};

struct SystemModel {
  Operator h_static;
  std::vector<DriveTerm> drives;
  Operator coupling;

  int dim() const { return static_cast<int>(h_static.rows()); }
  void validate() const;
  Operator hamiltonian(double t) const;
};

struct PropagateOptions {
  int substeps = 0;           // 0: choose from the fastest time scale
  int substeps_per_period = 64;
  double step_tol = 1e-6;     // step doubling until U(t_end) changes by <= step_tol; 0 disables
  int max_doublings = 16;
  int order = 2;              // 2: midpoint rule, 4: two-node Magnus
};

struct Propagation {
  std::vector<Operator> unitaries;
  int substeps = 1;
  double step_change = 0.0;  // max-abs change of U(t_end) under the last halving (0 if unchecked)
};

// U(t_j) relative to t_grid.front(), by midpoint piecewise exponentials.
std::vector<Operator> propagate(const SystemModel& model, const std::vector<double>& t_grid, int substeps,
                               int order = 2);
Propagation propagate(const SystemModel& model, const std::vector<double>& t_grid, const PropagateOptions& opts);

int default_substeps(const SystemModel& model, const std::vector<double>& t_grid, int per_period = 64);

std::vector<Operator> interaction_coupling(const SystemModel& model, const std::vector<Operator>& unitaries);

std::vector<double> uniform_grid(double tau, int n, bool include_end = false);

// exp(-i H dt) for Hermitian H.
Operator unitary_step(const Operator& h, double dt);

struct Displacement {
  std::vector<double> t;
  std::vector<cplx> alpha;
  cplx alpha_end = 0.0;  // alpha(tau)
  double phase = 0.0;    // Phi(tau)
};

// i d(alpha)/dt = w_r alpha + d(t), d(t) = sum of envelope values, alpha(0) = 0.
Displacement coherent_displacement(double omega_r, const std::vector<DriveEnvelope>& drive, double tau,
                                   int n_out = 1024, double tol = 1e-10);

// x(t) = a exp(-i w_r t) + alpha(t) + h.c. on a truncated oscillator of dimension dim.
std::vector<Operator> oscillator_coupling_samples(double omega_r, int dim, const Displacement& disp);

}  // namespace keldysh
