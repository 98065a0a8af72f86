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


#include "keldysh/control.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace keldysh {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

bool spectrum_vanishes(const NoiseSpectrum& s) { return s.support().empty() && s.white_level() == 0.0; }

double projected_max(const std::vector<double>& x, const std::vector<double>& g, double lo, double hi) {
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if ((x[i] >= hi && g[i] < 0.0) || (x[i] <= lo && g[i] > 0.0)) continue;
    m = std::max(m, std::abs(g[i]));
  }
  return m;
}

std::vector<double> clip(std::vector<double> x, double lo, double hi) {
  for (double& v : x) v = std::clamp(v, lo, hi);
  return x;
}

}  // namespace

void PulseParams::validate() const {
  require(amplitudes.size() >= 2, "pulse: need at least 2 segments");
  require(std::isfinite(a_min) && std::isfinite(a_max) && a_min < a_max, "pulse: need a_min < a_max");
  for (std::size_t i = 0; i < amplitudes.size(); ++i) {
    const double a = amplitudes[i];
    if (!std::isfinite(a) || a < a_min || a > a_max)
      throw std::invalid_argument("pulse: amplitude of segment " + std::to_string(i) + " outside bounds");
  }
}

void ControlProblem::validate() const {
  const int n = dim();
  require(n >= 2 && h_static.cols() == n, "control: static Hamiltonian must be square with dim >= 2");
  require(drive_op.rows() == n && drive_op.cols() == n, "control: drive operator dimension mismatch");
  require(coupling.rows() == n && coupling.cols() == n, "control: coupling dimension mismatch");
  require(is_hermitian(h_static, 1e-10) && is_hermitian(drive_op, 1e-10) && is_hermitian(coupling, 1e-10),
          "control: operators must be Hermitian");
  require(std::isfinite(tau) && tau > 0.0, "control: tau must be positive");
  require(segments >= 2, "control: need at least 2 segments");
  require(std::isfinite(a_min) && std::isfinite(a_max) && a_min < a_max, "control: need a_min < a_max");
  require(n_t >= 2 * segments && n_t % segments == 0, "control: n_t must be a multiple of segments (at least twice)");
  require(settings.iterations >= 0 && settings.restarts >= 1, "control: need iterations >= 0 and restarts >= 1");
  require(settings.momentum >= 0.0 && settings.momentum < 1.0, "control: momentum must lie in [0, 1)");
  require(settings.step >= 0.0, "control: step must be non-negative");
  std::visit(
      [n](const auto& o) {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, GateObjective>) {
          require(o.u_target.rows() == n && o.u_target.cols() == n, "control: target unitary dimension mismatch");
          require(unitarity_defect(o.u_target) < 1e-8, "control: target is not unitary");
        } else {
          require(o.rho_init.rows() == n && o.rho_target.rows() == n, "control: state dimension mismatch");
          DensityMatrix a(o.rho_init), b(o.rho_target);
        }
      },
      objective);
  if (initial) {
    require(static_cast<int>(initial->size()) == segments, "control: initial guess has wrong segment count");
    params(*initial).validate();
  }
}

PulseParams ControlProblem::params(std::vector<double> amplitudes) const {
  return PulseParams{std::move(amplitudes), a_min, a_max};
}

SystemModel ControlProblem::model(const PulseParams& p) const {
  PiecewiseConstantEnvelope env{p.amplitudes, tau, carrier_omega, carrier_phase};
  SystemModel m;
  m.h_static = h_static;
  m.coupling = coupling;
  m.drives.push_back(DriveTerm{drive_op, DriveEnvelope(env), DriveForm::Lab});
  return m;
}

ControlEvaluator::ControlEvaluator(ControlProblem problem) : problem_(std::move(problem)) {
  problem_.validate();
  grid_ = uniform_grid(problem_.tau, problem_.n_t, true);
  if (!problem_.carrier_omega) {
    // The Hamiltonian is constant on every grid interval, so one exact step each is exact.
    substeps_ = 1;
  } else {
    // Fix the step count once on the strongest admissible pulse so the cost is
    // a smooth function of the amplitudes.
    const double peak = std::max(std::abs(problem_.a_min), std::abs(problem_.a_max));
    PulseParams probe = problem_.params(std::vector<double>(problem_.segments, peak));
    PropagateOptions po;
    po.step_tol = problem_.step_tol;
    po.order = 4;
    po.substeps = 1;
    substeps_ = propagate(problem_.model(probe), grid_, po).substeps;
  }
}

void ControlEvaluator::ensure_table() const {
  if (table_ || spectrum_vanishes(problem_.spectrum)) return;
  OverlapIntegrator integ(problem_.spectrum, problem_.tau);
  const int h = problem_.n_t / 2;
  table_.emplace(integ, -h, h, false, problem_.settings.threads);
}

std::vector<Operator> ControlEvaluator::forward(const PulseParams& p) const {
  p.validate();
  if (p.segments() != problem_.segments) throw std::invalid_argument("control: segment count mismatch");
  std::vector<Operator> us;
  try {
    us = propagate(problem_.model(p), grid_, substeps_, 4);
  } catch (const std::exception& e) {
    throw NumericalError(std::string("control: propagation failed: ") + e.what());
  }
  check_unitaries(us);
  return us;
}

void ControlEvaluator::check_unitaries(const std::vector<Operator>& us) const {
  const auto bad = [](const Operator& u) { return !is_finite(u) || unitarity_defect(u) > 1e-8; };
  if (!bad(us.back())) return;
  const std::size_t per = static_cast<std::size_t>(problem_.n_t / problem_.segments);
  for (std::size_t j = 0; j < us.size(); ++j) {
    if (bad(us[j])) {
      const std::size_t seg = std::min(static_cast<std::size_t>(problem_.segments - 1), (j - (j > 0)) / per);
      throw NumericalError("control: propagation lost unitarity in segment " + std::to_string(seg));
    }
  }
}

CostDetail ControlEvaluator::finish(std::vector<Operator> us, bool with_map) const {
  CostDetail out;
  out.u_s = us.back();
  SuperOperator map = SuperOperator::identity(problem_.dim());
  if (with_map) {
    ensure_table();
    us.pop_back();
    std::vector<Operator> xs;
    xs.reserve(us.size());
    for (const auto& u : us) {
      Operator x = u.adjoint() * problem_.coupling * u;
      xs.push_back(0.5 * (x + x.adjoint()));
    }
    DecomposeOptions dopt;
    dopt.truncation_tol = 0.0;
    out.decomposition = fourier_decompose(xs, problem_.tau, dopt);
    if (table_) {
      out.map = build_keldysh_map(out.decomposition, *table_, MapMode::Secular, 0, problem_.map);
      map = out.map->map;
    }
  }
  out.cost = std::visit(
      [&](const auto& o) {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, GateObjective>)
          return gate_error(o.u_target, out.u_s, map);
        else
          return state_transfer_error(o.rho_init, o.rho_target, out.u_s, map);
      },
      problem_.objective);
  if (!std::isfinite(out.cost)) throw NumericalError("control: non-finite cost");
  return out;
}

CostDetail ControlEvaluator::evaluate(const PulseParams& p) const { return finish(forward(p), problem_.noise_aware); }

CostDetail ControlEvaluator::evaluate_noisy(const PulseParams& p) const { return finish(forward(p), true); }

double ControlEvaluator::perturbed_cost(const std::vector<double>& a, const std::vector<Operator>& base, int seg,
                                        double delta) const {
  const int per = problem_.n_t / problem_.segments;
  const auto j0 = static_cast<std::size_t>(seg * per);
  const auto j1 = j0 + static_cast<std::size_t>(per);
  PulseParams q{a, problem_.a_min - 1.0, problem_.a_max + 1.0};
  q.amplitudes[static_cast<std::size_t>(seg)] += delta;
  const std::vector<double> sub(grid_.begin() + static_cast<long>(j0), grid_.begin() + static_cast<long>(j1) + 1);
  // U'(t) = W(t, t0) U(t0) inside the segment and U(t) U(t1)^dag U'(t1) after it.
  const std::vector<Operator> w = propagate(problem_.model(q), sub, substeps_, 4);
  std::vector<Operator> us = base;
  for (std::size_t j = j0 + 1; j <= j1; ++j) us[j] = w[j - j0] * base[j0];
  const Operator q_link = base[j1].adjoint() * us[j1];
  for (std::size_t j = j1 + 1; j < us.size(); ++j) us[j] = base[j] * q_link;
  check_unitaries(us);
  return finish(std::move(us), problem_.noise_aware).cost;
}

std::vector<double> ControlEvaluator::gradient(const PulseParams& p) const {
  return gradient(p, problem_.settings.threads);
}

std::vector<double> ControlEvaluator::gradient(const PulseParams& p, int threads) const {
  const std::vector<Operator> base = forward(p);
  if (problem_.noise_aware) ensure_table();
  // Components at a bound are differenced beyond it; the model is defined there.
  const double h = 1e-5 * p.range();
  std::vector<double> g(static_cast<std::size_t>(p.segments()));
  parallel_for(p.segments(), threads, [&](int i) {
    g[static_cast<std::size_t>(i)] =
        (perturbed_cost(p.amplitudes, base, i, h) - perturbed_cost(p.amplitudes, base, i, -h)) / (2.0 * h);
  });
  return g;
}

std::vector<double> fd_gradient(const ScalarFunction& f, const std::vector<double>& x, double h, int threads) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_gradient: step must be positive");
  std::vector<double> g(x.size());
  parallel_for(static_cast<int>(x.size()), threads, [&](int i) {
    std::vector<double> xp = x, xm = x;
    xp[static_cast<std::size_t>(i)] += h;
    xm[static_cast<std::size_t>(i)] -= h;
    g[static_cast<std::size_t>(i)] = (f(xp) - f(xm)) / (2.0 * h);
  });
  return g;
}

DescentResult descend(const ScalarFunction& f, const GradientFunction& grad, std::vector<double> x0, double lo,
                      double hi, const OptimizerSettings& s) {
  DescentResult r;
  r.x = clip(std::move(x0), lo, hi);
  r.value = f(r.x);
  r.trace.push_back(r.value);
  const double s0 = s.step > 0.0 ? s.step : 1e-2 * (hi - lo);
  const double s_min = 1e-10 * (hi - lo);
  const double s_max = 0.1 * (hi - lo);
  double step = s0;
  std::vector<double> v(r.x.size(), 0.0);
  int stall = 0;
  for (int it = 0; it < s.iterations; ++it) {
    r.iterations = it + 1;
    const std::vector<double> g = grad(r.x);
    const double gmax = projected_max(r.x, g, lo, hi);
    if (!(gmax > 0.0)) {
      r.converged = true;
      r.trace.push_back(r.value);
      break;
    }
    std::vector<double> trial(r.x.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = s.momentum * v[i] - step * g[i] / gmax;
      trial[i] = r.x[i] + v[i];
    }
    trial = clip(std::move(trial), lo, hi);
    double ft = f(trial);
    bool accepted = ft < r.value;
    if (accepted) {
      step = std::min(1.2 * step, s_max);
    } else {
      std::fill(v.begin(), v.end(), 0.0);
      while (step > s_min) {
        for (std::size_t i = 0; i < trial.size(); ++i) trial[i] = r.x[i] - step * g[i] / gmax;
        trial = clip(std::move(trial), lo, hi);
        ft = f(trial);
        if (ft < r.value) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
    }
    if (!accepted) {
      r.converged = true;
      r.trace.push_back(r.value);
      break;
    }
    // Keep the momentum consistent with the accepted (projected) displacement.
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = trial[i] - r.x[i];
    const double gain = r.value - ft;
    r.x = std::move(trial);
    r.value = ft;
    r.trace.push_back(r.value);
    stall = gain < s.ftol * std::max(std::abs(r.value), 1e-300) ? stall + 1 : 0;
    if (stall >= s.patience) {
      r.converged = true;
      break;
    }
  }
  return r;
}

OptimizeResult optimize(const ControlProblem& problem) { return optimize(ControlEvaluator(problem)); }

OptimizeResult optimize(const ControlEvaluator& ev) {
  const ControlProblem& p = ev.problem();
  const int n = p.segments;
  std::vector<double> guess = p.initial ? *p.initial : std::vector<double>(static_cast<std::size_t>(n), 0.0);
  const int restarts = p.settings.restarts;
  std::vector<std::vector<double>> starts(static_cast<std::size_t>(restarts), guess);
  for (int r = 1; r < restarts; ++r) {
    std::mt19937_64 rng(p.settings.seed + static_cast<std::uint64_t>(r));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double& a : starts[static_cast<std::size_t>(r)])
      a = std::clamp(a + p.settings.restart_spread * (p.a_max - p.a_min) * u(rng), p.a_min, p.a_max);
  }
  // Parallelism goes to restarts when there are several, else to gradient components.
  const int outer = std::min(p.settings.threads, restarts);
  ControlProblem inner_problem = p;
  inner_problem.settings.threads = outer > 1 ? 1 : p.settings.threads;
  ScalarFunction f = [&ev](const std::vector<double>& a) { return ev.cost(ev.problem().params(a)); };
  const int inner = inner_problem.settings.threads;
  if (p.noise_aware) ev.evaluate(ev.problem().params(guess));  // builds the phi table before threads start
  GradientFunction g = [&ev, inner](const std::vector<double>& a) { return ev.gradient(ev.problem().params(a), inner); };
  std::vector<DescentResult> runs(static_cast<std::size_t>(restarts));
  parallel_for(restarts, outer, [&](int r) {
    runs[static_cast<std::size_t>(r)] = descend(f, g, starts[static_cast<std::size_t>(r)], p.a_min, p.a_max, p.settings);
  });
  OptimizeResult out;
  out.best_restart = 0;
  for (int r = 0; r < restarts; ++r) {
    out.restart_costs.push_back(runs[static_cast<std::size_t>(r)].value);
    if (runs[static_cast<std::size_t>(r)].value < runs[static_cast<std::size_t>(out.best_restart)].value)
      out.best_restart = r;
  }
  DescentResult& best = runs[static_cast<std::size_t>(out.best_restart)];
  out.best = p.params(best.x);
  out.cost = best.value;
  out.trace = best.trace;
  out.iterations = best.iterations;
  out.converged = best.converged;
  out.final = ev.evaluate(out.best);
  return out;
}

std::vector<double> repeat_gate_error(const SuperOperator& map, const Operator& u_s, const Operator& u_target,
                                      int n_reps) {
  if (n_reps < 1) throw std::invalid_argument("repeat_gate_error: n_reps must be >= 1");
  const int n = map.dim();
  if (u_s.rows() != n || u_target.rows() != n) throw std::invalid_argument("repeat_gate_error: dimension mismatch");
  const Eigen::MatrixXcd e = unitary_superop(u_target).matrix().adjoint() * unitary_superop(u_s).matrix() * map.matrix();
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Identity(e.rows(), e.cols());
  std::vector<double> out;
  for (int r = 0; r < n_reps; ++r) {
    acc = e * acc;
    out.push_back(1.0 - acc.trace().real() / double(n * n));
  }
  return out;
}

std::vector<double> repeat_gate_fidelity(const SuperOperator& map, const Operator& u_s, const Operator& u_target,
                                         int n_reps) {
  std::vector<double> e = repeat_gate_error(map, u_s, u_target, n_reps);
  for (double& v : e) v = 1.0 - v;
  return e;
}

}  // namespace keldysh
