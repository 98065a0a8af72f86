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

#include "keldysh/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace keldysh {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

cplx carrier(double amp, double w, double phase, double t) {
  return amp * std::polar(1.0, -(w * t + phase));
}

double echo_shape(const EchoPiEnvelope& e, double t) {
  const double x = std::abs(t - e.center) - 0.5 * e.flat_width;
  if (x <= 0.0) return 1.0;
  return std::exp(-0.5 * x * x / (e.sigma * e.sigma));
}

double echo_peak(const EchoPiEnvelope& e) {
  return e.area / (e.flat_width + e.sigma * std::sqrt(kTwoPi));
}

}  // namespace

DriveEnvelope::DriveEnvelope(Variant v) : v_(std::move(v)) {
  std::visit(overloaded{
                 [](const PiecewiseConstantEnvelope& p) {
                   if (p.amplitudes.empty()) throw std::invalid_argument("piecewise envelope: need >= 1 segment");
                   if (!(p.tau > 0.0)) throw std::invalid_argument("piecewise envelope: tau must be positive");
                 },
                 [](const HyperbolicWindowEnvelope& h) {
                   if (!(h.t_ramp > 0.0)) throw std::invalid_argument("hyperbolic envelope: t_ramp must be positive");
                 },
                 [](const SwitchOffEnvelope& h) {
                   if (!(h.t_ramp > 0.0)) throw std::invalid_argument("switch-off envelope: t_ramp must be positive");
                 },
                 [](const EchoPiEnvelope& e) {
                   if (!(e.sigma > 0.0) || e.flat_width < 0.0)
                     throw std::invalid_argument("echo envelope: need sigma > 0 and flat_width >= 0");
                 },
                 [](const auto&) {},
             },
             v_);
}

cplx DriveEnvelope::signal(double t) const {
  return std::visit(
      overloaded{
          [](const ConstantEnvelope& c) { return cplx(c.amplitude, 0.0); },
          [t](const SinusoidEnvelope& s) { return carrier(s.amplitude, s.omega, s.phase, t); },
          [t](const HyperbolicWindowEnvelope& h) {
            const double f = 0.25 * (1.0 + std::tanh((t - h.t_mid1) / (kPi * h.t_ramp))) *
                             (1.0 + std::tanh((h.t_mid2 - t) / (kPi * h.t_ramp)));
            return f * carrier(h.inner.amplitude, h.inner.omega, h.inner.phase, t);
          },
          [t](const SwitchOffEnvelope& h) {
            const double f = 0.5 * (1.0 + std::tanh((h.t_mid - t) / (kPi * h.t_ramp)));
            return f * carrier(h.inner.amplitude, h.inner.omega, h.inner.phase, t);
          },
          [t](const PiecewiseConstantEnvelope& p) {
            const auto n = static_cast<long>(p.amplitudes.size());
            long i = static_cast<long>(std::floor(t / p.tau * static_cast<double>(n)));
            i = std::clamp(i, 0L, n - 1);
            const double a = p.amplitudes[static_cast<std::size_t>(i)];
            if (!p.carrier_omega) return cplx(a, 0.0);
            return carrier(a, *p.carrier_omega, p.carrier_phase, t);
          },
          [t](const EchoPiEnvelope& e) {
            return echo_peak(e) * echo_shape(e, t) * std::polar(1.0, -(e.omega * t + e.phase));
          },
      },
      v_);
}

double DriveEnvelope::max_frequency() const {
  return std::visit(overloaded{
                        [](const ConstantEnvelope&) { return 0.0; },
                        [](const SinusoidEnvelope& s) { return std::abs(s.omega); },
                        [](const HyperbolicWindowEnvelope& h) { return std::abs(h.inner.omega); },
                        [](const SwitchOffEnvelope& h) { return std::abs(h.inner.omega); },
                        [](const PiecewiseConstantEnvelope& p) {
                          return p.carrier_omega ? std::abs(*p.carrier_omega) : 0.0;
                        },
                        [](const EchoPiEnvelope& e) { return std::abs(e.omega); },
                    },
                    v_);
}

std::optional<double> DriveEnvelope::period() const {
  if (const auto* s = std::get_if<SinusoidEnvelope>(&v_)) {
    if (s->omega != 0.0) return kTwoPi / std::abs(s->omega);
  }
  return std::nullopt;
}

double DriveEnvelope::peak() const {
  return std::visit(overloaded{
                        [](const ConstantEnvelope& c) { return std::abs(c.amplitude); },
                        [](const SinusoidEnvelope& s) { return std::abs(s.amplitude); },
                        [](const HyperbolicWindowEnvelope& h) { return std::abs(h.inner.amplitude); },
                        [](const SwitchOffEnvelope& h) { return std::abs(h.inner.amplitude); },
                        [](const PiecewiseConstantEnvelope& p) {
                          double m = 0.0;
                          for (double a : p.amplitudes) m = std::max(m, std::abs(a));
                          return m;
                        },
                        [](const EchoPiEnvelope& e) { return std::abs(echo_peak(e)); },
                    },
                    v_);
}

void SystemModel::validate() const {
  if (h_static.rows() == 0 || h_static.rows() != h_static.cols())
    throw std::invalid_argument("model: static Hamiltonian must be square and non-empty");
  if (!is_hermitian(h_static, 1e-10)) throw std::invalid_argument("model: static Hamiltonian not Hermitian");
  if (coupling.rows() != h_static.rows() || coupling.cols() != h_static.cols())
    throw std::invalid_argument("model: coupling dimension mismatch");
  if (!is_hermitian(coupling, 1e-10)) throw std::invalid_argument("model: coupling operator not Hermitian");
  for (const auto& d : drives) {
    if (d.op.rows() != h_static.rows() || d.op.cols() != h_static.cols())
      throw std::invalid_argument("model: drive operator dimension mismatch");
    if (d.form == DriveForm::Lab && !is_hermitian(d.op, 1e-10))
      throw std::invalid_argument("model: lab-frame drive operator not Hermitian");
  }
}

namespace {

void add_drive(Operator& h, const DriveTerm& d, cplx c) {
  if (d.form == DriveForm::Lab) {
    h += c.real() * d.op;
  } else {
    h += (0.5 * c) * d.op + (0.5 * std::conj(c)) * d.op.adjoint();
  }
}

}  // namespace

Operator SystemModel::hamiltonian(double t) const {
  Operator h = h_static;
  for (const auto& d : drives) add_drive(h, d, d.envelope.signal(t));
  return h;
}

Operator unitary_step(const Operator& h, double dt) {
  if (h.rows() == 2) {
    const double a = h(0, 0).real();
    const double d = h(1, 1).real();
    const cplx b = h(0, 1);
    const double m = 0.5 * (a + d);
    const double z = 0.5 * (a - d);
    const double r = std::sqrt(z * z + std::norm(b));
    const double c = std::cos(r * dt);
    const double s = r > 0.0 ? std::sin(r * dt) / r : dt;
    const cplx ph = std::polar(1.0, -m * dt);
    const cplx mi(0.0, -1.0);
    Operator u(2, 2);
    u(0, 0) = ph * (c + mi * s * z);
    u(1, 1) = ph * (c - mi * s * z);
    u(0, 1) = ph * mi * s * b;
    u(1, 0) = ph * mi * s * std::conj(b);
    return u;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (h + h.adjoint()));
  const Eigen::VectorXcd ph = (es.eigenvalues() * (-dt)).unaryExpr([](double x) { return std::polar(1.0, x); });
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

namespace {

void check_grid(const std::vector<double>& t_grid) {
  if (t_grid.empty()) throw std::invalid_argument("propagate: empty time grid");
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    if (!(t_grid[i] > t_grid[i - 1])) throw std::invalid_argument("propagate: time grid not strictly increasing");
}

}  // namespace

namespace {

template <class M>
M step_of(const M& h, double dt) {
  if constexpr (M::RowsAtCompileTime == 2) {
    const double a = h(0, 0).real();
    const double d = h(1, 1).real();
    const cplx b = h(0, 1);
    const double m = 0.5 * (a + d);
    const double z = 0.5 * (a - d);
    const double r = std::sqrt(z * z + std::norm(b));
    const double c = std::cos(r * dt);
    const double s = r > 0.0 ? std::sin(r * dt) / r : dt;
    const cplx ph = std::polar(1.0, -m * dt);
    const cplx mi(0.0, -1.0);
    M u;
    u(0, 0) = ph * (c + mi * s * z);
    u(1, 1) = ph * (c - mi * s * z);
    u(0, 1) = ph * mi * s * b;
    u(1, 0) = ph * mi * s * std::conj(b);
    return u;
  } else {
    return unitary_step(h, dt);
  }
}

template <class M>
std::vector<Operator> propagate_impl(const SystemModel& model, const std::vector<double>& t_grid, int substeps,
                                     int order) {
  const int n = model.dim();
  const std::size_t nd = model.drives.size();
  const M h0 = model.h_static;
  std::vector<M> ops, adj;
  for (const auto& d : model.drives) {
    ops.push_back(d.op);
    adj.push_back(d.op.adjoint());
  }
  std::vector<Operator> out;
  out.reserve(t_grid.size());
  M u = M::Identity(n, n);
  out.push_back(u);
  // Gauss nodes of the fourth-order Magnus step; the midpoint for order 2.
  const double gauss = std::sqrt(3.0) / 6.0;
  const std::vector<double> nodes = order == 2 ? std::vector<double>{0.5} : std::vector<double>{0.5 - gauss, 0.5 + gauss};
  std::vector<cplx> coeff(nd * nodes.size()), last(coeff.size());
  double last_dt = -1.0;
  M step;
  const auto h_at = [&](std::size_t node, double tm) {
    M h = h0;
    for (std::size_t q = 0; q < nd; ++q) {
      const cplx c = coeff[node * nd + q];
      if (!std::isfinite(c.real()) || !std::isfinite(c.imag()))
        throw std::invalid_argument("propagate: non-finite drive at t = " + std::to_string(tm));
      if (model.drives[q].form == DriveForm::Lab)
        h += c.real() * ops[q];
      else
        h += (0.5 * c) * ops[q] + (0.5 * std::conj(c)) * adj[q];
    }
    return h;
  };
  for (std::size_t j = 0; j + 1 < t_grid.size(); ++j) {
    const double dt = (t_grid[j + 1] - t_grid[j]) / substeps;
    for (int s = 0; s < substeps; ++s) {
      const double t0 = t_grid[j] + s * dt;
      for (std::size_t c = 0; c < nodes.size(); ++c)
        for (std::size_t q = 0; q < nd; ++q) coeff[c * nd + q] = model.drives[q].envelope.signal(t0 + nodes[c] * dt);
      // Piecewise-constant drives reuse the previous step operator.
      if (dt != last_dt || coeff != last) {
        M h;
        if (order == 2) {
          h = h_at(0, t0 + 0.5 * dt);
        } else {
          const M h1 = h_at(0, t0 + nodes[0] * dt);
          const M h2 = h_at(1, t0 + nodes[1] * dt);
          h = 0.5 * (h1 + h2) - cplx(0.0, std::sqrt(3.0) / 12.0 * dt) * (h2 * h1 - h1 * h2);
        }
        step = step_of(h, dt);
        last = coeff;
        last_dt = dt;
      }
      u = step * u;
    }
    out.push_back(u);
  }
  return out;
}

}  // namespace

std::vector<Operator> propagate(const SystemModel& model, const std::vector<double>& t_grid, int substeps, int order) {
  model.validate();
  check_grid(t_grid);
  if (substeps < 1) throw std::invalid_argument("propagate: substeps must be >= 1");
  if (order != 2 && order != 4) throw std::invalid_argument("propagate: order must be 2 or 4");
  if (model.dim() == 2) return propagate_impl<Eigen::Matrix2cd>(model, t_grid, substeps, order);
  return propagate_impl<Eigen::MatrixXcd>(model, t_grid, substeps, order);
}

int default_substeps(const SystemModel& model, const std::vector<double>& t_grid, int per_period) {
  check_grid(t_grid);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (model.h_static + model.h_static.adjoint()),
                                                      Eigen::EigenvaluesOnly);
  double w = es.eigenvalues().maxCoeff() - es.eigenvalues().minCoeff();
  for (const auto& d : model.drives) {
    w = std::max(w, d.envelope.max_frequency());
    const double opnorm = d.op.cwiseAbs().rowwise().sum().maxCoeff();
    w = std::max(w, 2.0 * d.envelope.peak() * opnorm);
  }
  if (!(w > 0.0)) return 1;
  const double dt_max = kTwoPi / w / per_period;
  double widest = 0.0;
  for (std::size_t i = 1; i < t_grid.size(); ++i) widest = std::max(widest, t_grid[i] - t_grid[i - 1]);
  return std::max(1, static_cast<int>(std::ceil(widest / dt_max - 1e-9)));
}

Propagation propagate(const SystemModel& model, const std::vector<double>& t_grid, const PropagateOptions& opts) {
  Propagation p;
  p.substeps = opts.substeps > 0 ? opts.substeps : default_substeps(model, t_grid, opts.substeps_per_period);
  p.unitaries = propagate(model, t_grid, p.substeps, opts.order);
  if (opts.step_tol <= 0.0) return p;
  for (int k = 0; k < opts.max_doublings; ++k) {
    auto finer = propagate(model, t_grid, 2 * p.substeps, opts.order);
    p.step_change = (finer.back() - p.unitaries.back()).cwiseAbs().maxCoeff();
    p.unitaries = std::move(finer);
    p.substeps *= 2;
    if (p.step_change <= opts.step_tol) return p;
  }
  std::ostringstream msg;
  msg << "propagate: step doubling did not reach tolerance " << opts.step_tol << " (last change " << p.step_change
      << " at " << p.substeps << " substeps)";
  throw NumericalError(msg.str());
}

std::vector<Operator> interaction_coupling(const SystemModel& model, const std::vector<Operator>& unitaries) {
  std::vector<Operator> out;
  out.reserve(unitaries.size());
  for (const auto& u : unitaries) {
    if (u.rows() != model.coupling.rows()) throw std::invalid_argument("interaction_coupling: dimension mismatch");
    Operator x = u.adjoint() * model.coupling * u;
    out.push_back(0.5 * (x + x.adjoint()));
  }
  if (!out.empty()) out.front() = model.coupling;
  return out;
}

std::vector<double> uniform_grid(double tau, int n, bool include_end) {
  if (!(tau > 0.0) || n < 1) throw std::invalid_argument("uniform_grid: need tau > 0 and n >= 1");
  std::vector<double> t(static_cast<std::size_t>(n + (include_end ? 1 : 0)));
  for (std::size_t j = 0; j < t.size(); ++j) t[j] = tau * static_cast<double>(j) / n;
  return t;
}

namespace {

struct OscState {
  cplx alpha;
  double phi;
};

cplx alpha_dot(double wr, cplx a, double d) { return cplx(0.0, -1.0) * (wr * a + d); }

double phi_dot(double wr, cplx a, cplx ad) {
  // -[w |a|^2 + (i/2)(a conj(ad) - conj(a) ad)]
  const cplx im = cplx(0.0, 0.5) * (a * std::conj(ad) - std::conj(a) * ad);
  return -(wr * std::norm(a) + im.real());
}

double drive_value(const std::vector<DriveEnvelope>& drive, double t) {
  double d = 0.0;
  for (const auto& e : drive) d += e.value(t);
  return d;
}

OscState rk4(double wr, const std::vector<DriveEnvelope>& drive, OscState y, double t, double h) {
  auto f = [&](double tt, cplx a) {
    const double d = drive_value(drive, tt);
    const cplx ad = alpha_dot(wr, a, d);
    return std::pair<cplx, double>{ad, phi_dot(wr, a, ad)};
  };
  auto [k1, p1] = f(t, y.alpha);
  auto [k2, p2] = f(t + 0.5 * h, y.alpha + 0.5 * h * k1);
  auto [k3, p3] = f(t + 0.5 * h, y.alpha + 0.5 * h * k2);
  auto [k4, p4] = f(t + h, y.alpha + h * k3);
  return OscState{y.alpha + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4),
                  y.phi + (h / 6.0) * (p1 + 2.0 * p2 + 2.0 * p3 + p4)};
}

// Integrates on the n_out output grid with `sub` RK4 steps per output interval.
Displacement integrate_displacement(double wr, const std::vector<DriveEnvelope>& drive, double tau, int n_out,
                                    int sub) {
  Displacement out;
  out.t = uniform_grid(tau, n_out, false);
  out.alpha.reserve(out.t.size());
  OscState y{0.0, 0.0};
  const double h = tau / n_out / sub;
  for (int j = 0; j < n_out; ++j) {
    out.alpha.push_back(y.alpha);
    const double t0 = out.t[static_cast<std::size_t>(j)];
    for (int s = 0; s < sub; ++s) y = rk4(wr, drive, y, t0 + s * h, h);
  }
  out.alpha_end = y.alpha;
  out.phase = y.phi;
  return out;
}

}  // namespace

Displacement coherent_displacement(double omega_r, const std::vector<DriveEnvelope>& drive, double tau, int n_out,
                                   double tol) {
  if (!(tau > 0.0) || n_out < 1) throw std::invalid_argument("coherent_displacement: need tau > 0, n_out >= 1");
  double w = std::abs(omega_r);
  for (const auto& e : drive) w = std::max(w, e.max_frequency());
  int sub = std::max(1, static_cast<int>(std::ceil(tau * std::max(w, 1e-3) / kTwoPi * 16.0 / n_out)));
  Displacement coarse = integrate_displacement(omega_r, drive, tau, n_out, sub);
  for (int k = 0; k < 12; ++k) {
    Displacement fine = integrate_displacement(omega_r, drive, tau, n_out, 2 * sub);
    double change = std::abs(fine.alpha_end - coarse.alpha_end);
    for (std::size_t j = 0; j < fine.alpha.size(); ++j)
      change = std::max(change, std::abs(fine.alpha[j] - coarse.alpha[j]));
    change = std::max(change, std::abs(fine.phase - coarse.phase));
    coarse = std::move(fine);
    sub *= 2;
    // RK4 error of the finer solution is about change / 15.
    if (change / 15.0 <= tol) return coarse;
  }
  throw NumericalError("coherent_displacement: step control did not converge");
}

std::vector<Operator> oscillator_coupling_samples(double omega_r, int dim, const Displacement& disp) {
  const Operator a = destroy(dim);
  const Operator id = Operator::Identity(dim, dim);
  std::vector<Operator> out;
  out.reserve(disp.t.size());
  for (std::size_t j = 0; j < disp.t.size(); ++j) {
    Operator x = a * std::polar(1.0, -omega_r * disp.t[j]);
    x += disp.alpha[j] * id;
    out.push_back(x + x.adjoint());
  }
  return out;
}

}  // namespace keldysh
