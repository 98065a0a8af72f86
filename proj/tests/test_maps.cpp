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


#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "doctest.h"
#include "keldysh/maps.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace keldysh;
using testing_support::max_abs;

namespace {

SystemModel qubit(double wq, const Operator& coupling) {
  SystemModel m;
  m.h_static = 0.5 * wq * sigma_z();
  m.coupling = coupling;
  return m;
}

FilterDecomposition decompose(const SystemModel& m, double tau, int n, const DecomposeOptions& o = {}) {
  auto grid = uniform_grid(tau, n);
  Propagation p = propagate(m, grid, PropagateOptions{});
  return fourier_decompose(interaction_coupling(m, p.unitaries), tau, o);
}

double frob(const SuperOperator& a, const SuperOperator& b) { return (a.matrix() - b.matrix()).norm(); }

NoiseSpectrum smooth_bath() { return NoiseSpectrum(OhmicSpectrum{1e-3, 5.0}) + NoiseSpectrum(WhiteSpectrum{2e-4}); }

}  // namespace

TEST_CASE("keldysh map of simple self-energies") {
  KeldyshMapResult zero = keldysh_map(SuperOperator(2));
  CHECK(max_abs(zero.map.matrix() - SuperOperator::identity(2).matrix()) < 1e-15);
  const double gt = 0.3;
  KeldyshMapResult ad = keldysh_map(cplx(gt) * dissipator_superop(sigma_minus()));
  Operator rho = Operator::Zero(2, 2);
  rho(1, 1) = 1.0;
  Operator out = ad.map.apply(rho);
  CHECK(out(1, 1).real() == doctest::Approx(std::exp(-gt)).epsilon(1e-13));
  CHECK(out(0, 0).real() == doctest::Approx(1 - std::exp(-gt)).epsilon(1e-13));
  CHECK(ad.cptp.cptp());
}

TEST_CASE("fullwave with k_cut = 0 equals the secular self-energy") {
  SystemModel m = qubit(1.0, sigma_x());
  m.drives.push_back({sigma_x(), DriveEnvelope(SinusoidEnvelope{0.05, 0.97, 0.1}), DriveForm::Lab});
  const double tau = 12 * kTwoPi;
  FilterDecomposition d = decompose(m, tau, 1024);
  NoiseSpectrum s = NoiseSpectrum(OhmicSpectrum{1e-3, 4.0}) + NoiseSpectrum(TlsSpectrum{2e-3, 1.1, 30.0});
  OverlapIntegrator integ(s, tau);
  PhiTable table(integ, -d.k_max(), d.k_max(), true);
  SuperOperator sec = secular_self_energy(d, table);
  SuperOperator full = fullwave_self_energy(d, table, 0);
  CHECK(max_abs(sec.matrix() - full.matrix()) < 1e-12 * std::max(1.0, max_abs(sec.matrix())));
}

TEST_CASE("white noise fullwave equals secular") {
  SystemModel m = qubit(1.0, sigma_x());
  m.drives.push_back({sigma_x(), DriveEnvelope(SinusoidEnvelope{0.2, 1.0, 0.0}), DriveForm::Lab});
  const double tau = 8 * kTwoPi;
  FilterDecomposition d = decompose(m, tau, 512);
  NoiseSpectrum s(WhiteSpectrum{1e-3});
  SuperOperator sec = secular_self_energy(d, s);
  for (int kc : {1, 5, 40}) {
    SuperOperator full = fullwave_self_energy(d, s, kc);
    CHECK(max_abs(sec.matrix() - full.matrix()) < 1e-8);
  }
}

TEST_CASE("self-energies are trace-annihilating and secular maps are CPTP") {
  std::mt19937 rng(3);
  SystemModel m;
  m.h_static = testing_support::random_hermitian(3, rng);
  m.coupling = testing_support::random_hermitian(3, rng);
  m.drives.push_back({testing_support::random_hermitian(3, rng), DriveEnvelope(SinusoidEnvelope{0.4, 1.3, 0.0}),
                      DriveForm::Lab});
  const double tau = 15.0;
  FilterDecomposition d = decompose(m, tau, 1024);
  NoiseSpectrum s = NoiseSpectrum(OhmicSpectrum{2e-3, 3.0}) + NoiseSpectrum(TlsSpectrum{1e-2, 2.0, 5.0});
  KeldyshMapResult sec = build_keldysh_map(d, s, MapMode::Secular);
  CHECK(sec.cptp.min_choi_eigenvalue >= -1e-10);
  CHECK(sec.cptp.tp_defect <= 1e-10);
  KeldyshMapResult full = build_keldysh_map(d, s, MapMode::Fullwave, 6);
  CHECK(full.cptp.tp_defect <= 1e-10);
  // trace row of sigma
  for (const auto* sig : {&sec.sigma, &full.sigma}) {
    Eigen::RowVectorXcd tr = vec(identity_op(3)).adjoint() * sig->matrix();
    CHECK(tr.cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("negative damping is an error") {
  FilterDecomposition d(1.0, 4, {0}, {sigma_z()}, 2.0, 0.0);
  CHECK_THROWS_AS(secular_self_energy(d, std::vector<cplx>{cplx(-1e-6, 0)}), NumericalError);
  CHECK_NOTHROW(secular_self_energy(d, std::vector<cplx>{cplx(-1e-14, 0)}));
}

TEST_CASE("static transverse coupling: secular map approaches the Lindblad map") {
  const double wq = 1.0, tau = 200 * kTwoPi;
  SystemModel m = qubit(wq, sigma_x());
  FilterDecomposition d = decompose(m, tau, 2048);
  NoiseSpectrum s = smooth_bath();
  KeldyshMapResult k = build_keldysh_map(d, s, MapMode::Secular);
  TransitionDecomposition t = static_decomposition(m.h_static, m.coupling);
  REQUIRE(t.omegas.size() == 2);
  CHECK(t.omegas[0] == doctest::Approx(-wq));
  CHECK(t.omegas[1] == doctest::Approx(wq));
  SuperOperator lind = lindblad_reference(t, s, tau);
  SuperOperator pl = matexp(lind);
  CHECK(frob(k.map, pl) <= 1e-3);
  // damping rates on sigma-/ sigma+
  const std::size_t ip = std::find(k.ks.begin(), k.ks.end(), 200) - k.ks.begin();
  REQUIRE(ip < k.ks.size());
  CHECK(2 * k.phis[ip].real() == doctest::Approx(tau * s.evaluate(wq)).epsilon(0.02));
}

TEST_CASE("static longitudinal coupling reduces to pure dephasing") {
  const double tau = 50 * kTwoPi;
  SystemModel m = qubit(1.0, sigma_z());
  FilterDecomposition d = decompose(m, tau, 256);
  REQUIRE(d.size() == 1);
  NoiseSpectrum s(TabulatedSpectrum{{-2.0, 0.0, 2.0}, {0.0, 1e-3, 0.0}});
  KeldyshMapResult k = build_keldysh_map(d, s, MapMode::Secular);
  SuperOperator ref = cplx(tau * s.evaluate(0.0)) * dissipator_superop(sigma_z());
  CHECK(max_abs(k.sigma.matrix() - ref.matrix()) < 2e-2 * max_abs(ref.matrix()));
  TransitionDecomposition t = static_decomposition(m.h_static, m.coupling);
  REQUIRE(t.omegas.size() == 1);
  SuperOperator lind = lindblad_reference(t, s, tau, LindbladOptions{false, std::nullopt});
  CHECK(max_abs(lind.matrix() - ref.matrix()) < 1e-15);
}

TEST_CASE("principal value shift") {
  // S = 1 on [-1, 1]: PV int dw'/2pi 1/(w - w') = ln|(w + 1)/(w - 1)| / 2pi
  NoiseSpectrum s(TabulatedSpectrum{{-1.0, -1.0 + 1e-9, 1.0 - 1e-9, 1.0}, {0.0, 1.0, 1.0, 0.0}});
  for (double w : {-0.4, 0.3, 2.5}) {
    const double ref = std::log(std::abs((w + 1.0) / (w - 1.0))) / kTwoPi;
    CHECK(principal_value_shift(s, w) == doctest::Approx(ref).epsilon(1e-6));
  }
  // Lorentzian: S = g / (x^2 + g^2) on the full line has shift x / (2 (x^2 + g^2))... check against quadrature oracle
  NoiseSpectrum ohm(OhmicSpectrum{1.0, 2.0});
  const double w = 1.3;
  // oracle: GSL Cauchy principal value weight
  gsl_set_error_handler_off();
  oracles::detail::GslFn fn{[](double x) { return x * std::exp(-x / 2.0); }};
  gsl_function g = fn.wrap();
  gsl_integration_workspace* ws = gsl_integration_workspace_alloc(5000);
  double r1 = 0, e1 = 0;
  gsl_integration_qawc(&g, 0.0, 80.0, w, 1e-14, 1e-12, 5000, ws, &r1, &e1);
  gsl_integration_workspace_free(ws);
  // qawc gives PV int f/(x - w); the tail beyond 80 is below 1e-14
  CHECK(principal_value_shift(ohm, w) == doctest::Approx(-r1 / kTwoPi).epsilon(1e-8));
}

TEST_CASE("decoherence error under white noise equals gamma tau") {
  const double gamma = 1e-3 / (10 * kTwoPi), tau = 10 * kTwoPi;
  NoiseSpectrum s(WhiteSpectrum{gamma});
  std::vector<SystemModel> models;
  models.push_back(qubit(1.0, sigma_x()));
  models.push_back(qubit(1.0, sigma_x()));
  models.back().drives.push_back({sigma_x(), DriveEnvelope(SinusoidEnvelope{0.05, 1.0, 0.0}), DriveForm::Lab});
  models.push_back(qubit(1.0, sigma_x()));
  models.back().drives.push_back(
      {sigma_x(), DriveEnvelope(HyperbolicWindowEnvelope{0.25 * tau, 0.75 * tau, 1.0, SinusoidEnvelope{0.1, 1.0, 0.0}}),
       DriveForm::Lab});
  for (const auto& m : models) {
    FilterDecomposition d = decompose(m, tau, 2048);
    CHECK(std::abs(decoherence_error(d, s) - gamma * tau) < 1e-6 * gamma * tau * 1e3);
    KeldyshMapResult k = build_keldysh_map(d, s, MapMode::Secular);
    const double exact = 1.0 - k.map.matrix().trace().real() / 4.0;
    CHECK(exact == doctest::Approx(gamma * tau).epsilon(1e-3));
  }
  CHECK(decoherence_error(decompose(models[0], tau, 256), NoiseSpectrum(WhiteSpectrum{0.0})) == 0.0);
}

TEST_CASE("gate and state transfer error closed forms") {
  const double gt = 0.05;
  SuperOperator deph = matexp(cplx(gt) * dissipator_superop(sigma_z()));
  std::mt19937 rng(9);
  Operator u = testing_support::random_unitary(2, rng);
  CHECK(gate_error(u, u, SuperOperator::identity(2)) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(gate_error(u, u, deph) == doctest::Approx(0.5 * (1 - std::exp(-2 * gt))).epsilon(1e-13));
  ErrorValue e = gate_error_detail(u, u, deph);
  CHECK(std::abs(e.imag_residue) < 1e-12);
  // X target but identity achieved
  CHECK(gate_error(sigma_x(), identity_op(2), SuperOperator::identity(2)) == doctest::Approx(1.0));

  SuperOperator ad = matexp(cplx(gt) * dissipator_superop(sigma_minus()));
  Operator ee = Operator::Zero(2, 2), gg = Operator::Zero(2, 2);
  ee(1, 1) = 1;
  gg(0, 0) = 1;
  CHECK(state_transfer_error(ee, ee, identity_op(2), ad) == doctest::Approx(1 - std::exp(-2 * gt)).epsilon(1e-12));
  // |g> -> |e> by an ideal X rotation, no noise
  CHECK(state_transfer_error(gg, ee, sigma_x(), SuperOperator::identity(2)) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("decoherence error matches the exponentiated map at weak noise") {
  const double tau = 40 * kTwoPi;
  SystemModel m = qubit(1.0, sigma_x());
  FilterDecomposition d = decompose(m, tau, 2048);
  NoiseSpectrum s(TlsSpectrum{1e-6, 1.0, 10 * kTwoPi});
  KeldyshMapResult k = build_keldysh_map(d, s, MapMode::Secular);
  const double exact = 1.0 - k.map.matrix().trace().real() / 4.0;
  CHECK(decoherence_error(d, s) == doctest::Approx(exact).epsilon(0.1));
}

TEST_CASE("floquet decomposition") {
  SUBCASE("undriven reduces to the static decomposition") {
    SystemModel m = qubit(1.0, sigma_x() + 0.3 * sigma_z());
    TransitionDecomposition f = floquet_decomposition(m, kTwoPi / 1.3);
    TransitionDecomposition st = static_decomposition(m.h_static, m.coupling);
    REQUIRE(f.omegas.size() == st.omegas.size());
    for (std::size_t i = 0; i < f.omegas.size(); ++i) {
      CHECK(f.omegas[i] == doctest::Approx(st.omegas[i]).epsilon(1e-9));
      CHECK(max_abs(f.ops[i] - st.ops[i]) < 1e-8);
    }
  }
  SUBCASE("weak resonant drive channels") {
    const double wq = 1.0, d0 = 0.02;
    SystemModel m = qubit(wq, sigma_x());
    m.drives.push_back({sigma_plus(), DriveEnvelope(SinusoidEnvelope{d0, wq, 0.0}), DriveForm::Rotating});
    TransitionDecomposition f = floquet_decomposition(m, kTwoPi / wq);
    auto find = [&](double w) -> const Operator* {
      for (std::size_t i = 0; i < f.omegas.size(); ++i)
        if (std::abs(f.omegas[i] - w) < 1e-7) return &f.ops[i];
      return nullptr;
    };
    const cplx I(0, 1);
    const Operator* a = find(wq);
    const Operator* b = find(wq + d0);
    const Operator* c = find(wq - d0);
    REQUIRE(a);
    REQUIRE(b);
    REQUIRE(c);
    CHECK(max_abs(*a - 0.5 * sigma_x()) < 1e-7);
    CHECK(max_abs(*b - 0.25 * (-sigma_z() - I * sigma_y())) < 1e-7);
    CHECK(max_abs(*c - 0.25 * (sigma_z() - I * sigma_y())) < 1e-7);
    CHECK(f.omegas.size() == 6);
    // reconstruction against the propagated coupling operator
    auto grid = uniform_grid(30.0, 64);
    auto xs = interaction_coupling(m, propagate(m, grid, PropagateOptions{0, 64, 1e-9}).unitaries);
    for (std::size_t j = 0; j < grid.size(); ++j) CHECK(max_abs(f.reconstruct(grid[j]) - xs[j]) < 1e-8);
  }
  SUBCASE("strong drive reconstruction") {
    SystemModel m;
    m.h_static = 0.5 * (sigma_x() + 1.37 * sigma_z());
    m.coupling = sigma_z();
    m.drives.push_back({sigma_z(), DriveEnvelope(SinusoidEnvelope{2.27, 1.17, 0.0}), DriveForm::Lab});
    TransitionDecomposition f = floquet_decomposition(m, kTwoPi / 1.17);
    auto grid = uniform_grid(25.0, 50);
    auto xs = interaction_coupling(m, propagate(m, grid, PropagateOptions{0, 64, 1e-9}).unitaries);
    for (std::size_t j = 0; j < grid.size(); ++j) CHECK(max_abs(f.reconstruct(grid[j]) - xs[j]) < 1e-7);
  }
  SUBCASE("non-periodic model rejected") {
    SystemModel m = qubit(1.0, sigma_x());
    m.drives.push_back({sigma_x(), DriveEnvelope(SinusoidEnvelope{0.1, 1.0, 0.0}), DriveForm::Lab});
    CHECK_THROWS_AS(floquet_decomposition(m, 3.0), std::invalid_argument);
  }
}

TEST_CASE("classical reduction: fullwave equals the double-time commutator quadrature") {
  // symmetric spectrum: C(s) real and even; Sigma rho = -int int C(t1 - t2) [x1, [x2, rho]]
  const std::vector<double> kw{-3.0, -1.0, 0.0, 1.0, 3.0};
  const std::vector<double> kv{0.0, 6e-4, 1e-3, 6e-4, 0.0};
  NoiseSpectrum s(TabulatedSpectrum{kw, kv});
  const double wq = 1.0, d0 = 0.1;
  const double tau = kTwoPi * 10.0;  // d0 tau = 2 pi: x(t) periodic on [0, tau]
  SystemModel m = qubit(wq, sigma_x());
  m.drives.push_back({sigma_plus(), DriveEnvelope(SinusoidEnvelope{d0, wq, 0.0}), DriveForm::Rotating});
  const int n = 2048;
  auto grid = uniform_grid(tau, n, true);
  auto xs = interaction_coupling(m, propagate(m, grid, PropagateOptions{0, 64, 1e-9}).unitaries);
  std::vector<Operator> per(xs.begin(), xs.end() - 1);
  DecomposeOptions keep;
  keep.truncation_tol = 0.0;
  FilterDecomposition d = fourier_decompose(per, tau, keep);
  SuperOperator full = fullwave_self_energy(d, s, 2 * d.k_max());

  auto direct = [&](int step) {
    const int nn = n / step;
    const double h = tau / nn;
    std::vector<double> c(nn + 1);
    for (int q = 0; q <= nn; ++q) c[q] = oracles::tabulated_correlation(kw, kv, q * h).real();
    // inner sums Y_i = int_0^{t_i} dt2 C(t_i - t2) x(t2)
    const Operator id = identity_op(2);
    Operator left = Operator::Zero(2, 2), right = Operator::Zero(2, 2);
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(4, 4);
    for (int i = 1; i <= nn; ++i) {
      Operator y = Operator::Zero(2, 2);
      for (int j = 0; j <= i; ++j) {
        const double wj = (j == 0 || j == i) ? 0.5 : 1.0;
        y += (wj * h * c[i - j]) * xs[j * step];
      }
      const double wi = (i == nn) ? 0.5 : 1.0;
      const Operator& x1 = xs[i * step];
      y *= wi * h;
      left += x1 * y;
      right += y * x1;
      acc += sandwich_superop(y, x1).matrix() + sandwich_superop(x1, y).matrix();
    }
    acc -= sandwich_superop(left, id).matrix() + sandwich_superop(id, right).matrix();
    return acc;
  };
  Eigen::MatrixXcd ref = (4.0 * direct(1) - direct(2)) / 3.0;
  CHECK((full.matrix() - ref).cwiseAbs().maxCoeff() < 1e-4 * ref.cwiseAbs().maxCoeff());
}

TEST_CASE("driven oscillator secular map matches the Lindblad oscillator map") {
  const double wr = 1.0, tau = 40 * kTwoPi;
  const int dim = 12, n = 2048;
  HyperbolicWindowEnvelope hw{0.2 * tau, 0.8 * tau, 2.0, SinusoidEnvelope{0.03, 1.02, 0.0}};
  auto disp = coherent_displacement(wr, {DriveEnvelope(hw)}, tau, n);
  double amax = 0.0;
  for (auto a : disp.alpha) amax = std::max(amax, std::abs(a));
  REQUIRE(amax <= 2.0);
  auto d = fourier_decompose(oscillator_coupling_samples(wr, dim, disp), tau);
  NoiseSpectrum s(OhmicSpectrum{2e-5, 20.0});
  MapOptions mo;
  mo.lamb_shift = false;
  KeldyshMapResult k = build_keldysh_map(d, s, MapMode::Secular, 0, mo);
  SuperOperator lind = cplx(tau * s.evaluate(wr)) * dissipator_superop(destroy(dim)) +
                       cplx(tau * s.evaluate(-wr)) * dissipator_superop(create(dim));
  Eigen::MatrixXcd pl = matexp(lind).matrix();
  // lowest 6-level block: rho supported on levels < 6, output restricted to levels < 6
  double worst = 0.0;
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b)
      for (int c = 0; c < 6; ++c)
        for (int e = 0; e < 6; ++e)
          worst = std::max(worst, std::abs(k.map.matrix()(a + dim * b, c + dim * e) - pl(a + dim * b, c + dim * e)));
  CHECK(worst <= 1e-3);
  CHECK(k.cptp.cptp());
}
