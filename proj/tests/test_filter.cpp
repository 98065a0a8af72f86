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


#include <cmath>
#include <random>

#include "doctest.h"
#include "keldysh/filter.hpp"
#include "keldysh/propagator.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace keldysh;
using testing_support::max_abs;

namespace {

std::vector<Operator> static_sigma_x_samples(double wq, double tau, int n) {
  std::vector<Operator> xs;
  for (double t : uniform_grid(tau, n)) {
    xs.push_back(sigma_minus() * std::polar(1.0, -wq * t) + sigma_plus() * std::polar(1.0, wq * t));
  }
  return xs;
}

// Lab-frame driven random qutrit.
std::vector<Operator> driven_samples(double tau, int n, unsigned seed) {
  std::mt19937 rng(seed);
  SystemModel m;
  m.h_static = testing_support::random_hermitian(3, rng);
  m.coupling = testing_support::random_hermitian(3, rng);
  Operator drive = testing_support::random_hermitian(3, rng);
  m.drives.push_back({drive, DriveEnvelope(SinusoidEnvelope{0.3, 1.7, 0.2}), DriveForm::Lab});
  auto grid = uniform_grid(tau, n);
  auto us = propagate(m, grid, 8);
  return interaction_coupling(m, us);
}

}  // namespace

TEST_CASE("constant coupling has a single zero mode") {
  std::vector<Operator> xs(64, sigma_z());
  auto d = fourier_decompose(xs, 3.0);
  REQUIRE(d.size() == 1);
  CHECK(d.ks()[0] == 0);
  CHECK(max_abs(d.xs()[0] - sigma_z()) < 1e-12);
  CHECK(filter_strength(d, 0) == doctest::Approx(2.0));
  CHECK(filter_strength(d, 1) == 0.0);
}

TEST_CASE("static transverse coupling splits into two modes") {
  const int cycles = 7;
  const double wq = 1.0, tau = cycles * kTwoPi / wq;
  const int n = 256;
  auto xs = static_sigma_x_samples(wq, tau, n);
  FilterDecomposition d = fourier_decompose(xs, tau);
  REQUIRE(d.size() == 2);
  // Riemann-sum oracle for the retained and a few absent modes
  for (int k = -10; k <= 10; ++k) {
    Operator ref = Operator::Zero(2, 2);
    for (int j = 0; j < n; ++j) ref += xs[j] * std::polar(1.0, k * d.omega_p() * j * tau / n);
    ref /= double(n);
    const Operator* got = d.find(k);
    if (got) CHECK(max_abs(*got - ref) < 1e-12);
    else CHECK(max_abs(ref) < 1e-12);
  }
  REQUIRE(d.find(cycles));
  REQUIRE(d.find(-cycles));
  CHECK(max_abs(*d.find(cycles) - sigma_minus()) < 1e-12);
  CHECK(max_abs(*d.find(-cycles) - sigma_plus()) < 1e-12);
  CHECK(filter_strength(d, cycles) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(filter_strength(d, -cycles) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d.sum_rule() == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(d.discarded_strength() < 1e-8 * d.sum_rule());
  for (int j = 0; j < n; j += 5) CHECK(max_abs(d.reconstruct(j * tau / n) - xs[j]) < 1e-12);
}

TEST_CASE("filter strength examples") {
  CHECK(filter_strength(sigma_z()) == doctest::Approx(2.0));
  CHECK(filter_strength(sigma_minus()) == doctest::Approx(1.0));
  CHECK(filter_strength(Operator(cplx(0.3, -2.0) * identity_op(3))) == 0.0);
}

TEST_CASE("driven decomposition: sum rule, pairing, reconstruction") {
  const double tau = 9.0;
  const int n = 2048;
  auto xs = driven_samples(tau, n, 11);
  FilterDecomposition d = fourier_decompose(xs, tau);
  const Operator& x0 = xs.front();
  const double expect = (x0 * x0).trace().real() - std::norm(x0.trace()) / 3.0;
  double total = 0.0;
  for (const auto& e : filter_strengths(d)) total += e.m;
  CHECK(std::abs(total - expect) < 1e-6);
  CHECK(std::abs(d.sum_rule() - expect) < 1e-6);
  // x(tau) != x(0): coefficients decay like 1/k and nothing can be truncated
  CHECK(std::abs(total + d.discarded_strength() - d.sum_rule()) < 1e-12);

  for (int k : d.ks()) {
    const Operator* a = d.find(k);
    const Operator* b = d.find(-k);
    REQUIRE(b);
    CHECK(max_abs(*b - a->adjoint()) < 1e-10);
    CHECK(std::abs(filter_strength(*a) - filter_strength(*b)) < 1e-10);
  }
  double err = 0.0;
  for (int j = 0; j < n; j += 7) err = std::max(err, max_abs(d.reconstruct(j * tau / n) - xs[j]));
  CHECK(err < 1e-6);

  DecomposeOptions keep_all;
  keep_all.truncation_tol = 0.0;
  FilterDecomposition full = fourier_decompose(xs, tau, keep_all);
  CHECK(full.k_max() >= d.k_max());
  CHECK(full.k_max() <= n / 2);
}

TEST_CASE("decomposition input validation") {
  std::vector<Operator> xs(48, sigma_z());
  CHECK_THROWS_AS(fourier_decompose(xs, 1.0), std::invalid_argument);
  std::vector<Operator> ys(64, sigma_z());
  CHECK_THROWS_AS(fourier_decompose(ys, 0.0), std::invalid_argument);
}

TEST_CASE("weak resonant drive shows side peaks at wq +- d") {
  const double wq = 1.0, d0 = 0.02, tau = 200 * kTwoPi / wq;
  SystemModel m;
  m.h_static = 0.5 * wq * sigma_z();
  m.coupling = sigma_x();
  m.drives.push_back({sigma_plus(), DriveEnvelope(SinusoidEnvelope{d0, wq, 0.0}), DriveForm::Rotating});
  const int n = 4096;
  auto grid = uniform_grid(tau, n);
  auto xs = interaction_coupling(m, propagate(m, grid, 4));
  auto d = fourier_decompose(xs, tau);
  auto s = filter_strengths(d);
  std::sort(s.begin(), s.end(), [](const StrengthEntry& a, const StrengthEntry& b) { return a.m > b.m; });
  std::vector<double> peaks;
  for (const auto& e : s) {
    if (e.omega <= 0) continue;
    peaks.push_back(e.omega);
    if (peaks.size() == 3) break;
  }
  std::sort(peaks.begin(), peaks.end());
  const double bin = d.omega_p();
  REQUIRE(peaks.size() == 3);
  CHECK(std::abs(peaks[0] - (wq - d0)) <= bin);
  CHECK(std::abs(peaks[1] - wq) <= bin);
  CHECK(std::abs(peaks[2] - (wq + d0)) <= bin);
}

TEST_CASE("diagonal filter function at its center") {
  for (double tau : {1.0, 4.0, 50.0}) {
    for (int k : {-3, 0, 5}) {
      cplx v = filter_function(k, k, k * kTwoPi / tau, tau);
      CHECK(v.real() == doctest::Approx(0.5 * tau * tau).epsilon(1e-14));
      CHECK(std::abs(v.imag()) < 1e-14 * tau * tau);
    }
  }
}

TEST_CASE("filter function matches the defining expression away from poles") {
  const double tau = 6.0, wp = kTwoPi / tau;
  for (int k = -3; k <= 3; ++k) {
    for (int kp = -3; kp <= 3; ++kp) {
      for (double w : {-2.3, -0.71, 0.13, 1.9, 4.4}) {
        const cplx I(0, 1);
        cplx ref = (std::exp(-I * w * tau) - 1.0) / ((w - k * wp) * (kp * wp - w));
        if (k == kp) ref -= I * tau / (w - k * wp);
        CHECK(std::abs(filter_function(k, kp, w, tau) - ref) < 1e-12 * std::max(1.0, std::abs(ref)));
      }
    }
  }
}

TEST_CASE("kernels are accurate through the series switchover") {
  // high-precision reference via long double
  const double tau = 3.0;
  for (double x : {1e-9, 3e-6, 9.9e-5, 1.01e-4, 1e-3, 0.02, 0.3, 0.99, 1.01, 7.0}) {
    const double u = x / tau;
    const long double xl = x, ul = u;
    long double sm = 0, term = -xl * xl * xl / 6;
    for (int j = 1; j < 30; ++j) {
      sm += term;
      term *= -xl * xl / ((2 * j + 2) * (2 * j + 3));
    }
    const long double ki = sm / (ul * ul);
    const long double kr = 2 * std::sin(xl / 2) * std::sin(xl / 2) / (ul * ul);
    CHECK(std::abs(kernel_imag(u, tau) - double(ki)) <= 1e-10 * std::abs(double(ki)));
    CHECK(std::abs(kernel_real(u, tau) - double(kr)) <= 1e-10 * std::abs(double(kr)));
  }
}

TEST_CASE("off-diagonal kernel is smooth across both poles") {
  const double tau = 5.0, wp = kTwoPi / tau;
  for (int k : {-2, 1}) {
    for (int kp : {0, 3}) {
      for (double pole : {k * wp, kp * wp}) {
        for (double eps : {1e-12, 1e-8, 1e-5, 1e-4}) {
          cplx a = filter_function(k, kp, pole - eps, tau);
          cplx b = filter_function(k, kp, pole + eps, tau);
          CHECK(std::abs(a - b) < 10 * eps * tau * tau);
          CHECK(std::isfinite(a.real()));
        }
      }
    }
  }
}

TEST_CASE("area rule") {
  const double tau = 2.5;
  for (int k = -3; k <= 3; ++k) {
    for (int kp = -3; kp <= 3; ++kp) {
      cplx a = oracles::area_integral(k, kp, tau);
      const double expect = k == kp ? 0.5 * tau : 0.0;
      CHECK(std::abs(a - expect) < 1e-8);
    }
  }
}

TEST_CASE("amplitude bound") {
  const double tau = 3.0, wp = kTwoPi / tau;
  const int n = 10000;
  for (int k = -10; k <= 10; k += 2) {
    for (int kp = -10; kp <= 10; ++kp) {
      const int dk = std::abs(k - kp);
      if (dk < 1) continue;
      const double bound = tau * tau / (kTwoPi * (dk - 0.5));
      double worst = 0.0;
      for (int i = 0; i < n; ++i) {
        const double w = -14 * wp + 28 * wp * i / (n - 1);
        worst = std::max(worst, std::abs(filter_function(k, kp, w, tau)));
      }
      CHECK(worst < bound);
    }
  }
}

TEST_CASE("diagonal decay bound") {
  const double tau = 4.0;
  for (int i = 1; i <= 5000; ++i) {
    const double u = 0.01 * i;
    REQUIRE(kernel_real(u, tau) <= 2.0 / (u * u) * (1 + 1e-14));
    REQUIRE(kernel_real(-u, tau) <= 2.0 / (u * u) * (1 + 1e-14));
  }
}

TEST_CASE("white noise overlaps") {
  const double gamma = 3e-3, tau = 7.0;
  OverlapIntegrator integ(NoiseSpectrum(WhiteSpectrum{gamma}), tau);
  for (int k = -4; k <= 4; ++k) {
    CHECK(std::abs(integ.diagonal(k) - 0.5 * gamma * tau) < 1e-8);
    for (int kp = -4; kp <= 4; ++kp) {
      if (kp == k) continue;
      CHECK(std::abs(integ.phi(k, kp)) < 1e-8);
    }
  }
}

TEST_CASE("1/f diagonal overlap against the sine/cosine-integral closed form") {
  const double amp = 0.01, tau = 10.0;
  for (double ir_tau : {1e-3, 1e-4}) {
    const double w_ir = ir_tau / tau, w_uv = 1e3;
    OverlapIntegrator integ(NoiseSpectrum(OneOverFSpectrum{amp, w_ir, w_uv}), tau);
    const double got = 2.0 * integ.diagonal(0).real();
    const double ref = oracles::one_over_f_diagonal(amp, w_ir, w_uv, tau);
    CHECK(std::abs(got - ref) < 1e-8 * ref);
    CHECK(std::abs(integ.diagonal(0).imag()) < 1e-10 * ref);
  }
}

TEST_CASE("partial-fraction off-diagonal path agrees with the direct kernel") {
  const double tau = 4 * kPi;
  std::vector<NoiseSpectrum> specs{NoiseSpectrum(OhmicSpectrum{1e-3, 2.0}),
                                   NoiseSpectrum(TlsSpectrum{1e-2, 1.0, 20.0}),
                                   NoiseSpectrum(TabulatedSpectrum{{-1.0, 0.5, 3.0}, {0.0, 2e-3, 0.0}})};
  for (const auto& s : specs) {
    OverlapIntegrator integ(s, tau);
    for (auto [k, kp] : std::vector<std::pair<int, int>>{{1, 2}, {-1, 3}, {0, 2}, {4, -4}}) {
      cplx a = integ.phi(k, kp), b = integ.pair_direct(k, kp);
      CHECK(std::abs(a - b) < 1e-9 * std::max(std::abs(b), 1e-4));
    }
  }
}

TEST_CASE("analytic overlaps match 2-D trapezoid double-time integrals") {
  std::mt19937 rng(2026);
  std::uniform_real_distribution<double> ur(0.0, 1.0);
  std::uniform_int_distribution<int> ki(-3, 3);
  for (int scenario = 0; scenario < 5; ++scenario) {
    const double tau = kTwoPi * (1.0 + 2.0 * ur(rng));
    std::function<cplx(double)> corr;
    NoiseSpectrum spec;
    if (scenario % 2 == 0) {
      const double amp = 1e-3 * (0.5 + ur(rng)), cut = 1.0 + 2.0 * ur(rng);
      spec = NoiseSpectrum(OhmicSpectrum{amp, cut});
      corr = [amp, cut](double s) { return oracles::ohmic_exp_correlation(amp, cut, s); };
    } else {
      std::vector<double> w{-1.0 - ur(rng), 0.3 * ur(rng), 1.0 + 2.0 * ur(rng)};
      std::vector<double> v{0.0, 1e-3 * (1 + ur(rng)), 0.0};
      spec = NoiseSpectrum(TabulatedSpectrum{w, v});
      corr = [w, v](double s) { return oracles::tabulated_correlation(w, v, s); };
    }
    OverlapIntegrator integ(spec, tau);
    for (int trial = 0; trial < 3; ++trial) {
      const int k = ki(rng), kp = trial == 0 ? k : ki(rng);
      // Richardson step over the 1024 and 2048 grids removes the O(h^2) term
      cplx ref = (4.0 * oracles::trapezoid_phi(corr, tau, k, kp, 2048) - oracles::trapezoid_phi(corr, tau, k, kp, 1024)) / 3.0;
      cplx got = integ.phi(k, kp);
      INFO("scenario " << scenario << " k=" << k << " k'=" << kp << " ref=" << ref << " got=" << got);
      CHECK(std::abs(got - ref) < 1e-4 * std::abs(ref));
    }
  }
}

TEST_CASE("ohmic spectrum without cutoff is rejected by the overlap integrator") {
  CHECK_THROWS_AS(OverlapIntegrator(NoiseSpectrum(OhmicSpectrum{1e-3}), 5.0).diagonal(0), NumericalError);
}

TEST_CASE("phi table reproduces direct evaluations") {
  OverlapIntegrator integ(NoiseSpectrum(OhmicSpectrum{1e-3, 3.0}) + NoiseSpectrum(WhiteSpectrum{1e-4}), 8.0);
  PhiTable t(integ, -5, 5, true, 2);
  for (int k = -5; k <= 5; ++k) {
    CHECK(t.diagonal(k) == integ.diagonal(k));
    for (int kp = -5; kp <= 5; ++kp) CHECK(std::abs(t.phi(k, kp) - integ.phi(k, kp)) < 1e-15);
  }
  CHECK_THROWS_AS(t.diagonal(6), std::out_of_range);
}
