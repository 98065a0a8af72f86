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

#include "keldysh/filter.hpp"

#include <fftw3.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "fft.hpp"
#include "keldysh/quadrature.hpp"

namespace keldysh {

namespace {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

namespace detail {

void backward_dft_interleaved(std::vector<std::complex<double>>& data, int n, int howmany) {
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    int len = n;
    plan = fftw_plan_many_dft(1, &len, howmany, buf, nullptr, howmany, 1, buf, nullptr, howmany, 1, FFTW_BACKWARD,
                              FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  fftw_execute(plan);
  std::lock_guard<std::mutex> lock(fftw_planner_mutex());
  fftw_destroy_plan(plan);
}

}  // namespace detail

namespace {

bool is_power_of_two(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

int wrap_index(int k, int n) { return ((k % n) + n) % n; }

}  // namespace

FilterDecomposition::FilterDecomposition(double tau, int n_t, std::vector<int> ks, std::vector<Operator> xs,
                                         double sum_rule, double discarded)
    : tau_(tau), n_t_(n_t), ks_(std::move(ks)), xs_(std::move(xs)), sum_rule_(sum_rule), discarded_(discarded) {
  if (!(tau_ > 0.0)) throw std::invalid_argument("FilterDecomposition: tau must be positive");
  if (ks_.size() != xs_.size()) throw std::invalid_argument("FilterDecomposition: ks/xs size mismatch");
}

const Operator* FilterDecomposition::find(int k) const {
  auto it = std::lower_bound(ks_.begin(), ks_.end(), k);
  if (it == ks_.end() || *it != k) return nullptr;
  return &xs_[static_cast<std::size_t>(it - ks_.begin())];
}

int FilterDecomposition::k_max() const {
  int m = 0;
  for (int k : ks_) m = std::max(m, std::abs(k));
  return m;
}

Operator FilterDecomposition::reconstruct(double t) const {
  if (xs_.empty()) return Operator();
  Operator x = Operator::Zero(xs_.front().rows(), xs_.front().cols());
  for (std::size_t i = 0; i < ks_.size(); ++i) x += xs_[i] * std::polar(1.0, -omega(ks_[i]) * t);
  return x;
}

double filter_strength(const Operator& xk) {
  const double n = static_cast<double>(xk.rows());
  const double m = xk.squaredNorm() - std::norm(xk.trace()) / n;
  return std::max(0.0, m);
}

double filter_strength(const FilterDecomposition& d, int k) {
  const Operator* x = d.find(k);
  return x ? filter_strength(*x) : 0.0;
}

std::vector<StrengthEntry> filter_strengths(const FilterDecomposition& d) {
  std::vector<StrengthEntry> out;
  out.reserve(d.size());
  for (std::size_t i = 0; i < d.size(); ++i)
    out.push_back({d.ks()[i], d.omega(d.ks()[i]), filter_strength(d.xs()[i])});
  return out;
}

FilterDecomposition fourier_decompose(const std::vector<Operator>& samples, double tau, const DecomposeOptions& opts) {
  if (!(tau > 0.0)) throw std::invalid_argument("fourier_decompose: tau must be positive");
  if (!is_power_of_two(samples.size()))
    throw std::invalid_argument("fourier_decompose: sample count must be a power of two");
  const int n = static_cast<int>(samples.size());
  const int ns = static_cast<int>(samples.front().rows());
  const int ne = ns * ns;
  for (const auto& s : samples)
    if (s.rows() != ns || s.cols() != ns) throw std::invalid_argument("fourier_decompose: dimension mismatch");

  std::vector<cplx> buf(static_cast<std::size_t>(n) * ne);
  for (int j = 0; j < n; ++j)
    for (int e = 0; e < ne; ++e) buf[static_cast<std::size_t>(j * ne + e)] = samples[static_cast<std::size_t>(j)].data()[e];
  detail::backward_dft_interleaved(buf, n, ne);
  auto mode = [&](int k) {
    const int idx = wrap_index(k, n);
    Operator x(ns, ns);
    for (int e = 0; e < ne; ++e) x.data()[e] = buf[static_cast<std::size_t>(idx * ne + e)] / double(n);
    return x;
  };

  // Bins k = -n/2 .. n/2; the Nyquist coefficient is split evenly between
  // +-n/2 so the retained set stays Hermitian-paired and interpolates the
  // samples.
  const int h = n / 2;
  auto coefficient = [&](int k) {
    Operator x = mode(k);
    if (std::abs(k) == h) x *= 0.5;
    return x;
  };
  std::vector<double> m(static_cast<std::size_t>(h + 1));  // m_k + m_{-k}
  double total = 0.0;
  double scale = 0.0;
  for (int k = -h + 1; k <= h; ++k) {
    Operator x = mode(k);
    const double mk = filter_strength(x);
    total += mk;
    scale = std::max(scale, x.cwiseAbs().maxCoeff());
    if (k == h) m[static_cast<std::size_t>(h)] = 2.0 * filter_strength(Operator(0.5 * x));
    else m[static_cast<std::size_t>(std::abs(k))] += mk;
  }
  // Smallest K whose discarded strength total - sum_{|k|<=K} M_k stays under
  // tolerance.
  std::vector<double> kept(static_cast<std::size_t>(h + 1));
  double acc = 0.0;
  for (int k = 0; k <= h; ++k) {
    acc += m[static_cast<std::size_t>(k)];
    kept[static_cast<std::size_t>(k)] = acc;
  }
  int kmax = h;
  if (opts.truncation_tol > 0.0) {
    const double budget = opts.truncation_tol * total;
    while (kmax > 0 && total - kept[static_cast<std::size_t>(kmax - 1)] < budget) --kmax;
  }
  const double discarded = std::max(0.0, total - kept[static_cast<std::size_t>(kmax)]);
  std::vector<int> ks;
  std::vector<Operator> xs;
  for (int k = -kmax; k <= kmax; ++k) {
    Operator x = coefficient(k);
    if (x.cwiseAbs().maxCoeff() <= opts.drop_tol * scale) continue;
    ks.push_back(k);
    xs.push_back(std::move(x));
  }
  return FilterDecomposition(tau, n, std::move(ks), std::move(xs), total, discarded);
}

namespace {

// (exp(-i x) - 1) / x, entire.
cplx expm1_over(double x) {
  if (std::abs(x) < 0.5) {
    cplx term(0.0, -1.0);  // (-i)^1 / 1!
    cplx acc = term;
    for (int n = 2; n <= 22; ++n) {
      term *= cplx(0.0, -1.0) * x / double(n);
      acc += term;
    }
    return acc;
  }
  return (std::polar(1.0, -x) - 1.0) / x;
}

// sin(x) - x without cancellation.
double sin_minus_x(double x) {
  if (std::abs(x) < 1.0) {
    double term = -x * x * x / 6.0;
    double acc = term;
    for (int n = 5; n <= 27; n += 2) {
      term *= -x * x / (double(n - 1) * n);
      acc += term;
    }
    return acc;
  }
  return std::sin(x) - x;
}

}  // namespace

double kernel_real(double u, double tau) {
  const double x = u * tau;
  if (std::abs(x) < 1e-4) {
    const double x2 = x * x;
    return tau * tau * (0.5 - x2 / 24.0 + x2 * x2 / 720.0 - x2 * x2 * x2 / 40320.0);
  }
  const double s = std::sin(0.5 * x);
  return 2.0 * s * s / (u * u);
}

double kernel_imag(double u, double tau) {
  const double x = u * tau;
  if (std::abs(x) < 1e-4) {
    const double x2 = x * x;
    return tau * tau * x * (-1.0 / 6.0 + x2 / 120.0 - x2 * x2 / 5040.0 + x2 * x2 * x2 / 362880.0);
  }
  return sin_minus_x(x) / (u * u);
}

cplx filter_function(int k, int kp, double w, double tau) {
  const double wp = kTwoPi / tau;
  const double u = w - k * wp;
  if (k == kp) return cplx(kernel_real(u, tau), kernel_imag(u, tau));
  const double v = w - kp * wp;
  // 1 - exp(-i w tau) = -u tau E(u tau) = -v tau E(v tau); divide out the nearer pole.
  if (std::abs(u) <= std::abs(v)) return -tau * expm1_over(u * tau) / v;
  return -tau * expm1_over(v * tau) / u;
}

namespace {

// Each kernel F(w) splits as smooth(w) + amp(w) exp(-i w tau) away from its poles.
struct DiagKernel {
  double c, tau;
  std::vector<double> centers() const { return {c}; }
  cplx full(double w) const { return {kernel_real(w - c, tau), kernel_imag(w - c, tau)}; }
  cplx smooth(double w) const {
    const double u = w - c;
    return cplx(1.0 / (u * u), -tau / u);
  }
  cplx amp(double w) const {
    const double u = w - c;
    return -1.0 / (u * u);
  }
};

struct LineKernel {
  double c, tau;
  std::vector<double> centers() const { return {c}; }
  cplx full(double w) const { return -tau * expm1_over((w - c) * tau); }
  cplx smooth(double w) const { return 1.0 / (w - c); }
  cplx amp(double w) const { return -1.0 / (w - c); }
};

struct PairKernel {
  int k, kp;
  double tau;
  std::vector<double> centers() const { return {k * kTwoPi / tau, kp * kTwoPi / tau}; }
  cplx full(double w) const { return filter_function(k, kp, w, tau); }
  cplx smooth(double w) const {
    const double wp = kTwoPi / tau;
    return 1.0 / ((w - k * wp) * (w - kp * wp));
  }
  cplx amp(double w) const { return -smooth(w); }
};

bool has_unbounded_ohmic(const NoiseSpectrum& s) {
  if (const auto* o = std::get_if<OhmicSpectrum>(&s.variant())) return std::isinf(o->cutoff) && o->amplitude > 0;
  if (const auto* sum = std::get_if<SumSpectrum>(&s.variant())) {
    for (const auto& p : sum->parts)
      if (has_unbounded_ohmic(p)) return true;
  }
  return false;
}

}  // namespace

OverlapIntegrator::OverlapIntegrator(NoiseSpectrum spectrum, double tau, OverlapOptions opts)
    : spectrum_(std::move(spectrum)), tau_(tau), opts_(opts) {
  if (!(tau_ > 0.0)) throw std::invalid_argument("OverlapIntegrator: tau must be positive");
  if (has_unbounded_ohmic(spectrum_))
    throw NumericalError("overlap integrals diverge for an Ohmic spectrum without a finite cutoff");
  breakpoints_ = spectrum_.breakpoints();
  support_ = spectrum_.support();
  white_ = spectrum_.white_level();
}

template <class Kernel>
cplx OverlapIntegrator::integrate(const Kernel& kern) const {
  if (support_.empty()) return 0.0;
  const double wp = kTwoPi / tau_;
  const double half = opts_.window_periods * wp;
  const double lo = support_.lo;
  const double hi = support_.hi;
  const double inv2pi = 1.0 / kTwoPi;

  std::vector<double> nodes = breakpoints_;
  for (double c : kern.centers()) nodes.push_back(c);
  std::sort(nodes.begin(), nodes.end());

  // Resolved windows clipped to the support, merged.
  std::vector<std::pair<double, double>> win;
  for (double x : nodes) {
    const double a = std::max(lo, x - half);
    const double b = std::min(hi, x + half);
    if (!(b > a)) continue;
    if (!win.empty() && a <= win.back().second) {
      win.back().second = std::max(win.back().second, b);
    } else {
      win.emplace_back(a, b);
    }
  }
  if (win.empty()) return 0.0;

  const double rest_scale = 1.0;
  auto rest = [this](double w) { return spectrum_.rest(w); };
  ComplexIntegrand f_full = [&](double w) -> cplx { return rest(w) * kern.full(w) * inv2pi; };
  ComplexIntegrand f_smooth = [&](double w) -> cplx { return rest(w) * kern.smooth(w) * inv2pi; };
  auto h = [&](double w) -> cplx { return rest(w) * kern.amp(w) * inv2pi; };
  // Boundary term of the oscillatory part, P(x) = e^{-i tau x} sum_n h^{(n)}(x) / (i tau)^{n+1}.
  auto boundary = [&](double x) -> cplx {
    const double d = half / 16.0;
    const cplx hm2 = h(x - 2 * d), hm1 = h(x - d), h0 = h(x), hp1 = h(x + d), hp2 = h(x + 2 * d);
    const cplx d1 = (hm2 - 8.0 * hm1 + 8.0 * hp1 - hp2) / (12.0 * d);
    const cplx d2 = (-hm2 + 16.0 * hm1 - 30.0 * h0 + 16.0 * hp1 - hp2) / (12.0 * d * d);
    const cplx it(0.0, tau_);
    return std::polar(1.0, -tau_ * x) * (h0 / it + d1 / (it * it) + d2 / (it * it * it));
  };

  const int pieces = static_cast<int>(2 * win.size() + 1);
  QuadOptions qo;
  qo.abs_tol = opts_.rel_tol * rest_scale / pieces;
  qo.max_panels = opts_.max_panels;
  cplx total = 0.0;
  double err = 0.0;
  bool ok = true;
  auto accumulate = [&](const QuadResult& r) {
    total += r.value;
    err += r.error;
    ok = ok && r.converged;
  };

  std::vector<double> cuts = nodes;
  for (const auto& [a, b] : win) accumulate(integrate_gk(f_full, panel_edges(a, b, cuts, 0.5 * wp), qo));
  // Gaps between windows.
  for (std::size_t i = 0; i + 1 < win.size(); ++i) {
    const double a = win[i].second;
    const double b = win[i + 1].first;
    accumulate(integrate_gk(f_smooth, panel_edges(a, b, {}, std::max(half, 0.125 * (b - a))), qo));
    total += boundary(a) - boundary(b);
  }
  if (std::isinf(hi)) {
    const double a = win.back().second;
    accumulate(integrate_tail(f_smooth, a, std::max(half, std::abs(a)), +1, qo));
    total += boundary(a);
  } else if (win.back().second < hi) {
    throw std::logic_error("overlap integration: finite support edge without a breakpoint");
  }
  if (std::isinf(lo)) {
    const double b = win.front().first;
    accumulate(integrate_tail(f_smooth, b, std::max(half, std::abs(b)), -1, qo));
    total -= boundary(b);
  } else if (win.front().first > lo) {
    throw std::logic_error("overlap integration: finite support edge without a breakpoint");
  }
  if (!ok)
    throw NumericalError("overlap quadrature did not converge (error estimate " + std::to_string(err) + ")");
  return total;
}

cplx OverlapIntegrator::diagonal(int k) const {
  DiagKernel kern{k * kTwoPi / tau_, tau_};
  return integrate(kern) + cplx(0.5 * white_ * tau_, 0.0);
}

cplx OverlapIntegrator::line(int k) const {
  LineKernel kern{k * kTwoPi / tau_, tau_};
  return integrate(kern) + cplx(0.0, 0.5 * white_);
}

cplx OverlapIntegrator::pair_direct(int k, int kp) const {
  if (k == kp) return diagonal(k);
  PairKernel kern{k, kp, tau_};
  return integrate(kern);
}

cplx OverlapIntegrator::phi(int k, int kp) const {
  if (k == kp) return diagonal(k);
  return (line(k) - line(kp)) / ((k - kp) * kTwoPi / tau_);
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex fail_mutex;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(fail_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

PhiTable::PhiTable(const OverlapIntegrator& integ, int k_lo, int k_hi, bool with_lines, int threads)
    : tau_(integ.tau()), k_lo_(k_lo), k_hi_(k_hi) {
  if (k_hi < k_lo) throw std::invalid_argument("PhiTable: empty k range");
  const int n = k_hi - k_lo + 1;
  diag_.resize(static_cast<std::size_t>(n));
  if (with_lines) line_.resize(static_cast<std::size_t>(n));
  parallel_for(n, threads, [&](int i) {
    diag_[static_cast<std::size_t>(i)] = integ.diagonal(k_lo + i);
    if (with_lines) line_[static_cast<std::size_t>(i)] = integ.line(k_lo + i);
  });
}

cplx PhiTable::diagonal(int k) const {
  if (!contains(k)) throw std::out_of_range("PhiTable: k outside table");
  return diag_[static_cast<std::size_t>(k - k_lo_)];
}

cplx PhiTable::line(int k) const {
  if (!contains(k) || line_.empty()) throw std::out_of_range("PhiTable: line integral not tabulated");
  return line_[static_cast<std::size_t>(k - k_lo_)];
}

cplx PhiTable::phi(int k, int kp) const {
  if (k == kp) return diagonal(k);
  return (line(k) - line(kp)) / ((k - kp) * kTwoPi / tau_);
}

cplx overlap_phi(const FilterDecomposition& d, const NoiseSpectrum& s, int k, int kp) {
  OverlapIntegrator integ(s, d.tau());
  return integ.phi(k, kp);
}

}  // namespace keldysh
