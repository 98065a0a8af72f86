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

#include <functional>
#include <vector>

#include "keldysh/core.hpp"
#include "keldysh/spectra.hpp"

namespace keldysh {

struct DecomposeOptions {
  // Keep |k| <= K_max with discarded strength below truncation_tol * (sum rule);
  // 0 keeps every resolved mode.
  double truncation_tol = 1e-8;
  // Modes whose entries are all below drop_tol * max|x| are omitted.
  double drop_tol = 1e-14;
};

class FilterDecomposition {
 public:
  FilterDecomposition() = default;
  FilterDecomposition(double tau, int n_t, std::vector<int> ks, std::vector<Operator> xs, double sum_rule,
                      double discarded);

  double tau() const { return tau_; }
  double omega_p() const { return kTwoPi / tau_; }
  double omega(int k) const { return k * omega_p(); }
  int n_t() const { return n_t_; }
  int dim() const { return xs_.empty() ? 0 : static_cast<int>(xs_.front().rows()); }
  const std::vector<int>& ks() const { return ks_; }
  const std::vector<Operator>& xs() const { return xs_; }
  std::size_t size() const { return ks_.size(); }
  // nullptr when k is not retained.
  const Operator* find(int k) const;
  // Sum of all M_k before truncation (equals the time average of M[x(t)]).
  double sum_rule() const { return sum_rule_; }
  double discarded_strength() const { return discarded_; }
  int k_max() const;

  Operator reconstruct(double t) const;

 private:
  double tau_ = 1.0;
  int n_t_ = 0;
  std::vector<int> ks_;
  std::vector<Operator> xs_;
  double sum_rule_ = 0.0;
  double discarded_ = 0.0;
};

// x_k = (1/N) sum_j x(t_j) exp(+2 pi i k j / N) on t_j = j tau / N.
FilterDecomposition fourier_decompose(const std::vector<Operator>& samples, double tau,
                                      const DecomposeOptions& opts = {});

// M = Tr x^dag x - |Tr x|^2 / N_s, clipped at 0.
double filter_strength(const Operator& xk);
double filter_strength(const FilterDecomposition& d, int k);

struct StrengthEntry {
  int k;
  double omega;
  double m;
};
std::vector<StrengthEntry> filter_strengths(const FilterDecomposition& d);

// I_{k,k'}(w) in closed form, removable poles handled by series.
cplx filter_function(int k, int kp, double w, double tau);
// Diagonal kernel K^R(u) + i K^I(u).
double kernel_real(double u, double tau);
double kernel_imag(double u, double tau);

struct OverlapOptions {
  double rel_tol = 1e-10;   // absolute tolerance is rel_tol * max(1, |phi|)
  double window_periods = 32.0;  // resolved window half-width in units of omega_p
  int max_panels = 200000;
};

// Spectral overlaps for a fixed duration tau. The white level enters
// analytically; the remainder is integrated over resolved windows around the
// kernel poles and spectral breakpoints, with smooth/oscillatory splitting in
// between.
class OverlapIntegrator {
 public:
  OverlapIntegrator(NoiseSpectrum spectrum, double tau, OverlapOptions opts = {});

  double tau() const { return tau_; }
  const NoiseSpectrum& spectrum() const { return spectrum_; }

  // phi_{k,k} = int dw/2pi I_{k,k}(w) S(w).
  cplx diagonal(int k) const;
  // J_k = int dw/2pi S(w) (1 - exp(-i w tau)) / (w - k w_p).
  cplx line(int k) const;
  // phi_{k,k'} from the closed-form two-pole kernel (reference path).
  cplx pair_direct(int k, int kp) const;
  // phi_{k,k'}; off-diagonal entries by partial fractions of line integrals.
  cplx phi(int k, int kp) const;

 private:
  template <class Kernel>
  cplx integrate(const Kernel& kern) const;

  NoiseSpectrum spectrum_;
  double tau_;
  OverlapOptions opts_;
  std::vector<double> breakpoints_;
  Support support_;
  double white_;
};

// Table of phi_{k,k} and J_k over a contiguous k range; drive independent.
class PhiTable {
 public:
  PhiTable() = default;
  PhiTable(const OverlapIntegrator& integ, int k_lo, int k_hi, bool with_lines, int threads = 1);

  double tau() const { return tau_; }
  int k_lo() const { return k_lo_; }
  int k_hi() const { return k_hi_; }
  bool has_lines() const { return !line_.empty(); }
  bool contains(int k) const { return k >= k_lo_ && k <= k_hi_; }
  cplx diagonal(int k) const;
  cplx line(int k) const;
  cplx phi(int k, int kp) const;

 private:
  double tau_ = 0.0;
  int k_lo_ = 0;
  int k_hi_ = -1;
  std::vector<cplx> diag_;
  std::vector<cplx> line_;
};

cplx overlap_phi(const FilterDecomposition& d, const NoiseSpectrum& s, int k, int kp);

// Runs fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace keldysh
