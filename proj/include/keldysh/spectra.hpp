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

#include <limits>
#include <variant>
#include <vector>

namespace keldysh {

class NoiseSpectrum;

struct WhiteSpectrum {
  double gamma = 0.0;
};

// A * w * exp(-w / cutoff) for w > 0. cutoff = +inf gives the bare linear form,
// for which the overlap integrals diverge.
struct OhmicSpectrum {
  double amplitude = 0.0;
  double cutoff = std::numeric_limits<double>::infinity();
};

// 2 pi A^2 / |w| on [w_ir, w_uv], constant below w_ir, zero above w_uv.
struct OneOverFSpectrum {
  double amplitude = 0.0;
  double omega_ir = 1e-6;
  double omega_uv = 1e3;
};

// weight * (1/T) / ((w - w_t)^2 + 1/T^2) for w > 0.
struct TlsSpectrum {
  double weight = 0.0;
  double omega_t = 1.0;
  double t_relax = 1.0;
};

// Linear interpolation through sorted knots, zero outside.
struct TabulatedSpectrum {
  std::vector<double> omega;
  std::vector<double> value;
};

struct SumSpectrum {
  std::vector<NoiseSpectrum> parts;
};

struct Support {
  double lo = 0.0;
  double hi = 0.0;
  bool empty() const { return !(hi > lo); }
};

class NoiseSpectrum {
 public:
  using Variant = std::variant<WhiteSpectrum, OhmicSpectrum, OneOverFSpectrum, TlsSpectrum,
                               TabulatedSpectrum, SumSpectrum>;

  NoiseSpectrum();
  NoiseSpectrum(WhiteSpectrum s);
  NoiseSpectrum(OhmicSpectrum s);
  NoiseSpectrum(OneOverFSpectrum s);
  NoiseSpectrum(TlsSpectrum s);
  NoiseSpectrum(TabulatedSpectrum s);
  NoiseSpectrum(SumSpectrum s);

  const Variant& variant() const { return v_; }

  double evaluate(double w) const;
  // Frequency-independent part; the remainder evaluate(w) - white_level() has
  // support support() and decays at large |w|.
  double white_level() const;
  double rest(double w) const { return evaluate(w) - white_level(); }
  Support support() const;
  // Every non-smooth or sharply peaked frequency.
  std::vector<double> breakpoints() const;

 private:
  Variant v_;
};

NoiseSpectrum operator+(const NoiseSpectrum& a, const NoiseSpectrum& b);

// tau_B(w) = sqrt(|S''(w)| / (2 S(w))).
double bath_correlation_time(const NoiseSpectrum& s, double w);

}  // namespace keldysh
