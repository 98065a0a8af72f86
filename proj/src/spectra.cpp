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

#include "keldysh/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "keldysh/core.hpp"

namespace keldysh {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

NoiseSpectrum::NoiseSpectrum() : v_(WhiteSpectrum{0.0}) {}

NoiseSpectrum::NoiseSpectrum(WhiteSpectrum s) : v_(s) {
  require(std::isfinite(s.gamma) && s.gamma >= 0.0, "white spectrum: gamma must be non-negative");
}

NoiseSpectrum::NoiseSpectrum(OhmicSpectrum s) : v_(s) {
  require(std::isfinite(s.amplitude) && s.amplitude >= 0.0, "ohmic spectrum: amplitude must be non-negative");
  require(s.cutoff > 0.0, "ohmic spectrum: cutoff must be positive");
}

NoiseSpectrum::NoiseSpectrum(OneOverFSpectrum s) : v_(s) {
  require(std::isfinite(s.amplitude) && s.amplitude >= 0.0, "1/f spectrum: amplitude must be non-negative");
  require(s.omega_ir > 0.0 && s.omega_uv > s.omega_ir && std::isfinite(s.omega_uv),
          "1/f spectrum: need 0 < omega_ir < omega_uv < inf");
}

NoiseSpectrum::NoiseSpectrum(TlsSpectrum s) : v_(s) {
  require(std::isfinite(s.weight) && s.weight >= 0.0, "tls spectrum: weight must be non-negative");
  require(s.t_relax > 0.0 && std::isfinite(s.t_relax), "tls spectrum: relaxation time must be positive");
  require(std::isfinite(s.omega_t), "tls spectrum: frequency must be finite");
}

NoiseSpectrum::NoiseSpectrum(TabulatedSpectrum s) : v_(std::move(s)) {
  const auto& t = std::get<TabulatedSpectrum>(v_);
  require(t.omega.size() == t.value.size() && t.omega.size() >= 2, "tabulated spectrum: need >= 2 (omega, S) rows");
  for (std::size_t i = 0; i < t.omega.size(); ++i) {
    require(std::isfinite(t.omega[i]) && std::isfinite(t.value[i]), "tabulated spectrum: non-finite entry");
    require(t.value[i] >= 0.0, "tabulated spectrum: negative value");
    if (i > 0) require(t.omega[i] > t.omega[i - 1], "tabulated spectrum: omega must be strictly increasing");
  }
}

NoiseSpectrum::NoiseSpectrum(SumSpectrum s) : v_(std::move(s)) {}

double NoiseSpectrum::evaluate(double w) const {
  return std::visit(
      overloaded{
          [](const WhiteSpectrum& s) { return s.gamma; },
          [w](const OhmicSpectrum& s) {
            if (w <= 0.0) return 0.0;
            return std::isinf(s.cutoff) ? s.amplitude * w : s.amplitude * w * std::exp(-w / s.cutoff);
          },
          [w](const OneOverFSpectrum& s) {
            const double a = std::abs(w);
            if (a > s.omega_uv) return 0.0;
            return kTwoPi * s.amplitude * s.amplitude / std::max(a, s.omega_ir);
          },
          [w](const TlsSpectrum& s) {
            if (w <= 0.0) return 0.0;
            const double g = 1.0 / s.t_relax;
            const double x = w - s.omega_t;
            return s.weight * g / (x * x + g * g);
          },
          [w](const TabulatedSpectrum& s) {
            if (w < s.omega.front() || w > s.omega.back()) return 0.0;
            auto it = std::upper_bound(s.omega.begin(), s.omega.end(), w);
            if (it == s.omega.end()) return s.value.back();
            const std::size_t i = static_cast<std::size_t>(it - s.omega.begin());
            const double t = (w - s.omega[i - 1]) / (s.omega[i] - s.omega[i - 1]);
            return (1.0 - t) * s.value[i - 1] + t * s.value[i];
          },
          [w](const SumSpectrum& s) {
            double acc = 0.0;
            for (const auto& p : s.parts) acc += p.evaluate(w);
            return acc;
          },
      },
      v_);
}

double NoiseSpectrum::white_level() const {
  return std::visit(overloaded{
                        [](const WhiteSpectrum& s) { return s.gamma; },
                        [](const SumSpectrum& s) {
                          double acc = 0.0;
                          for (const auto& p : s.parts) acc += p.white_level();
                          return acc;
                        },
                        [](const auto&) { return 0.0; },
                    },
                    v_);
}

Support NoiseSpectrum::support() const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return std::visit(overloaded{
                        [](const WhiteSpectrum&) { return Support{0.0, 0.0}; },
                        [](const OhmicSpectrum& s) { return s.amplitude > 0 ? Support{0.0, inf} : Support{}; },
                        [](const OneOverFSpectrum& s) {
                          return s.amplitude > 0 ? Support{-s.omega_uv, s.omega_uv} : Support{};
                        },
                        [](const TlsSpectrum& s) { return s.weight > 0 ? Support{0.0, inf} : Support{}; },
                        [](const TabulatedSpectrum& s) { return Support{s.omega.front(), s.omega.back()}; },
                        [](const SumSpectrum& s) {
                          Support out;
                          bool any = false;
                          for (const auto& p : s.parts) {
                            Support q = p.support();
                            if (q.empty()) continue;
                            out = any ? Support{std::min(out.lo, q.lo), std::max(out.hi, q.hi)} : q;
                            any = true;
                          }
                          return out;
                        },
                    },
                    v_);
}

std::vector<double> NoiseSpectrum::breakpoints() const {
  std::vector<double> out = std::visit(
      overloaded{
          [](const WhiteSpectrum&) { return std::vector<double>{}; },
          [](const OhmicSpectrum&) { return std::vector<double>{0.0}; },
          [](const OneOverFSpectrum& s) {
            return std::vector<double>{-s.omega_uv, -s.omega_ir, 0.0, s.omega_ir, s.omega_uv};
          },
          [](const TlsSpectrum& s) {
            std::vector<double> b{0.0};
            if (s.omega_t > 0.0) b.push_back(s.omega_t);
            return b;
          },
          [](const TabulatedSpectrum& s) { return s.omega; },
          [](const SumSpectrum& s) {
            std::vector<double> b;
            for (const auto& p : s.parts) {
              auto q = p.breakpoints();
              b.insert(b.end(), q.begin(), q.end());
            }
            return b;
          },
      },
      v_);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

NoiseSpectrum operator+(const NoiseSpectrum& a, const NoiseSpectrum& b) {
  SumSpectrum s;
  s.parts = {a, b};
  return NoiseSpectrum(std::move(s));
}

double bath_correlation_time(const NoiseSpectrum& s, double w) {
  const double sw = s.evaluate(w);
  if (!(sw > 0.0)) throw std::domain_error("bath_correlation_time: spectrum vanishes at query frequency");
  return std::visit(
      overloaded{
          [](const WhiteSpectrum&) { return 0.0; },
          [w](const OhmicSpectrum& o) {
            if (std::isinf(o.cutoff)) return 0.0;
            // S'' / S for A w exp(-w/c).
            const double r = std::abs(-2.0 / (o.cutoff * w) + 1.0 / (o.cutoff * o.cutoff));
            return std::sqrt(0.5 * r);
          },
          [w](const TlsSpectrum& t) {
            const double g = 1.0 / t.t_relax;
            const double x = w - t.omega_t;
            const double d = x * x + g * g;
            const double r = std::abs(6.0 * x * x - 2.0 * g * g) / (d * d);
            return std::sqrt(0.5 * r);
          },
          [&s, w, sw](const auto&) {
            const double h = 1e-4 * std::max(std::abs(w), 1.0);
            const double d2 = (s.evaluate(w + h) - 2.0 * sw + s.evaluate(w - h)) / (h * h);
            return std::sqrt(0.5 * std::abs(d2) / sw);
          },
      },
      s.variant());
}

}  // namespace keldysh
