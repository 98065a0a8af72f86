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

namespace keldysh {

using ComplexIntegrand = std::function<cplx(double)>;

struct QuadResult {
  cplx value = 0.0;
  double error = 0.0;
  long evaluations = 0;
  bool converged = true;
};

struct QuadOptions {
  double abs_tol = 1e-12;
  int max_panels = 20000;
};

// Globally adaptive Gauss-Kronrod (7/15) over [edges.front(), edges.back()],
// with every interior edge used as an initial panel boundary.
QuadResult integrate_gk(const ComplexIntegrand& f, const std::vector<double>& edges,
                        const QuadOptions& opts = {});

// Integral over [a, +inf) (direction = +1) or (-inf, a] (direction = -1)
// through the map w = a + direction * scale * (1 - s) / s.
QuadResult integrate_tail(const ComplexIntegrand& f, double a, double scale, int direction,
                          const QuadOptions& opts = {});

// Splits [a, b] at every point of `cuts` inside it and subdivides each
// piece so that no panel is wider than max_width.
std::vector<double> panel_edges(double a, double b, std::vector<double> cuts, double max_width);

}  // namespace keldysh
