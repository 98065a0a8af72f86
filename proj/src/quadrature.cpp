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

#include "keldysh/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace keldysh {

namespace {

constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.0};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a, b;
  cplx value;
  double error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

Panel gk15(const ComplexIntegrand& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  cplx fv[15];
  fv[7] = f(c);
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[j];
    fv[j] = f(c - dx);
    fv[14 - j] = f(c + dx);
  }
  cplx k = kWgk[7] * fv[7];
  cplx g = kWg[3] * fv[7];
  double resabs = kWgk[7] * std::abs(fv[7]);
  for (int j = 0; j < 7; ++j) {
    k += kWgk[j] * (fv[j] + fv[14 - j]);
    resabs += kWgk[j] * (std::abs(fv[j]) + std::abs(fv[14 - j]));
    if (j % 2 == 1) g += kWg[j / 2] * (fv[j] + fv[14 - j]);
  }
  const cplx mean = 0.5 * k;
  double resasc = kWgk[7] * std::abs(fv[7] - mean);
  for (int j = 0; j < 7; ++j) resasc += kWgk[j] * (std::abs(fv[j] - mean) + std::abs(fv[14 - j] - mean));
  k *= h;
  g *= h;
  resabs *= std::abs(h);
  resasc *= std::abs(h);
  double err = std::abs(k - g);
  if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  const double floor = 50.0 * std::numeric_limits<double>::epsilon() * resabs;
  err = std::max(err, floor);
  return Panel{a, b, k, err};
}

}  // namespace

QuadResult integrate_gk(const ComplexIntegrand& f, const std::vector<double>& edges, const QuadOptions& opts) {
  QuadResult res;
  if (edges.size() < 2) return res;
  std::priority_queue<Panel> heap;
  cplx total = 0.0;
  double err = 0.0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    if (!(edges[i + 1] > edges[i])) continue;
    Panel p = gk15(f, edges[i], edges[i + 1]);
    res.evaluations += 15;
    total += p.value;
    err += p.error;
    heap.push(p);
  }
  int panels = static_cast<int>(heap.size());
  while (err > opts.abs_tol && !heap.empty()) {
    if (panels >= opts.max_panels) {
      res.converged = false;
      break;
    }
    Panel worst = heap.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      res.converged = false;
      break;
    }
    heap.pop();
    Panel l = gk15(f, worst.a, mid);
    Panel r = gk15(f, mid, worst.b);
    res.evaluations += 30;
    total += l.value + r.value - worst.value;
    err += l.error + r.error - worst.error;
    heap.push(l);
    heap.push(r);
    ++panels;
  }
  // Re-sum to shed accumulated cancellation in the running totals.
  total = 0.0;
  err = 0.0;
  while (!heap.empty()) {
    total += heap.top().value;
    err += heap.top().error;
    heap.pop();
  }
  res.value = total;
  res.error = err;
  if (err > opts.abs_tol) res.converged = false;
  return res;
}

QuadResult integrate_tail(const ComplexIntegrand& f, double a, double scale, int direction, const QuadOptions& opts) {
  const double d = direction >= 0 ? 1.0 : -1.0;
  ComplexIntegrand g = [&](double s) -> cplx {
    if (s <= 0.0) return 0.0;
    const double w = a + d * scale * (1.0 - s) / s;
    return f(w) * (scale / (s * s));
  };
  std::vector<double> edges = {0.0};
  for (int k = 12; k >= 1; --k) edges.push_back(std::ldexp(1.0, -k));
  edges.push_back(1.0);
  return integrate_gk(g, edges, opts);
}

std::vector<double> panel_edges(double a, double b, std::vector<double> cuts, double max_width) {
  cuts.push_back(a);
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  std::vector<double> nodes;
  for (double c : cuts) {
    if (c < a || c > b) continue;
    if (!nodes.empty() && c - nodes.back() <= 1e-14 * std::max(1.0, std::abs(c))) continue;
    nodes.push_back(c);
  }
  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const double len = nodes[i + 1] - nodes[i];
    const int n = max_width > 0.0 ? std::max(1, static_cast<int>(std::ceil(len / max_width))) : 1;
    for (int j = 0; j < n; ++j) out.push_back(nodes[i] + len * j / n);
  }
  if (!nodes.empty()) out.push_back(nodes.back());
  return out;
}

}  // namespace keldysh
