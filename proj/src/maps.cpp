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

#include "keldysh/maps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fft.hpp"
#include "keldysh/quadrature.hpp"

namespace keldysh {

namespace {

// out += c * (a kron b), without temporaries.
void add_kron(Eigen::MatrixXcd& out, cplx c, const Operator& a, const Operator& b) {
  const Eigen::Index n = b.rows();
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      const cplx s = c * a(i, j);
      if (s == cplx(0.0)) continue;
      out.block(i * n, j * n, n, n) += s * b;
    }
}

}  // namespace

std::vector<cplx> diagonal_phis(const FilterDecomposition& d, const OverlapIntegrator& integ, int threads) {
  std::vector<cplx> out(d.size());
  parallel_for(static_cast<int>(d.size()), threads,
               [&](int i) { out[static_cast<std::size_t>(i)] = integ.diagonal(d.ks()[static_cast<std::size_t>(i)]); });
  return out;
}

std::vector<cplx> diagonal_phis(const FilterDecomposition& d, const PhiTable& table) {
  std::vector<cplx> out;
  out.reserve(d.size());
  for (int k : d.ks()) out.push_back(table.diagonal(k));
  return out;
}

SuperOperator secular_self_energy(const FilterDecomposition& d, const std::vector<cplx>& phi_diag,
                                  const MapOptions& opts) {
  if (phi_diag.size() != d.size()) throw std::invalid_argument("secular_self_energy: phi table size mismatch");
  const int n = d.dim();
  if (n == 0) throw std::invalid_argument("secular_self_energy: empty decomposition");
  Eigen::MatrixXcd jump = Eigen::MatrixXcd::Zero(n * n, n * n);
  Operator left = Operator::Zero(n, n);
  Operator right = Operator::Zero(n, n);
  const Operator id = Operator::Identity(n, n);
  for (std::size_t i = 0; i < d.size(); ++i) {
    double gamma = 2.0 * phi_diag[i].real();
    if (gamma < -opts.negative_tol)
      throw NumericalError("secular_self_energy: negative damping coefficient " + std::to_string(gamma) +
                           " at k = " + std::to_string(d.ks()[i]));
    gamma = std::max(gamma, 0.0);
    const double shift = opts.lamb_shift ? phi_diag[i].imag() : 0.0;
    Operator l = d.xs()[i];
    if (!opts.lamb_shift) l -= (l.trace() / double(n)) * id;
    const Operator ll = l.adjoint() * l;
    add_kron(jump, gamma, l.conjugate(), l);
    left += cplx(0.5 * gamma, shift) * ll;
    right += cplx(0.5 * gamma, -shift) * ll;
  }
  Eigen::MatrixXcd m = jump;
  add_kron(m, -1.0, id, left);
  add_kron(m, -1.0, right.transpose(), id);
  return SuperOperator(n, std::move(m));
}

SuperOperator secular_self_energy(const FilterDecomposition& d, const NoiseSpectrum& s, const MapOptions& opts) {
  OverlapIntegrator integ(s, d.tau());
  return secular_self_energy(d, diagonal_phis(d, integ, opts.threads), opts);
}

SuperOperator secular_self_energy(const FilterDecomposition& d, const PhiTable& table, const MapOptions& opts) {
  return secular_self_energy(d, diagonal_phis(d, table), opts);
}

SuperOperator fullwave_self_energy(const FilterDecomposition& d, const PhiTable& table, int k_cut) {
  if (k_cut < 0) throw std::invalid_argument("fullwave_self_energy: k_cut must be >= 0");
  const int n = d.dim();
  const Operator id = Operator::Identity(n, n);
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n * n, n * n);
  Operator left = Operator::Zero(n, n);
  Operator right = Operator::Zero(n, n);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const int k = d.ks()[i];
    const Operator& xk = d.xs()[i];
    for (int kp = -k - k_cut; kp <= -k + k_cut; ++kp) {
      const Operator* xkp = d.find(kp);
      if (!xkp) continue;
      const cplx a = table.phi(-k, kp);                // x_k x_k' rho
      const cplx b = std::conj(table.phi(k, -kp));     // rho x_k' x_k
      const cplx c = b + table.phi(-kp, k);            // x_k rho x_k'
      left += a * (xk * *xkp);
      right += b * (*xkp * xk);
      add_kron(m, c, xkp->transpose(), xk);
    }
  }
  add_kron(m, -1.0, id, left);
  add_kron(m, -1.0, right.transpose(), id);
  return SuperOperator(n, std::move(m));
}

SuperOperator fullwave_self_energy(const FilterDecomposition& d, const NoiseSpectrum& s, int k_cut, int threads) {
  OverlapIntegrator integ(s, d.tau());
  const int kmax = d.k_max();
  PhiTable table(integ, -kmax, kmax, k_cut > 0, threads);
  return fullwave_self_energy(d, table, k_cut);
}

KeldyshMapResult keldysh_map(const SuperOperator& sigma) {
  KeldyshMapResult r;
  r.sigma = sigma;
  r.map = matexp(sigma);
  r.cptp = cptp_check(r.map, 1e-10);
  return r;
}

KeldyshMapResult build_keldysh_map(const FilterDecomposition& d, const PhiTable& table, MapMode mode, int k_cut,
                                   const MapOptions& opts) {
  std::vector<cplx> phis = diagonal_phis(d, table);
  SuperOperator sigma = mode == MapMode::Secular ? secular_self_energy(d, phis, opts)
                                                 : fullwave_self_energy(d, table, k_cut);
  KeldyshMapResult r = keldysh_map(sigma);
  r.mode = mode;
  r.k_cut = mode == MapMode::Secular ? 0 : k_cut;
  r.ks = d.ks();
  r.phis = std::move(phis);
  for (const auto& x : d.xs()) r.strengths.push_back(filter_strength(x));
  return r;
}

KeldyshMapResult build_keldysh_map(const FilterDecomposition& d, const NoiseSpectrum& s, MapMode mode, int k_cut,
                                   const MapOptions& opts) {
  OverlapIntegrator integ(s, d.tau());
  const int kmax = d.k_max();
  if (mode == MapMode::Fullwave) {
    PhiTable table(integ, -kmax, kmax, k_cut > 0, opts.threads);
    return build_keldysh_map(d, table, mode, k_cut, opts);
  }
  std::vector<cplx> phis = diagonal_phis(d, integ, opts.threads);
  KeldyshMapResult r = keldysh_map(secular_self_energy(d, phis, opts));
  r.mode = mode;
  r.ks = d.ks();
  r.phis = std::move(phis);
  for (const auto& x : d.xs()) r.strengths.push_back(filter_strength(x));
  return r;
}

Operator TransitionDecomposition::reconstruct(double t) const {
  if (ops.empty()) return Operator();
  Operator x = Operator::Zero(ops.front().rows(), ops.front().cols());
  for (std::size_t i = 0; i < ops.size(); ++i) x += ops[i] * std::polar(1.0, -omegas[i] * t);
  return x;
}

namespace {

// Merges components with equal frequency and drops negligible ones.
TransitionDecomposition group_components(std::vector<std::pair<double, Operator>> comps, double drop) {
  std::sort(comps.begin(), comps.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  TransitionDecomposition out;
  for (auto& [w, op] : comps) {
    if (!out.omegas.empty() && std::abs(w - out.omegas.back()) <= 1e-9 * std::max(1.0, std::abs(w))) {
      out.ops.back() += op;
    } else {
      out.omegas.push_back(w);
      out.ops.push_back(std::move(op));
    }
  }
  TransitionDecomposition kept;
  for (std::size_t i = 0; i < out.omegas.size(); ++i) {
    if (out.ops[i].cwiseAbs().maxCoeff() <= drop) continue;
    kept.omegas.push_back(out.omegas[i]);
    kept.ops.push_back(out.ops[i]);
  }
  return kept;
}

}  // namespace

TransitionDecomposition static_decomposition(const Operator& h, const Operator& x, double tol) {
  if (!is_hermitian(h, 1e-10) || !is_hermitian(x, 1e-10))
    throw std::invalid_argument("static_decomposition: operators must be Hermitian");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (h + h.adjoint()));
  const Eigen::MatrixXcd& v = es.eigenvectors();
  const Eigen::VectorXd& e = es.eigenvalues();
  const Eigen::MatrixXcd xe = v.adjoint() * x * v;
  const Eigen::Index n = h.rows();
  std::vector<std::pair<double, Operator>> comps;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index jp = 0; jp < n; ++jp)
      comps.emplace_back(e(jp) - e(j), xe(j, jp) * v.col(j) * v.col(jp).adjoint());
  auto out = group_components(std::move(comps), tol * std::max(1.0, x.cwiseAbs().maxCoeff()));
  out.quasi_energies.assign(e.data(), e.data() + e.size());
  return out;
}

TransitionDecomposition floquet_decomposition(const SystemModel& model, double period, const FloquetOptions& opts) {
  model.validate();
  if (!(period > 0.0)) throw std::invalid_argument("floquet_decomposition: period must be positive");
  if (opts.samples < 2 || (opts.samples & (opts.samples - 1)) != 0)
    throw std::invalid_argument("floquet_decomposition: samples must be a power of two");
  for (int i = 0; i < 64; ++i) {
    const double t = period * i / 64.0 + 0.123456789 * period / 64.0;
    if ((model.hamiltonian(t) - model.hamiltonian(t + period)).cwiseAbs().maxCoeff() > 1e-10)
      throw std::invalid_argument("floquet_decomposition: Hamiltonian not periodic with the given period");
  }
  const int n = model.dim();
  const int ns = opts.samples;
  const std::vector<double> grid = uniform_grid(period, ns, true);
  PropagateOptions po;
  po.step_tol = opts.step_tol;
  po.substeps_per_period = 64;
  const Propagation prop = propagate(model, grid, po);
  const Operator& uT = prop.unitaries.back();

  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(uT);
  Eigen::VectorXcd lam = es.eigenvalues();
  Eigen::MatrixXcd w = es.eigenvectors();
  std::vector<double> eps(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) eps[static_cast<std::size_t>(j)] = -std::arg(lam(j)) / period;

  TransitionDecomposition out;
  // Degenerate quasi-energies: fix the basis inside each group by diagonalizing the coupling.
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) order[static_cast<std::size_t>(j)] = j;
  std::sort(order.begin(), order.end(), [&](int a, int b) { return eps[static_cast<std::size_t>(a)] < eps[static_cast<std::size_t>(b)]; });
  Eigen::MatrixXcd ws(n, n);
  std::vector<double> es_sorted(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    ws.col(j) = w.col(order[static_cast<std::size_t>(j)]);
    es_sorted[static_cast<std::size_t>(j)] = eps[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])];
  }
  for (int j = 0; j < n;) {
    int e = j + 1;
    while (e < n && std::abs(es_sorted[static_cast<std::size_t>(e)] - es_sorted[static_cast<std::size_t>(j)]) < 1e-8) ++e;
    if (e - j > 1) {
      out.degenerate = true;
      Eigen::HouseholderQR<Eigen::MatrixXcd> qr(ws.middleCols(j, e - j));
      Eigen::MatrixXcd q = qr.householderQ() * Eigen::MatrixXcd::Identity(n, e - j);
      Eigen::MatrixXcd xs = q.adjoint() * model.coupling * q;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> sub(0.5 * (xs + xs.adjoint()));
      ws.middleCols(j, e - j) = q * sub.eigenvectors();
    } else {
      ws.col(j).normalize();
    }
    j = e;
  }
  // Distinct eigenvalues of a unitary have orthogonal eigenvectors; re-orthonormalize against rounding.
  {
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(ws);
    Eigen::MatrixXcd q = qr.householderQ();
    Eigen::MatrixXcd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < n; ++j) {
      const cplx ph = r(j, j) / std::abs(r(j, j));
      ws.col(j) = q.col(j) * ph;
    }
  }

  // Periodic coupling matrix x_{jj'}(t) = <w_j(t)|x|w_j'(t)>, |w_j(t)> = U(t)|w_j> e^{i eps_j t}.
  const int ne = n * n;
  std::vector<cplx> buf(static_cast<std::size_t>(ns) * ne);
  for (int m = 0; m < ns; ++m) {
    const double t = grid[static_cast<std::size_t>(m)];
    Eigen::MatrixXcd wt = prop.unitaries[static_cast<std::size_t>(m)] * ws;
    for (int j = 0; j < n; ++j) wt.col(j) *= std::polar(1.0, es_sorted[static_cast<std::size_t>(j)] * t);
    Eigen::MatrixXcd xm = wt.adjoint() * model.coupling * wt;
    for (int e = 0; e < ne; ++e) buf[static_cast<std::size_t>(m * ne + e)] = xm.data()[e];
  }
  detail::backward_dft_interleaved(buf, ns, ne);
  const double wd = kTwoPi / period;
  std::vector<std::pair<double, Operator>> comps;
  for (int l = -ns / 2 + 1; l < ns / 2; ++l) {
    const int idx = ((l % ns) + ns) % ns;
    for (int j = 0; j < n; ++j)
      for (int jp = 0; jp < n; ++jp) {
        const int e = j + n * jp;  // column-major (j, jp)
        const cplx c = buf[static_cast<std::size_t>(idx * ne + e)] / double(ns);
        if (std::abs(c) == 0.0) continue;
        const double wl = es_sorted[static_cast<std::size_t>(jp)] - es_sorted[static_cast<std::size_t>(j)] + l * wd;
        comps.emplace_back(wl, c * ws.col(j) * ws.col(jp).adjoint());
      }
  }
  auto grouped = group_components(std::move(comps), opts.drop_tol * std::max(1.0, model.coupling.cwiseAbs().maxCoeff()));
  grouped.quasi_energies = es_sorted;
  grouped.degenerate = out.degenerate;
  return grouped;
}

namespace {

// Integral of S_rest(w') / (w' - w) over [a, b] (finite or infinite ends).
QuadResult pv_piece(const NoiseSpectrum& s, double w, double a, double b, const std::vector<double>& cuts,
                    const QuadOptions& qo) {
  ComplexIntegrand f = [&](double x) -> cplx { return s.rest(x) / (x - w); };
  QuadResult total;
  auto add = [&](const QuadResult& r) {
    total.value += r.value;
    total.error += r.error;
    total.converged = total.converged && r.converged;
  };
  double fa = a, fb = b;
  const double scale = std::max(1.0, std::abs(w));
  if (std::isinf(a)) {
    fa = std::min(b, w - 10.0 * scale);
    add(integrate_tail(f, fa, scale, -1, qo));
  }
  if (std::isinf(b)) {
    fb = std::max(fa, w + 10.0 * scale);
    add(integrate_tail(f, fb, scale, +1, qo));
  }
  if (fb > fa) add(integrate_gk(f, panel_edges(fa, fb, cuts, 0.0), qo));
  return total;
}

}  // namespace

double principal_value_shift(const NoiseSpectrum& s, double w) {
  const Support sup = s.support();
  if (sup.empty()) return 0.0;
  std::vector<double> cuts = s.breakpoints();
  // Excision radius: well inside the smooth neighbourhood of w.
  double dist = std::numeric_limits<double>::infinity();
  for (double b : cuts)
    if (std::abs(b - w) > 1e-12 * std::max(1.0, std::abs(w))) dist = std::min(dist, std::abs(b - w));
  const double h0 = std::min(0.25 * dist, 0.05 * std::max(1.0, std::abs(w)));
  QuadOptions qo;
  qo.abs_tol = 1e-13;
  qo.max_panels = 50000;
  auto integral = [&](double h) -> double {
    QuadResult r;
    auto add = [&](const QuadResult& q) {
      r.value += q.value;
      r.converged = r.converged && q.converged;
    };
    if (w - h > sup.lo) add(pv_piece(s, w, sup.lo, std::min(sup.hi, w - h), cuts, qo));
    if (w + h < sup.hi) add(pv_piece(s, w, std::max(sup.lo, w + h), sup.hi, cuts, qo));
    if (!r.converged) throw NumericalError("principal value quadrature did not converge");
    return r.value.real();
  };
  if (w + h0 <= sup.lo || w - h0 >= sup.hi) return -integral(0.0) / kTwoPi;
  // Neville extrapolation of I(h) to h -> 0 over h0, h0/2, h0/4, h0/8.
  double hs[4], t[4];
  for (int i = 0; i < 4; ++i) {
    hs[i] = h0 / std::ldexp(1.0, i);
    t[i] = integral(hs[i]);
  }
  double p[4] = {t[0], t[1], t[2], t[3]};
  double prev = p[2];
  for (int m = 1; m < 4; ++m) {
    for (int i = 3; i >= m; --i) p[i] = (hs[i - m] * p[i] - hs[i] * p[i - 1]) / (hs[i - m] - hs[i]);
    if (m == 2) prev = p[3];
  }
  const double est = p[3];
  const double scale = std::max({std::abs(est), std::abs(t[0]), 1e-300});
  if (std::abs(est - prev) > 1e-6 * scale + 1e-12)
    throw NumericalError("principal value extrapolation unstable: spectrum singular near w = " + std::to_string(w));
  return -est / kTwoPi;
}

SuperOperator lindblad_reference(const TransitionDecomposition& t, const NoiseSpectrum& s, double tau,
                                 const LindbladOptions& opts) {
  if (t.ops.empty()) throw std::invalid_argument("lindblad_reference: empty decomposition");
  const int n = static_cast<int>(t.ops.front().rows());
  SuperOperator sigma(n);
  for (std::size_t i = 0; i < t.ops.size(); ++i) {
    const double w = t.omegas[i];
    const Operator& l = t.ops[i];
    double damping = tau * s.evaluate(w);
    if (opts.zero_frequency_damping && std::abs(w) < 1e-9) damping = *opts.zero_frequency_damping;
    sigma += cplx(damping) * dissipator_superop(l);
    if (opts.lamb_shift) {
      const double shift = principal_value_shift(s, w);
      Operator ll = l.adjoint() * l;
      ll = 0.5 * (ll + ll.adjoint());
      sigma += cplx(tau * shift) * commutator_superop(ll);
    }
  }
  return sigma;
}

double decoherence_error(const FilterDecomposition& d, const std::vector<cplx>& phi_diag) {
  if (phi_diag.size() != d.size()) throw std::invalid_argument("decoherence_error: phi table size mismatch");
  double e = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) e += filter_strength(d.xs()[i]) * 2.0 * phi_diag[i].real();
  return d.dim() > 0 ? std::max(0.0, e / d.dim()) : 0.0;
}

double decoherence_error(const FilterDecomposition& d, const NoiseSpectrum& s) {
  OverlapIntegrator integ(s, d.tau());
  return decoherence_error(d, diagonal_phis(d, integ));
}

SuperOperator unitary_superop(const Operator& u) { return sandwich_superop(u, u.adjoint()); }

ErrorValue gate_error_detail(const Operator& u_target, const Operator& u_s, const SuperOperator& map) {
  const int n = map.dim();
  if (u_target.rows() != n || u_s.rows() != n) throw std::invalid_argument("gate_error: dimension mismatch");
  const Eigen::MatrixXcd vt = unitary_superop(u_target).matrix();
  const Eigen::MatrixXcd vs = unitary_superop(u_s).matrix();
  const cplx tr = (vt.adjoint() * vs * map.matrix()).trace() / double(n * n);
  return ErrorValue{1.0 - tr.real(), tr.imag()};
}

double gate_error(const Operator& u_target, const Operator& u_s, const SuperOperator& map) {
  return gate_error_detail(u_target, u_s, map).value;
}

double state_transfer_error(const Operator& rho_init, const Operator& rho_target, const Operator& u_s,
                            const SuperOperator& map) {
  const Operator evolved = map.apply(rho_init);
  const cplx f = (u_s.adjoint() * rho_target * u_s * evolved).trace();
  return 1.0 - std::norm(f);
}

}  // namespace keldysh
