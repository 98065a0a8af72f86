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

#include "keldysh/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace keldysh {

namespace {

void require_square(const Eigen::MatrixXcd& m, const char* what) {
  if (m.rows() != m.cols()) throw std::invalid_argument(std::string(what) + ": matrix not square");
}

void require_same_dim(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b, const char* what) {
  require_square(a, what);
  require_square(b, what);
  if (a.rows() != b.rows()) throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

}  // namespace

SuperOperator::SuperOperator(int dim) : dim_(dim), m_(Eigen::MatrixXcd::Zero(dim * dim, dim * dim)) {
  if (dim <= 0) throw std::invalid_argument("SuperOperator: dim must be positive");
}

SuperOperator::SuperOperator(int dim, Eigen::MatrixXcd m) : dim_(dim), m_(std::move(m)) {
  if (dim <= 0 || m_.rows() != dim * dim || m_.cols() != dim * dim)
    throw std::invalid_argument("SuperOperator: matrix must be dim^2 x dim^2");
}

SuperOperator SuperOperator::identity(int dim) {
  return SuperOperator(dim, Eigen::MatrixXcd::Identity(dim * dim, dim * dim));
}

Operator SuperOperator::apply(const Operator& rho) const {
  if (rho.rows() != dim_ || rho.cols() != dim_)
    throw std::invalid_argument("SuperOperator::apply: dimension mismatch");
  return unvec(m_ * vec(rho));
}

SuperOperator& SuperOperator::operator+=(const SuperOperator& o) {
  if (o.dim_ != dim_) throw std::invalid_argument("SuperOperator: dimension mismatch");
  m_ += o.m_;
  return *this;
}

SuperOperator& SuperOperator::operator-=(const SuperOperator& o) {
  if (o.dim_ != dim_) throw std::invalid_argument("SuperOperator: dimension mismatch");
  m_ -= o.m_;
  return *this;
}

SuperOperator& SuperOperator::operator*=(cplx s) {
  m_ *= s;
  return *this;
}

SuperOperator operator+(SuperOperator a, const SuperOperator& b) { return a += b; }
SuperOperator operator-(SuperOperator a, const SuperOperator& b) { return a -= b; }
SuperOperator operator*(cplx s, SuperOperator a) { return a *= s; }

SuperOperator operator*(const SuperOperator& a, const SuperOperator& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("SuperOperator: dimension mismatch");
  return SuperOperator(a.dim(), a.matrix() * b.matrix());
}

DensityMatrix::DensityMatrix(Operator rho) : rho_(std::move(rho)) {
  require_square(rho_, "DensityMatrix");
  if (!is_finite(rho_)) throw std::invalid_argument("DensityMatrix: non-finite entries");
  if (!is_hermitian(rho_, 1e-12)) throw std::invalid_argument("DensityMatrix: not Hermitian");
  if (std::abs(rho_.trace() - 1.0) > 1e-12) throw std::invalid_argument("DensityMatrix: trace != 1");
  Eigen::MatrixXcd h = 0.5 * (rho_ + rho_.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-10) throw std::invalid_argument("DensityMatrix: negative eigenvalue");
}

DensityMatrix DensityMatrix::pure(const CVector& ket) {
  CVector k = ket / ket.norm();
  return DensityMatrix(k * k.adjoint());
}

Operator identity_op(int dim) { return Operator::Identity(dim, dim); }

Operator sigma_x() {
  Operator m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

Operator sigma_y() {
  // (g, e) ordering: <e|sigma_y|g> = -i.
  Operator m(2, 2);
  m << cplx(0, 0), cplx(0, 1), cplx(0, -1), cplx(0, 0);
  return m;
}

Operator sigma_z() {
  Operator m(2, 2);
  m << -1, 0, 0, 1;
  return m;
}

Operator sigma_plus() {
  Operator m = Operator::Zero(2, 2);
  m(1, 0) = 1.0;
  return m;
}

Operator sigma_minus() {
  Operator m = Operator::Zero(2, 2);
  m(0, 1) = 1.0;
  return m;
}

Operator destroy(int dim) {
  Operator a = Operator::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

Operator create(int dim) { return destroy(dim).adjoint(); }

CVector basis_ket(int dim, int index) {
  if (index < 0 || index >= dim) throw std::invalid_argument("basis_ket: index out of range");
  CVector v = CVector::Zero(dim);
  v(index) = 1.0;
  return v;
}

bool is_hermitian(const Eigen::MatrixXcd& m, double tol) {
  if (m.rows() != m.cols()) return false;
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

bool is_finite(const Eigen::MatrixXcd& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (!std::isfinite(m.data()[i].real()) || !std::isfinite(m.data()[i].imag())) return false;
  }
  return true;
}

double unitarity_defect(const Operator& u) {
  return (u.adjoint() * u - Operator::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff();
}

Eigen::VectorXcd vec(const Operator& rho) {
  require_square(rho, "vec");
  return Eigen::Map<const Eigen::VectorXcd>(rho.data(), rho.size());
}

Eigen::VectorXcd vec(const DensityMatrix& rho) { return vec(rho.op()); }

Operator unvec(const Eigen::VectorXcd& v) {
  const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(v.size()))));
  if (n * n != v.size() || n == 0) throw std::invalid_argument("unvec: length is not a perfect square");
  return Eigen::Map<const Operator>(v.data(), n, n);
}

namespace {

Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace

SuperOperator sandwich_superop(const Operator& a, const Operator& b) {
  require_same_dim(a, b, "sandwich_superop");
  return SuperOperator(static_cast<int>(a.rows()), kron(b.transpose(), a));
}

SuperOperator dissipator_superop(const Operator& l) {
  require_square(l, "dissipator_superop");
  const auto n = static_cast<int>(l.rows());
  const Operator id = Operator::Identity(n, n);
  const Operator ll = l.adjoint() * l;
  Eigen::MatrixXcd m = kron(l.conjugate(), l) - 0.5 * kron(id, ll) - 0.5 * kron(ll.transpose(), id);
  return SuperOperator(n, std::move(m));
}

SuperOperator commutator_superop(const Operator& h) {
  require_square(h, "commutator_superop");
  if (!is_hermitian(h, 1e-10)) throw std::invalid_argument("commutator_superop: operator not Hermitian");
  const auto n = static_cast<int>(h.rows());
  const Operator id = Operator::Identity(n, n);
  Eigen::MatrixXcd m = cplx(0, -1) * (kron(id, h) - kron(h.transpose(), id));
  return SuperOperator(n, std::move(m));
}

namespace {

// Pade coefficients and thresholds for scaling and squaring.
constexpr std::array<double, 14> kB13 = {
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
    129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
    1323241920.0,        40840800.0,          960960.0,           16380.0,
    182.0,               1.0};
constexpr std::array<double, 4> kB3 = {120.0, 60.0, 12.0, 1.0};
constexpr std::array<double, 6> kB5 = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
constexpr std::array<double, 8> kB7 = {17297280.0, 8648640.0, 1995840.0, 277200.0,
                                       25200.0,    1512.0,    56.0,      1.0};
constexpr std::array<double, 10> kB9 = {17643225600.0, 8821612800.0, 2075673600.0, 302702400.0,
                                        30270240.0,    2162160.0,    110880.0,     3960.0,
                                        90.0,          1.0};
constexpr double kTheta3 = 1.495585217958292e-2;
constexpr double kTheta5 = 2.539398330063230e-1;
constexpr double kTheta7 = 9.504178996162932e-1;
constexpr double kTheta9 = 2.097847961257068e0;
constexpr double kTheta13 = 5.371920351148152e0;

template <std::size_t K>
Eigen::MatrixXcd pade_low(const Eigen::MatrixXcd& a, const std::array<double, K>& b) {
  const Eigen::Index n = a.rows();
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(n, n);
  const Eigen::MatrixXcd a2 = a * a;
  Eigen::MatrixXcd pw = id;
  Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(n, n);
  Eigen::MatrixXcd v = Eigen::MatrixXcd::Zero(n, n);
  for (std::size_t j = 0; j < K; j += 2) {
    v += b[j] * pw;
    u += b[j + 1] * pw;
    pw = pw * a2;
  }
  u = a * u;
  return (v - u).partialPivLu().solve(v + u);
}

Eigen::MatrixXcd pade13(const Eigen::MatrixXcd& a) {
  const Eigen::Index n = a.rows();
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(n, n);
  const Eigen::MatrixXcd a2 = a * a;
  const Eigen::MatrixXcd a4 = a2 * a2;
  const Eigen::MatrixXcd a6 = a4 * a2;
  const auto& b = kB13;
  Eigen::MatrixXcd u = a * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 +
                            b[3] * a2 + b[1] * id);
  Eigen::MatrixXcd v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 +
                       b[2] * a2 + b[0] * id;
  return (v - u).partialPivLu().solve(v + u);
}

}  // namespace

Eigen::MatrixXcd matexp(const Eigen::MatrixXcd& m, double scaling_cap) {
  require_square(m, "matexp");
  if (!is_finite(m)) throw std::invalid_argument("matexp: non-finite entries");
  if (m.rows() == 0) return m;
  const double norm1 = m.cwiseAbs().colwise().sum().maxCoeff();
  if (norm1 <= kTheta3) return pade_low(m, kB3);
  if (norm1 <= kTheta5) return pade_low(m, kB5);
  if (norm1 <= kTheta7) return pade_low(m, kB7);
  if (norm1 <= kTheta9) return pade_low(m, kB9);
  int s = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / kTheta13))));
  if (std::ldexp(1.0, s) > scaling_cap)
    throw NumericalError("matexp: norm " + std::to_string(norm1) + " exceeds scaling budget");
  Eigen::MatrixXcd r = pade13(m / std::ldexp(1.0, s));
  for (int i = 0; i < s; ++i) r = r * r;
  return r;
}

SuperOperator matexp(const SuperOperator& s, double scaling_cap) {
  return SuperOperator(s.dim(), matexp(s.matrix(), scaling_cap));
}

Eigen::VectorXcd eigenvalues(const Eigen::MatrixXcd& m) {
  require_square(m, "eigenvalues");
  if (is_hermitian(m, 1e-10)) {
    Eigen::MatrixXcd h = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cast<cplx>();
  }
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(m, false);
  return es.eigenvalues();
}

Eigen::MatrixXcd choi_of(const SuperOperator& p) {
  const int n = p.dim();
  const Eigen::MatrixXcd& m = p.matrix();
  Eigen::MatrixXcd c(n * n, n * n);
  // C = sum_ij |i><j| kron P(|i><j|); vec index of |a><b| is a + n b.
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) c(i * n + a, j * n + b) = m(a + n * b, i + n * j);
  return c;
}

CptpReport cptp_check(const SuperOperator& p, double tol) {
  CptpReport r;
  r.tol = tol;
  const int n = p.dim();
  const Eigen::MatrixXcd c = choi_of(p);
  Eigen::MatrixXcd h = 0.5 * (c + c.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
  r.min_choi_eigenvalue = es.eigenvalues().minCoeff();
  // Hermiticity preservation failure shows up as a non-Hermitian Choi matrix.
  const double antiherm = (c - c.adjoint()).cwiseAbs().maxCoeff();
  if (antiherm > tol) r.min_choi_eigenvalue = std::min(r.min_choi_eigenvalue, -antiherm);
  const Eigen::MatrixXcd& m = p.matrix();
  double defect = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      cplx tr = 0.0;
      for (int a = 0; a < n; ++a) tr += m(a + n * a, i + n * j);
      defect = std::max(defect, std::abs(tr - (i == j ? 1.0 : 0.0)));
    }
  r.tp_defect = defect;
  return r;
}

}  // namespace keldysh
