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

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace keldysh {

using cplx = std::complex<double>;
using Operator = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Raised when a numerical procedure cannot deliver its contract
// (quadrature budget, negative damping, matexp overflow).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Linear map on column-stacked N x N matrices, stored as an N^2 x N^2 matrix.
class SuperOperator {
 public:
  SuperOperator() = default;
  explicit SuperOperator(int dim);
  SuperOperator(int dim, Eigen::MatrixXcd m);

  static SuperOperator identity(int dim);

  int dim() const { return dim_; }
  const Eigen::MatrixXcd& matrix() const { return m_; }
  Eigen::MatrixXcd& matrix() { return m_; }

  Operator apply(const Operator& rho) const;

  SuperOperator& operator+=(const SuperOperator& o);
  SuperOperator& operator-=(const SuperOperator& o);
  SuperOperator& operator*=(cplx s);

 private:
  int dim_ = 0;
  Eigen::MatrixXcd m_;
};

SuperOperator operator+(SuperOperator a, const SuperOperator& b);
SuperOperator operator-(SuperOperator a, const SuperOperator& b);
SuperOperator operator*(cplx s, SuperOperator a);
SuperOperator operator*(const SuperOperator& a, const SuperOperator& b);

// Validated state: Hermitian, unit trace, positive semidefinite.
class DensityMatrix {
 public:
  explicit DensityMatrix(Operator rho);
  static DensityMatrix pure(const CVector& ket);
  const Operator& op() const { return rho_; }
  int dim() const { return static_cast<int>(rho_.rows()); }

 private:
  Operator rho_;
};

// Named operators. Qubit basis order is (|g>, |e>), with sigma_z = |e><e| - |g><g|.
Operator identity_op(int dim);
Operator sigma_x();
Operator sigma_y();
Operator sigma_z();
Operator sigma_plus();   // |e><g|
Operator sigma_minus();  // |g><e|
Operator destroy(int dim);
Operator create(int dim);
CVector basis_ket(int dim, int index);

bool is_hermitian(const Eigen::MatrixXcd& m, double tol);
bool is_finite(const Eigen::MatrixXcd& m);
double unitarity_defect(const Operator& u);

Eigen::VectorXcd vec(const Operator& rho);
Eigen::VectorXcd vec(const DensityMatrix& rho);
Operator unvec(const Eigen::VectorXcd& v);

// A rho B as a superoperator: (B^T kron A).
SuperOperator sandwich_superop(const Operator& a, const Operator& b);
SuperOperator dissipator_superop(const Operator& l);
SuperOperator commutator_superop(const Operator& h);

inline constexpr double kDefaultExpmCap = 1099511627776.0;  // 2^40

Eigen::MatrixXcd matexp(const Eigen::MatrixXcd& m, double scaling_cap = kDefaultExpmCap);
SuperOperator matexp(const SuperOperator& s, double scaling_cap = kDefaultExpmCap);

// Eigenvalues, Hermitian solver on (M+M^dag)/2 when M is Hermitian within 1e-10.
Eigen::VectorXcd eigenvalues(const Eigen::MatrixXcd& m);

Eigen::MatrixXcd choi_of(const SuperOperator& p);

struct CptpReport {
  double min_choi_eigenvalue = 0.0;
  double tp_defect = 0.0;
  double tol = 1e-10;
  bool cptp() const { return min_choi_eigenvalue >= -tol && tp_defect <= tol; }
};

CptpReport cptp_check(const SuperOperator& p, double tol = 1e-10);

}  // namespace keldysh
