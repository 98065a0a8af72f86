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

#include "doctest.h"
#include "keldysh/core.hpp"
#include "test_support.hpp"

using namespace keldysh;
using namespace testing_support;

namespace {

Operator eg_coherence(cplx c) {
  Operator rho = Operator::Zero(2, 2);
  rho(0, 0) = 0.5;
  rho(1, 1) = 0.5;
  rho(1, 0) = c;  // rho_eg
  rho(0, 1) = std::conj(c);
  return rho;
}

}  // namespace

TEST_CASE("vec of ground-state projector is the first unit vector") {
  Operator g = basis_ket(2, 0) * basis_ket(2, 0).adjoint();
  Eigen::VectorXcd v = vec(g);
  CHECK(v.size() == 4);
  CHECK(v(0) == cplx(1.0));
  CHECK(v.tail(3).norm() == 0.0);
}

TEST_CASE("vec/unvec round trip on random density matrices") {
  std::mt19937 rng(11);
  for (int i = 0; i < 20; ++i) {
    const int n = 2 + i % 4;
    Operator rho = random_density(n, rng);
    CHECK(unvec(vec(rho)) == rho);
    Operator m = random_matrix(n, rng);
    CHECK(unvec(vec(m)) == m);
  }
}

TEST_CASE("vec of (sigma_x + I)/2 is uniform") {
  Eigen::VectorXcd v = vec(Operator(0.5 * sigma_x() + 0.5 * identity_op(2)));
  for (int i = 0; i < 4; ++i) CHECK(v(i) == cplx(0.5));
}

TEST_CASE("unvec rejects non-square lengths") { CHECK_THROWS(unvec(Eigen::VectorXcd::Zero(3))); }

TEST_CASE("sandwich superoperator matches A rho B") {
  std::mt19937 rng(3);
  Operator a = random_matrix(3, rng), b = random_matrix(3, rng), rho = random_matrix(3, rng);
  CHECK(max_abs(sandwich_superop(a, b).apply(rho) - a * rho * b) < 1e-12);
}

TEST_CASE("dissipator of sigma_z halves nothing on diagonals, damps coherence by -2c") {
  const cplx c(0.3, -0.1);
  Operator out = dissipator_superop(sigma_z()).apply(eg_coherence(c));
  CHECK(std::abs(out(1, 0) - (-2.0 * c)) < 1e-14);
  CHECK(std::abs(out(0, 0)) < 1e-14);
  CHECK(std::abs(out(1, 1)) < 1e-14);
}

TEST_CASE("dissipator of identity vanishes") {
  CHECK(max_abs(dissipator_superop(identity_op(3)).matrix()) < 1e-15);
}

TEST_CASE("dissipator output is traceless and the trace row vanishes") {
  std::mt19937 rng(5);
  for (int i = 0; i < 10; ++i) {
    Operator rho = random_density(2, rng);
    CHECK(std::abs(dissipator_superop(sigma_minus()).apply(rho).trace()) < 1e-14);
  }
  for (int n = 2; n <= 4; ++n) {
    SuperOperator d = dissipator_superop(random_matrix(n, rng));
    Eigen::RowVectorXcd trace_row = Eigen::RowVectorXcd::Zero(n * n);
    for (int a = 0; a < n; ++a) trace_row += d.matrix().row(a + n * a);
    CHECK(trace_row.cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("dissipator matches L rho L^dag - {L^dag L, rho}/2") {
  std::mt19937 rng(6);
  Operator l = random_matrix(3, rng), rho = random_density(3, rng);
  Operator ref = l * rho * l.adjoint() - 0.5 * (l.adjoint() * l * rho + rho * l.adjoint() * l);
  CHECK(max_abs(dissipator_superop(l).apply(rho) - ref) < 1e-12);
}

TEST_CASE("commutator of sigma_z/2 rotates the coherence at unit rate") {
  Operator out = commutator_superop(0.5 * sigma_z()).apply(eg_coherence(1.0));
  CHECK(std::abs(out(1, 0) - cplx(0.0, -1.0)) < 1e-14);
  CHECK(std::abs(out(0, 0)) < 1e-14);
}

TEST_CASE("commutator of identity vanishes; output preserves Hermiticity") {
  CHECK(max_abs(commutator_superop(identity_op(2)).matrix()) < 1e-15);
  std::mt19937 rng(8);
  for (int i = 0; i < 10; ++i) {
    Operator h = random_hermitian(3, rng), rho = random_hermitian(3, rng);
    Operator out = commutator_superop(h).apply(rho);
    CHECK(max_abs(out - out.adjoint()) < 1e-12);
    CHECK(std::abs(out.trace()) < 1e-12);
  }
}

TEST_CASE("commutator rejects non-Hermitian input") { CHECK_THROWS(commutator_superop(sigma_plus())); }

TEST_CASE("matexp basic identities") {
  CHECK(max_abs(matexp(Eigen::MatrixXcd::Zero(3, 3)) - Eigen::MatrixXcd::Identity(3, 3)) == 0.0);
  Eigen::MatrixXcd m = cplx(0, -kPi / 2) * sigma_x();
  CHECK(max_abs(matexp(m) - cplx(0, -1) * sigma_x()) < 1e-14);
}

TEST_CASE("matexp of dephasing generator") {
  const double gt = 0.37;
  SuperOperator p = matexp(gt * dissipator_superop(sigma_z()));
  const cplx c(0.2, 0.15);
  Operator out = p.apply(eg_coherence(c));
  CHECK(std::abs(out(1, 0) - c * std::exp(-2 * gt)) < 1e-14);
  CHECK(std::abs(out(0, 0) - 0.5) < 1e-14);
  CHECK(std::abs(out(1, 1) - 0.5) < 1e-14);
}

TEST_CASE("matexp matches eigendecomposition on normal matrices") {
  std::mt19937 rng(21);
  for (int i = 0; i < 20; ++i) {
    const int n = 2 + i % 6;
    Operator u = random_unitary(n, rng);
    std::normal_distribution<double> g(0.0, 1.0 + i);
    Eigen::VectorXcd d(n);
    for (int j = 0; j < n; ++j) d(j) = cplx(g(rng), g(rng));
    Eigen::MatrixXcd m = u * d.asDiagonal() * u.adjoint();
    Eigen::MatrixXcd ref = u * d.array().exp().matrix().asDiagonal() * u.adjoint();
    CHECK(max_abs(matexp(m) - ref) <= 1e-12 * std::max(1.0, max_abs(ref)));
  }
}

TEST_CASE("matexp of commuting sum factorizes") {
  std::mt19937 rng(4);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int i = 0; i < 10; ++i) {
    Eigen::VectorXcd a(4), b(4);
    for (int j = 0; j < 4; ++j) {
      a(j) = cplx(g(rng), g(rng));
      b(j) = cplx(g(rng), g(rng));
    }
    Eigen::MatrixXcd ma = a.asDiagonal(), mb = b.asDiagonal();
    Eigen::MatrixXcd lhs = matexp(Eigen::MatrixXcd(ma + mb));
    Eigen::MatrixXcd rhs = matexp(ma) * matexp(mb);
    CHECK(max_abs(lhs - rhs) <= 1e-10 * std::max(1.0, max_abs(lhs)));
  }
}

TEST_CASE("matexp enforces the scaling budget") {
  Eigen::MatrixXcd big = 1e30 * Eigen::MatrixXcd::Identity(2, 2);
  CHECK_THROWS_AS(matexp(big), NumericalError);
  CHECK_NOTHROW(matexp(Eigen::MatrixXcd(1e3 * Eigen::MatrixXcd::Identity(2, 2)), 1e6));
}

TEST_CASE("Choi matrix of identity is N times the maximally entangled projector") {
  for (int n = 2; n <= 3; ++n) {
    Eigen::MatrixXcd c = choi_of(SuperOperator::identity(n));
    Eigen::VectorXcd omega = Eigen::VectorXcd::Zero(n * n);
    for (int i = 0; i < n; ++i) omega(i * n + i) = 1.0;
    CHECK(max_abs(c - omega * omega.adjoint()) < 1e-15);
    CptpReport r = cptp_check(SuperOperator::identity(n));
    CHECK(std::abs(r.min_choi_eigenvalue) < 1e-12);
    CHECK(r.tp_defect == 0.0);
    CHECK(r.cptp());
  }
}

TEST_CASE("amplitude damping channel is CPTP") {
  SuperOperator p = matexp(0.8 * dissipator_superop(sigma_minus()));
  CptpReport r = cptp_check(p, 1e-12);
  CHECK(r.min_choi_eigenvalue >= -1e-12);
  CHECK(r.tp_defect <= 1e-12);
  Operator e = basis_ket(2, 1) * basis_ket(2, 1).adjoint();
  CHECK(std::abs(p.apply(e)(1, 1) - std::exp(-0.8)) < 1e-14);
}

TEST_CASE("exponentiated dissipators of Hermitian operators are CPTP") {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int i = 0; i < 20; ++i) {
    const int n = 2 + i % 3;
    SuperOperator p = matexp(u(rng) * dissipator_superop(random_hermitian(n, rng)));
    CHECK(cptp_check(p, 1e-10).cptp());
  }
}

TEST_CASE("non-CP maps are flagged") {
  // Transpose map: positive, not completely positive.
  SuperOperator t(2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) t.matrix()(j + 2 * i, i + 2 * j) = 1.0;
  CptpReport r = cptp_check(t);
  CHECK(r.min_choi_eigenvalue < -0.5);
  CHECK(r.tp_defect < 1e-15);
  CHECK_FALSE(r.cptp());
}

TEST_CASE("density matrix validation") {
  std::mt19937 rng(2);
  CHECK_NOTHROW(DensityMatrix(random_density(3, rng)));
  CHECK_THROWS(DensityMatrix(Operator(2.0 * identity_op(2))));
  Operator bad = Operator::Zero(2, 2);
  bad(0, 0) = 1.5;
  bad(1, 1) = -0.5;
  CHECK_THROWS(DensityMatrix(bad));
  CHECK_THROWS(DensityMatrix(sigma_plus()));
}

TEST_CASE("Pauli algebra in the (g, e) basis") {
  const cplx i(0, 1);
  CHECK(max_abs(sigma_x() * sigma_y() - i * sigma_z()) < 1e-15);
  CHECK(max_abs(sigma_plus() - 0.5 * (sigma_x() + i * sigma_y())) < 1e-15);
  CHECK(max_abs(sigma_z() * basis_ket(2, 1) - basis_ket(2, 1)) < 1e-15);
}

TEST_CASE("eigenvalues use the Hermitian path when applicable") {
  Eigen::VectorXcd ev = eigenvalues(sigma_x());
  CHECK(std::abs(ev(0) + 1.0) < 1e-14);
  CHECK(std::abs(ev(1) - 1.0) < 1e-14);
  Eigen::VectorXcd ev2 = eigenvalues(sigma_plus());
  CHECK(ev2.cwiseAbs().maxCoeff() < 1e-12);
}
