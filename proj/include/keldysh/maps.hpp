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

#include <optional>
#include <vector>

#include "keldysh/core.hpp"
#include "keldysh/filter.hpp"
#include "keldysh/propagator.hpp"
#include "keldysh/spectra.hpp"

namespace keldysh {

enum class MapMode { Secular, Fullwave };

struct MapOptions {
  // With lamb_shift = false the commutator terms are dropped and the damping
  // operators are projected onto their traceless part (an identity component
  // of x_k only generates a Hamiltonian term).
  bool lamb_shift = true;
  double negative_tol = 1e-12;
  int threads = 1;
};

struct KeldyshMapResult {
  SuperOperator sigma;
  SuperOperator map;
  MapMode mode = MapMode::Secular;
  int k_cut = 0;
  std::vector<int> ks;
  std::vector<cplx> phis;        // phi_{k,k} for each retained k
  std::vector<double> strengths;  // M_k for each retained k
  CptpReport cptp;
};

std::vector<cplx> diagonal_phis(const FilterDecomposition& d, const OverlapIntegrator& integ, int threads = 1);
std::vector<cplx> diagonal_phis(const FilterDecomposition& d, const PhiTable& table);

// Sigma_CP = sum_k Re(2 phi_kk) D[x_k] - i Im(phi_kk) [x_k^dag x_k, .].
SuperOperator secular_self_energy(const FilterDecomposition& d, const std::vector<cplx>& phi_diag,
                                  const MapOptions& opts = {});
SuperOperator secular_self_energy(const FilterDecomposition& d, const NoiseSpectrum& s, const MapOptions& opts = {});
SuperOperator secular_self_energy(const FilterDecomposition& d, const PhiTable& table, const MapOptions& opts = {});

// All three sandwich structures for mode pairs with |k + k'| <= k_cut. The table
// must include line integrals and cover [-k_max, k_max].
SuperOperator fullwave_self_energy(const FilterDecomposition& d, const PhiTable& table, int k_cut);
SuperOperator fullwave_self_energy(const FilterDecomposition& d, const NoiseSpectrum& s, int k_cut, int threads = 1);

KeldyshMapResult keldysh_map(const SuperOperator& sigma);
KeldyshMapResult build_keldysh_map(const FilterDecomposition& d, const PhiTable& table, MapMode mode, int k_cut = 0,
                                   const MapOptions& opts = {});
KeldyshMapResult build_keldysh_map(const FilterDecomposition& d, const NoiseSpectrum& s, MapMode mode, int k_cut = 0,
                                   const MapOptions& opts = {});

// x(t) = sum_L x(w_L) exp(-i w_L t).
struct TransitionDecomposition {
  std::vector<double> omegas;
  std::vector<Operator> ops;
  std::vector<double> quasi_energies;
  bool degenerate = false;

  Operator reconstruct(double t) const;
};

TransitionDecomposition static_decomposition(const Operator& h, const Operator& x, double tol = 1e-12);

struct FloquetOptions {
  int samples = 512;        // per drive period, power of two
  double step_tol = 1e-11;  // step-doubling tolerance of the one-period propagation
  double drop_tol = 1e-12;  // components below drop_tol * |x| are omitted
};

TransitionDecomposition floquet_decomposition(const SystemModel& model, double period,
                                              const FloquetOptions& opts = {});

// S_bar(w) = -P int dw'/2pi S(w') / (w' - w).
double principal_value_shift(const NoiseSpectrum& s, double w);

struct LindbladOptions {
  bool lamb_shift = true;
  // Replaces tau * S(0) for the zero-frequency channel (Keldysh correction for
  // spectra peaked at zero frequency).
  std::optional<double> zero_frequency_damping;
};

// tau sum_L { S(w_L) D[x(w_L)] - i S_bar(w_L) [x^dag x, .] }.
SuperOperator lindblad_reference(const TransitionDecomposition& t, const NoiseSpectrum& s, double tau,
                                 const LindbladOptions& opts = {});

// (1/N_s) sum_k M_k Re(2 phi_kk).
double decoherence_error(const FilterDecomposition& d, const std::vector<cplx>& phi_diag);
double decoherence_error(const FilterDecomposition& d, const NoiseSpectrum& s);

struct ErrorValue {
  double value = 0.0;
  double imag_residue = 0.0;
};

// Unitary channel rho -> U rho U^dag as a superoperator.
SuperOperator unitary_superop(const Operator& u);

// 1 - tr{V_tg^dag V_s Pi} / N_s^2.
ErrorValue gate_error_detail(const Operator& u_target, const Operator& u_s, const SuperOperator& map);
double gate_error(const Operator& u_target, const Operator& u_s, const SuperOperator& map);
// 1 - |tr[U^dag rho_t U Pi(rho_i)]|^2.
double state_transfer_error(const Operator& rho_init, const Operator& rho_target, const Operator& u_s,
                            const SuperOperator& map);

}  // namespace keldysh
