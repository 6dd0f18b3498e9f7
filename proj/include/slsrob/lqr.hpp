// Copyright 2026 The slsrob Authors.
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

#ifndef SLSROB_LQR_HPP_
#define SLSROB_LQR_HPP_

#include <stdexcept>

#include "slsrob/plant.hpp"
#include "slsrob/support.hpp"

namespace slsrob {

/// Infinite-horizon discrete LQR solution with the u = -K x convention.
struct LqrSolution {
  Matrix P;  // value matrix
  Matrix K;  // gain
  double closed_loop_radius = 0.0;
  double riccati_residual = 0.0;
  double cost = 0.0;  // trace(P): squared H2 cost under unit impulse covariance
};

/// Fixed-point iteration of the discrete Riccati map
///   P <- Qx + A'PA - A'PB (Qu + B'PB)^{-1} B'PA
/// to residual 1e-9; reports divergence for non-stabilizable pairs.
inline LqrSolution dare_solve(const Matrix& A, const Matrix& B, const Matrix& Qx,
                              const Matrix& Qu, double tol = 1e-9, int max_iter = 100000) {
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  if (A.cols() != n || B.rows() != n || Qx.rows() != n || Qx.cols() != n || Qu.rows() != m ||
      Qu.cols() != m) {
    throw std::invalid_argument("dare_solve: dimension mismatch");
  }

  Matrix P = Qx;
  double residual = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const Matrix BtP = B.transpose() * P;
    const Matrix G = Qu + BtP * B;
    const Matrix K = G.ldlt().solve(BtP * A);
    const Matrix Pn = Qx + A.transpose() * P * A - A.transpose() * P * B * K;
    residual = (Pn - P).cwiseAbs().maxCoeff();
    P = 0.5 * (Pn + Pn.transpose());  // keep symmetric against roundoff
    if (residual <= tol * std::max(1.0, P.cwiseAbs().maxCoeff())) break;
    if (!P.allFinite() || P.cwiseAbs().maxCoeff() > 1e14) {
      throw std::runtime_error("dare_solve: iteration diverged (pair not stabilizable?)");
    }
  }

  LqrSolution sol;
  sol.P = P;
  const Matrix BtP = B.transpose() * P;
  sol.K = (Qu + BtP * B).ldlt().solve(BtP * A);
  sol.closed_loop_radius = spectral_radius(A - B * sol.K);
  const Matrix res = P - Qx - A.transpose() * P * A +
                     A.transpose() * P * B * (Qu + BtP * B).ldlt().solve(BtP * A);
  sol.riccati_residual = res.cwiseAbs().maxCoeff();
  sol.cost = P.trace();
  if (sol.closed_loop_radius >= 1.0) {
    throw std::runtime_error("dare_solve: closed loop is not stable");
  }
  if (sol.riccati_residual > 1e-9 * std::max(1.0, P.cwiseAbs().maxCoeff())) {
    throw std::runtime_error("dare_solve: Riccati residual above tolerance");
  }
  return sol;
}

struct LqrLoop {
  ClosedLoop cl;
  double truncation_tail = 0.0;  // max absolute row sum of (A - BK)^T
};

/// FIR truncation of the static-gain closed loop: Phi_x(p) = (A - BK)^{p-1},
/// Phi_u(p) = -K Phi_x(p). The truncation tail bounds the achievability
/// residual of the truncated pair.
inline LqrLoop lqr_closed_loop(const Plant& plant, const Matrix& K, int T) {
  const Matrix Acl = plant.A - plant.B * K;
  if (spectral_radius(Acl) >= 1.0) {
    throw std::invalid_argument("lqr_closed_loop: closed loop must be stable");
  }
  FirTransferMatrix phi_x(plant.n(), plant.n(), T);
  FirTransferMatrix phi_u(plant.m(), plant.n(), T);
  Matrix power = Matrix::Identity(plant.n(), plant.n());
  for (int p = 1; p <= T; ++p) {
    phi_x.tap(p) = power;
    phi_u.tap(p) = -K * power;
    power = Acl * power;
  }
  LqrLoop loop{make_dense_closed_loop(std::move(phi_x), std::move(phi_u)),
               power.cwiseAbs().rowwise().sum().maxCoeff()};
  return loop;
}

}  // namespace slsrob

#endif  // SLSROB_LQR_HPP_
