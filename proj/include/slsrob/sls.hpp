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

#ifndef SLSROB_SLS_HPP_
#define SLSROB_SLS_HPP_

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "slsrob/norms.hpp"
#include "slsrob/plant.hpp"
#include "slsrob/support.hpp"

namespace slsrob {

/// Max-abs violation of the FIR transcription of the state feedback
/// achievability constraint:
///   Phi_x(1) = I,
///   Phi_x(p+1) = A Phi_x(p) + B Phi_u(p)   for p = 1..T-1,
///   A Phi_x(T) + B Phi_u(T) = 0            (FIR closure).
inline double achievability_residual(const Plant& plant, const ClosedLoop& cl) {
  const int T = cl.horizon();
  if (T < 1) throw std::invalid_argument("achievability_residual: horizon must be >= 1");
  if (cl.phi_x.rows() != plant.n() || cl.phi_u.rows() != plant.m()) {
    throw std::invalid_argument("achievability_residual: dimensions do not match plant");
  }
  double res = (cl.phi_x.tap(1) - Matrix::Identity(plant.n(), plant.n())).cwiseAbs().maxCoeff();
  for (int p = 1; p < T; ++p) {
    const Matrix v = cl.phi_x.tap(p + 1) - plant.A * cl.phi_x.tap(p) - plant.B * cl.phi_u.tap(p);
    res = std::max(res, v.cwiseAbs().maxCoeff());
  }
  const Matrix closure = plant.A * cl.phi_x.tap(T) + plant.B * cl.phi_u.tap(T);
  return std::max(res, closure.cwiseAbs().maxCoeff());
}

/// Max-abs violation of the full control achievability constraint for
/// responses (Phi_w, Phi_v) against dynamics A and measurement map C:
///   Phi_w(1) = I, Phi_w(p+1) = Phi_w(p) A + Phi_v(p) C, closure at T.
inline double full_control_residual(const Matrix& A, const Matrix& C,
                                    const FirTransferMatrix& phi_w,
                                    const FirTransferMatrix& phi_v) {
  const int T = phi_w.horizon();
  double res = (phi_w.tap(1) - Matrix::Identity(A.rows(), A.cols())).cwiseAbs().maxCoeff();
  for (int p = 1; p < T; ++p) {
    const Matrix v = phi_w.tap(p + 1) - phi_w.tap(p) * A - phi_v.tap(p) * C;
    res = std::max(res, v.cwiseAbs().maxCoeff());
  }
  const Matrix closure = phi_w.tap(T) * A + phi_v.tap(T) * C;
  return std::max(res, closure.cwiseAbs().maxCoeff());
}

/// Time-domain realization of the controller
///   delta = x + (I - z Phi_x) delta,  u = z Phi_u delta,
/// which for Phi_x(1) = I reduces to
///   delta_t = x_t - sum_{p=2..T} Phi_x(p) delta_{t-p+1},
///   u_t     = sum_{p=1..T} Phi_u(p) delta_{t-p+1}.
class ControllerState {
 public:
  explicit ControllerState(const ClosedLoop& cl)
      : phi_x_(&cl.phi_x), phi_u_(&cl.phi_u), head_(0) {
    history_.assign(static_cast<std::size_t>(cl.horizon()),
                    Vector::Zero(cl.phi_x.rows()));
  }

  Eigen::Index state_dim() const { return phi_x_->rows(); }
  Eigen::Index input_dim() const { return phi_u_->rows(); }

  /// Consumes the measured state at time t and returns u_t.
  Vector step(const Vector& x_t) {
    if (x_t.size() != phi_x_->rows()) {
      throw std::invalid_argument("ControllerState: state dimension mismatch");
    }
    const int T = phi_x_->horizon();
    Vector delta = x_t;
    for (int p = 2; p <= T; ++p) {
      delta -= phi_x_->tap(p) * past(p - 1);
    }
    push(delta);
    Vector u = Vector::Zero(phi_u_->rows());
    for (int p = 1; p <= T; ++p) {
      u += phi_u_->tap(p) * past(p - 1);
    }
    return u;
  }

 private:
  // past(0) is the most recent delta, past(k) the one k steps back.
  const Vector& past(int k) const {
    const int T = static_cast<int>(history_.size());
    return history_[static_cast<std::size_t>(((head_ - 1 - k) % T + T) % T)];
  }

  void push(const Vector& delta) {
    history_[static_cast<std::size_t>(head_)] = delta;
    head_ = (head_ + 1) % static_cast<int>(history_.size());
  }

  const FirTransferMatrix* phi_x_;
  const FirTransferMatrix* phi_u_;
  std::vector<Vector> history_;
  int head_;
};

inline Vector controller_step(ControllerState& state, const Vector& x_t) {
  return state.step(x_t);
}

struct Trajectory {
  Matrix x;  // (horizon+1) x n, row t is x_t, x_0 = 0
  Matrix u;  // horizon x m, row t is u_t
};

/// Rolls the plant x_{t+1} = A x_t + B u_t + w_t from x_0 = 0 with the
/// realized controller in the loop. w has one row per step (may have fewer
/// rows than the horizon; missing rows are zero).
inline Trajectory closed_loop_rollout(const Plant& plant, const ClosedLoop& cl, const Matrix& w,
                                      int horizon) {
  if (horizon < 1) throw std::invalid_argument("closed_loop_rollout: horizon must be >= 1");
  ControllerState ctrl(cl);
  Trajectory traj;
  traj.x = Matrix::Zero(horizon + 1, plant.n());
  traj.u = Matrix::Zero(horizon, plant.m());
  Vector x = Vector::Zero(plant.n());
  for (int t = 0; t < horizon; ++t) {
    const Vector u = ctrl.step(x);
    Vector wt = Vector::Zero(plant.n());
    if (t < w.rows()) wt = w.row(t).transpose();
    x = plant.A * x + plant.B * u + wt;
    traj.u.row(t) = u.transpose();
    traj.x.row(t + 1) = x.transpose();
  }
  return traj;
}

/// Diagonal nonlinear time-varying uncertainty sample: per-node gain
/// sequences with a declared norm bound. kind selects which uncertainty norm
/// the bound refers to: NuMaxElt means sum_i sup_t |gain_i(t)| <= bound,
/// L1RowMax / LinfColMax mean max_i sup_t |gain_i(t)| <= bound.
struct Uncertainty {
  Matrix gains;  // horizon x n, entry (t, i) = Delta_ii(t)
  double bound = 0.0;
  NormKind kind = NormKind::NuMaxElt;

  bool bound_consistent(double tol = 1e-9) const {
    if (gains.size() == 0) return true;
    const Vector sup = gains.cwiseAbs().colwise().maxCoeff().transpose();
    const double measured = (kind == NormKind::NuMaxElt) ? sup.sum() : sup.maxCoeff();
    return measured <= bound + tol;
  }
};

/// Seeded piecewise-constant diagonal gain sequences, sign-switching at
/// random times, normalized so the declared-kind norm equals bound exactly.
inline Uncertainty sample_uncertainty(Eigen::Index n, NormKind kind, double bound,
                                      std::uint64_t seed, int horizon) {
  if (bound < 0.0) throw std::invalid_argument("sample_uncertainty: bound must be >= 0");
  if (horizon < 1) throw std::invalid_argument("sample_uncertainty: horizon must be >= 1");
  Uncertainty unc;
  unc.kind = kind;
  unc.bound = bound;
  unc.gains = Matrix::Zero(horizon, n);
  if (bound == 0.0) return unc;

  std::mt19937_64 rng(seed);
  for (Eigen::Index i = 0; i < n; ++i) {
    double value = 2.0 * detail::uniform01(rng) - 1.0;
    for (int t = 0; t < horizon; ++t) {
      if (detail::uniform01(rng) < 0.1) {
        value = 2.0 * detail::uniform01(rng) - 1.0;
      }
      unc.gains(t, i) = value;
    }
  }
  const Vector sup = unc.gains.cwiseAbs().colwise().maxCoeff().transpose();
  const double measured = (kind == NormKind::NuMaxElt) ? sup.sum() : sup.maxCoeff();
  if (measured > 0.0) unc.gains *= bound / measured;
  return unc;
}

struct UncertainRollout {
  Trajectory traj;
  bool bounded = true;
  double peak = 0.0;
};

/// Simulates the feedback interconnection w_t = Delta(t) z_t with
/// z = Hx x + Hu u, kicked by a unit impulse at node (seed mod n) at t = 0.
/// bounded applies the divergence heuristic: the trajectory peak may not
/// exceed 1e6 times the peak over the first T steps. This is a smoke test,
/// not a stability certificate.
inline UncertainRollout uncertain_rollout(const Plant& plant, const ClosedLoop& cl,
                                          const RegulationMap& H, const Uncertainty& unc,
                                          int horizon, std::uint64_t seed) {
  if (!unc.bound_consistent()) {
    throw std::invalid_argument("uncertain_rollout: uncertainty violates its declared bound");
  }
  ControllerState ctrl(cl);
  UncertainRollout out;
  out.traj.x = Matrix::Zero(horizon + 1, plant.n());
  out.traj.u = Matrix::Zero(horizon, plant.m());
  Vector x = Vector::Zero(plant.n());
  const Eigen::Index kick = static_cast<Eigen::Index>(seed % static_cast<std::uint64_t>(plant.n()));
  double early_peak = 0.0;
  for (int t = 0; t < horizon; ++t) {
    const Vector u = ctrl.step(x);
    const Vector z = H.Hx * x + H.Hu * u;
    Vector w = Vector::Zero(plant.n());
    if (t < unc.gains.rows()) {
      w = unc.gains.row(t).transpose().cwiseProduct(z);
    }
    if (t == 0) w(kick) += 1.0;
    x = plant.A * x + plant.B * u + w;
    out.traj.u.row(t) = u.transpose();
    out.traj.x.row(t + 1) = x.transpose();
    const double mag = x.cwiseAbs().maxCoeff();
    out.peak = std::max(out.peak, mag);
    if (t < cl.horizon()) early_peak = std::max(early_peak, mag);
  }
  out.bounded = out.peak <= 1e6 * std::max(early_peak, 1e-300);
  return out;
}

}  // namespace slsrob

#endif  // SLSROB_SLS_HPP_
