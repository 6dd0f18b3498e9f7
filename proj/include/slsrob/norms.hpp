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

#ifndef SLSROB_NORMS_HPP_
#define SLSROB_NORMS_HPP_

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "slsrob/support.hpp"

namespace slsrob {

/// Matrix functionals used as robustness / performance criteria.
///   L1RowMax  - maximum absolute row sum    (L1 robust stability)
///   LinfColMax- maximum absolute column sum (Linf robust stability)
///   NuMaxElt  - maximum absolute element    (nu robust stability)
///   H2        - Frobenius norm              (performance only)
enum class NormKind { L1RowMax, LinfColMax, NuMaxElt, H2 };

enum class Separability { Row, Column, Element };

constexpr Separability separability_of(NormKind kind) {
  switch (kind) {
    case NormKind::L1RowMax: return Separability::Row;
    case NormKind::LinfColMax: return Separability::Column;
    case NormKind::NuMaxElt: return Separability::Element;
    case NormKind::H2: return Separability::Element;
  }
  return Separability::Element;
}

inline std::string to_string(NormKind kind) {
  switch (kind) {
    case NormKind::L1RowMax: return "l1";
    case NormKind::LinfColMax: return "linf";
    case NormKind::NuMaxElt: return "nu";
    case NormKind::H2: return "h2";
  }
  return "?";
}

inline double induced_norm(const Matrix& M, NormKind kind) {
  if (M.size() == 0) return 0.0;
  switch (kind) {
    case NormKind::L1RowMax: return M.cwiseAbs().rowwise().sum().maxCoeff();
    case NormKind::LinfColMax: return M.cwiseAbs().colwise().sum().maxCoeff();
    case NormKind::NuMaxElt: return M.cwiseAbs().maxCoeff();
    case NormKind::H2: return M.norm();
  }
  throw std::invalid_argument("induced_norm: unknown kind");
}

/// Positive diagonal scaling D = diag(exp(l)), stored in log-domain so
/// positivity holds by construction. The log values are gauge-fixed to sum
/// to zero (D and c*D certify the same margin). beta is the margin level
/// this scaling certifies (+inf when it certifies nothing yet).
struct DiagonalScaling {
  Vector log_values;
  double beta = std::numeric_limits<double>::infinity();

  static DiagonalScaling identity(Eigen::Index n) {
    DiagonalScaling d;
    d.log_values = Vector::Zero(n);
    return d;
  }

  static DiagonalScaling from_log(Vector l, double beta_val) {
    DiagonalScaling d;
    l.array() -= l.mean();  // gauge: sum of log values is zero
    d.log_values = std::move(l);
    d.beta = beta_val;
    return d;
  }

  Eigen::Index size() const { return log_values.size(); }
  Vector diagonal() const { return log_values.array().exp().matrix(); }

  DiagonalScaling inverse() const {
    DiagonalScaling d;
    d.log_values = -log_values;
    d.beta = beta;
    return d;
  }
};

/// Exact value of ||D M D^{-1}|| for the given kind; entry (i, j) of the
/// scaled matrix is exp(l_i) M_ij exp(-l_j).
inline double scaled_norm(const Matrix& M, const DiagonalScaling& D, NormKind kind) {
  if (M.rows() != M.cols() || M.rows() != D.size()) {
    throw std::invalid_argument("scaled_norm: dimensions must match");
  }
  const Vector& l = D.log_values;
  switch (kind) {
    case NormKind::L1RowMax: {
      double best = 0.0;
      for (Eigen::Index i = 0; i < M.rows(); ++i) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < M.cols(); ++j) {
          s += std::abs(M(i, j)) * std::exp(l(i) - l(j));
        }
        best = std::max(best, s);
      }
      return best;
    }
    case NormKind::LinfColMax: {
      double best = 0.0;
      for (Eigen::Index j = 0; j < M.cols(); ++j) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < M.rows(); ++i) {
          s += std::abs(M(i, j)) * std::exp(l(i) - l(j));
        }
        best = std::max(best, s);
      }
      return best;
    }
    case NormKind::NuMaxElt: {
      double best = 0.0;
      for (Eigen::Index i = 0; i < M.rows(); ++i) {
        for (Eigen::Index j = 0; j < M.cols(); ++j) {
          if (M(i, j) != 0.0) best = std::max(best, std::abs(M(i, j)) * std::exp(l(i) - l(j)));
        }
      }
      return best;
    }
    case NormKind::H2: {
      double s = 0.0;
      for (Eigen::Index i = 0; i < M.rows(); ++i) {
        for (Eigen::Index j = 0; j < M.cols(); ++j) {
          const double v = M(i, j) * std::exp(l(i) - l(j));
          s += v * v;
        }
      }
      return std::sqrt(s);
    }
  }
  throw std::invalid_argument("scaled_norm: unknown kind");
}

/// Robust stability margin certified at level beta.
inline double margin(double beta) {
  if (beta <= 0.0) throw std::invalid_argument("margin: beta must be > 0");
  return 1.0 / beta;
}

/// Constant map from (state, control) to the regulated output z = Hx x + Hu u.
struct RegulationMap {
  Matrix Hx;  // nz x n
  Matrix Hu;  // nz x m

  RegulationMap(Matrix hx, Matrix hu) : Hx(std::move(hx)), Hu(std::move(hu)) {
    if (Hx.rows() != Hu.rows()) {
      throw std::invalid_argument("RegulationMap: Hx and Hu must share rows");
    }
  }

  static RegulationMap scaled_identity(Eigen::Index n, Eigen::Index m, double hx, double hu) {
    if (n != m) {
      throw std::invalid_argument("RegulationMap: scalar H requires m == n");
    }
    return RegulationMap(hx * Matrix::Identity(n, n), hu * Matrix::Identity(n, m));
  }

  bool separably_diagonal() const {
    if (Hx.rows() != Hx.cols() || Hu.rows() != Hu.cols()) return false;
    return Hx.isDiagonal(0.0) && Hu.isDiagonal(0.0);
  }
};

/// Magnitude matrix M = sum_p |Hx Phi_x(p) + Hu Phi_u(p)|. Nonnegative, and
/// zero outside the closed loop's support when H is separably diagonal.
inline Matrix magnitude_matrix(const ClosedLoop& cl, const RegulationMap& H) {
  if (H.Hx.cols() != cl.phi_x.rows() || H.Hu.cols() != cl.phi_u.rows()) {
    throw std::invalid_argument("magnitude_matrix: H not conformal with closed loop");
  }
  Matrix M = Matrix::Zero(H.Hx.rows(), cl.phi_x.cols());
  for (int p = 1; p <= cl.horizon(); ++p) {
    M += (H.Hx * cl.phi_x.tap(p) + H.Hu * cl.phi_u.tap(p)).cwiseAbs();
  }
  return M;
}

}  // namespace slsrob

#endif  // SLSROB_NORMS_HPP_
