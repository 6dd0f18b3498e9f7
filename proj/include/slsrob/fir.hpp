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

#ifndef SLSROB_FIR_HPP_
#define SLSROB_FIR_HPP_

#include <Eigen/Dense>

#include <stdexcept>
#include <utility>
#include <vector>

namespace slsrob {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using BoolMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// A strictly causal finite-impulse-response transfer matrix.
///
/// Tap p (1-based) is the coefficient of z^{-p}; there is no p = 0 tap, so
/// the map is strictly causal by construction.
class FirTransferMatrix {
 public:
  FirTransferMatrix() = default;

  FirTransferMatrix(Eigen::Index rows, Eigen::Index cols, int horizon)
      : rows_(rows), cols_(cols) {
    if (rows < 1 || cols < 1 || horizon < 1) {
      throw std::invalid_argument("FirTransferMatrix: rows, cols and horizon must be >= 1");
    }
    taps_.assign(static_cast<std::size_t>(horizon), Matrix::Zero(rows, cols));
  }

  explicit FirTransferMatrix(std::vector<Matrix> taps) : taps_(std::move(taps)) {
    if (taps_.empty()) {
      throw std::invalid_argument("FirTransferMatrix: horizon must be >= 1");
    }
    rows_ = taps_.front().rows();
    cols_ = taps_.front().cols();
    for (const Matrix& t : taps_) {
      if (t.rows() != rows_ || t.cols() != cols_) {
        throw std::invalid_argument("FirTransferMatrix: all taps must share dimensions");
      }
    }
  }

  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }
  int horizon() const { return static_cast<int>(taps_.size()); }

  /// 1-based tap access: tap(p) is the coefficient of z^{-p}.
  const Matrix& tap(int p) const { return taps_.at(static_cast<std::size_t>(p - 1)); }
  Matrix& tap(int p) { return taps_.at(static_cast<std::size_t>(p - 1)); }

  const std::vector<Matrix>& taps() const { return taps_; }

  friend FirTransferMatrix operator+(const FirTransferMatrix& a, const FirTransferMatrix& b) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_ || a.horizon() != b.horizon()) {
      throw std::invalid_argument("FirTransferMatrix: shape mismatch in +");
    }
    FirTransferMatrix out = a;
    for (int p = 1; p <= a.horizon(); ++p) out.tap(p) += b.tap(p);
    return out;
  }

  friend FirTransferMatrix operator*(double c, const FirTransferMatrix& a) {
    FirTransferMatrix out = a;
    for (Matrix& t : out.taps_) t *= c;
    return out;
  }

 private:
  Eigen::Index rows_ = 0;
  Eigen::Index cols_ = 0;
  std::vector<Matrix> taps_;
};

}  // namespace slsrob

#endif  // SLSROB_FIR_HPP_
