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

#ifndef SLSROB_SUPPORT_HPP_
#define SLSROB_SUPPORT_HPP_

#include <queue>
#include <stdexcept>
#include <vector>

#include "slsrob/fir.hpp"
#include "slsrob/plant.hpp"

namespace slsrob {

/// Sparsity pattern induced by d-hop communication neighborhoods.
///
/// neighborhoods[i] is the ordered set N_d(i) of nodes within d hops of node
/// i (always containing i). mask is rows x cols with mask(r, j) true iff
/// j is in N_d of the node that owns row r; state rows map to their own node,
/// control rows map to the actuator's host node.
struct Support {
  BoolMask mask;
  int hops = 0;
  std::vector<std::vector<int>> neighborhoods;

  Eigen::Index rows() const { return mask.rows(); }
  Eigen::Index cols() const { return mask.cols(); }

  /// Ordered column indices allowed in row r.
  std::vector<int> row_indices(Eigen::Index r) const {
    std::vector<int> idx;
    for (Eigen::Index j = 0; j < mask.cols(); ++j) {
      if (mask(r, j)) idx.push_back(static_cast<int>(j));
    }
    return idx;
  }

  /// Ordered row indices allowed in column j.
  std::vector<int> col_indices(Eigen::Index j) const {
    std::vector<int> idx;
    for (Eigen::Index r = 0; r < mask.rows(); ++r) {
      if (mask(r, j)) idx.push_back(static_cast<int>(r));
    }
    return idx;
  }
};

namespace detail {

inline std::vector<std::vector<int>> dhop_neighborhoods(
    const std::vector<std::vector<int>>& graph, int d) {
  const int n = static_cast<int>(graph.size());
  std::vector<std::vector<int>> out(static_cast<std::size_t>(n));
  std::vector<int> dist(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::fill(dist.begin(), dist.end(), -1);
    std::queue<int> q;
    dist[static_cast<std::size_t>(i)] = 0;
    q.push(i);
    while (!q.empty()) {
      const int v = q.front();
      q.pop();
      if (dist[static_cast<std::size_t>(v)] == d) continue;
      for (int w : graph[static_cast<std::size_t>(v)]) {
        if (dist[static_cast<std::size_t>(w)] < 0) {
          dist[static_cast<std::size_t>(w)] = dist[static_cast<std::size_t>(v)] + 1;
          q.push(w);
        }
      }
    }
    for (int j = 0; j < n; ++j) {
      if (dist[static_cast<std::size_t>(j)] >= 0) out[static_cast<std::size_t>(i)].push_back(j);
    }
  }
  return out;
}

}  // namespace detail

/// d-hop support for a rows x cols transfer matrix over the plant's graph.
/// rows must equal n (state rows) or m (actuator rows); cols must equal n.
inline Support dhop_support(const Plant& plant, int d, Eigen::Index rows, Eigen::Index cols) {
  if (d < 0) throw std::invalid_argument("dhop_support: d must be >= 0");
  if (cols != plant.n()) throw std::invalid_argument("dhop_support: cols must equal n");
  if (rows != plant.n() && rows != plant.m()) {
    throw std::invalid_argument("dhop_support: rows must equal n or m");
  }

  Support s;
  s.hops = d;
  s.neighborhoods = detail::dhop_neighborhoods(plant.graph, d);
  s.mask = BoolMask::Constant(rows, cols, false);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const int node = (rows == plant.n()) ? static_cast<int>(r) : plant.actuator_node(r);
    for (int j : s.neighborhoods[static_cast<std::size_t>(node)]) s.mask(r, j) = true;
  }
  return s;
}

/// Closed-loop response pair (disturbance -> state, disturbance -> control)
/// with the node-level support both components respect.
struct ClosedLoop {
  FirTransferMatrix phi_x;  // n x n
  FirTransferMatrix phi_u;  // m x n
  Support support;          // n x n node-level support
  Support u_support;        // m x n actuator-row support

  int horizon() const { return phi_x.horizon(); }

  ClosedLoop(FirTransferMatrix px, FirTransferMatrix pu, Support sup, Support usup)
      : phi_x(std::move(px)), phi_u(std::move(pu)), support(std::move(sup)),
        u_support(std::move(usup)) {
    if (phi_x.horizon() != phi_u.horizon()) {
      throw std::invalid_argument("ClosedLoop: components must share horizon");
    }
    if (phi_x.rows() != phi_x.cols() || phi_u.cols() != phi_x.cols()) {
      throw std::invalid_argument("ClosedLoop: phi_x must be n x n and phi_u m x n");
    }
    if (support.rows() != phi_x.rows() || support.cols() != phi_x.cols() ||
        u_support.rows() != phi_u.rows() || u_support.cols() != phi_u.cols()) {
      throw std::invalid_argument("ClosedLoop: support shapes do not match responses");
    }
  }

  /// True iff every off-support entry of every tap is exactly zero.
  bool respects_support() const {
    for (int p = 1; p <= horizon(); ++p) {
      const Matrix& tx = phi_x.tap(p);
      const Matrix& tu = phi_u.tap(p);
      for (Eigen::Index i = 0; i < tx.rows(); ++i) {
        for (Eigen::Index j = 0; j < tx.cols(); ++j) {
          if (!support.mask(i, j) && tx(i, j) != 0.0) return false;
        }
      }
      for (Eigen::Index i = 0; i < tu.rows(); ++i) {
        for (Eigen::Index j = 0; j < tu.cols(); ++j) {
          if (!u_support.mask(i, j) && tu(i, j) != 0.0) return false;
        }
      }
    }
    return true;
  }
};

/// Fully dense closed loop support (no communication constraint).
inline ClosedLoop make_dense_closed_loop(FirTransferMatrix phi_x, FirTransferMatrix phi_u) {
  Support sx, su;
  sx.hops = -1;
  sx.mask = BoolMask::Constant(phi_x.rows(), phi_x.cols(), true);
  su.hops = -1;
  su.mask = BoolMask::Constant(phi_u.rows(), phi_u.cols(), true);
  const int n = static_cast<int>(phi_x.cols());
  sx.neighborhoods.assign(static_cast<std::size_t>(n), {});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) sx.neighborhoods[static_cast<std::size_t>(i)].push_back(j);
  }
  su.neighborhoods = sx.neighborhoods;
  return ClosedLoop(std::move(phi_x), std::move(phi_u), std::move(sx), std::move(su));
}

}  // namespace slsrob

#endif  // SLSROB_SUPPORT_HPP_
