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

// Test-only reference implementations, independent of the library's solve
// paths: Karp's maximum cycle mean, brute-force cycle enumeration,
// active-set enumeration for small convex programs, and dense eigenvalue
// routes for spectral quantities.

#ifndef SLSROB_TESTS_ORACLES_HPP_
#define SLSROB_TESTS_ORACLES_HPP_

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "slsrob/subsolver.hpp"

namespace oracles {

using slsrob::Matrix;
using slsrob::Vector;

struct Arc {
  int from;
  int to;
  double weight;
};

/// Karp's algorithm for the maximum cycle mean, multi-source variant
/// (d_0(v) = 0 for every v). Returns -inf for acyclic graphs.
inline double karp_max_cycle_mean(int n, const std::vector<Arc>& arcs) {
  const double ninf = -std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> d(static_cast<std::size_t>(n + 1),
                                     std::vector<double>(static_cast<std::size_t>(n), ninf));
  for (int v = 0; v < n; ++v) d[0][static_cast<std::size_t>(v)] = 0.0;
  for (int k = 1; k <= n; ++k) {
    for (const Arc& a : arcs) {
      const double cand = d[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(a.from)];
      if (cand == ninf) continue;
      double& slot = d[static_cast<std::size_t>(k)][static_cast<std::size_t>(a.to)];
      slot = std::max(slot, cand + a.weight);
    }
  }
  double best = ninf;
  for (int v = 0; v < n; ++v) {
    if (d[static_cast<std::size_t>(n)][static_cast<std::size_t>(v)] == ninf) continue;
    double worst = std::numeric_limits<double>::infinity();
    for (int k = 0; k < n; ++k) {
      if (d[static_cast<std::size_t>(k)][static_cast<std::size_t>(v)] == ninf) continue;
      worst = std::min(worst, (d[static_cast<std::size_t>(n)][static_cast<std::size_t>(v)] -
                               d[static_cast<std::size_t>(k)][static_cast<std::size_t>(v)]) /
                                  static_cast<double>(n - k));
    }
    best = std::max(best, worst);
  }
  return best;
}

inline std::vector<Arc> log_arcs(const Matrix& M) {
  std::vector<Arc> arcs;
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      if (M(i, j) != 0.0) {
        arcs.push_back({static_cast<int>(i), static_cast<int>(j), std::log(M(i, j))});
      }
    }
  }
  return arcs;
}

/// Exhaustive simple-cycle enumeration (small n only): the maximum over
/// directed simple cycles of the mean arc weight.
inline double brute_force_max_cycle_mean(int n, const std::vector<Arc>& arcs) {
  std::vector<std::vector<std::pair<int, double>>> adj(static_cast<std::size_t>(n));
  for (const Arc& a : arcs) adj[static_cast<std::size_t>(a.from)].push_back({a.to, a.weight});
  double best = -std::numeric_limits<double>::infinity();
  std::vector<bool> on_path(static_cast<std::size_t>(n), false);

  struct Frame {
    int node;
    double acc;
    int len;
  };
  // DFS from every start node; only close cycles at the start to count each
  // simple cycle once per rotation (adequate for a max).
  std::function<void(int, int, double, int)> dfs = [&](int start, int v, double acc, int len) {
    for (const auto& [w, wt] : adj[static_cast<std::size_t>(v)]) {
      if (w == start) {
        best = std::max(best, (acc + wt) / static_cast<double>(len + 1));
      } else if (w > start && !on_path[static_cast<std::size_t>(w)]) {
        on_path[static_cast<std::size_t>(w)] = true;
        dfs(start, w, acc + wt, len + 1);
        on_path[static_cast<std::size_t>(w)] = false;
      }
    }
  };
  for (int s = 0; s < n; ++s) {
    on_path.assign(static_cast<std::size_t>(n), false);
    on_path[static_cast<std::size_t>(s)] = true;
    dfs(s, s, 0.0, 0);
  }
  return best;
}

/// Spectral radius through the dense eigensolver (independent of the
/// library's power-iteration route).
inline double eig_spectral_radius(const Matrix& A) {
  Eigen::EigenSolver<Matrix> es(A, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Brute-force optimum of min 0.5 x'Px + q'x s.t. Aeq x = beq, Ain x <= bin
/// by enumerating every active set of inequality rows and keeping the best
/// feasible stationary point. Exact for convex programs with an attained
/// minimum; exponential in the number of inequality rows.
inline std::optional<double> active_set_optimum(const slsrob::ConvexSubproblem& p,
                                                double feas_tol = 1e-7) {
  const Eigen::Index n = p.num_vars();
  const Eigen::Index mi = p.Ain.rows();
  const Eigen::Index me = p.Aeq.rows();
  const Matrix P = (p.P.size() != 0) ? p.P : Matrix::Zero(n, n);
  double best = std::numeric_limits<double>::infinity();
  bool found = false;

  for (std::uint64_t mask = 0; mask < (1ull << mi); ++mask) {
    std::vector<Eigen::Index> act;
    for (Eigen::Index i = 0; i < mi; ++i) {
      if (mask & (1ull << i)) act.push_back(i);
    }
    const Eigen::Index ma = me + static_cast<Eigen::Index>(act.size());
    Matrix K = Matrix::Zero(n + ma, n + ma);
    K.topLeftCorner(n, n) = P;
    Vector rhs(n + ma);
    rhs.head(n) = -p.q;
    if (ma > 0) {
      Matrix E(ma, n);
      Vector be(ma);
      if (me > 0) {
        E.topRows(me) = p.Aeq;
        be.head(me) = p.beq;
      }
      for (std::size_t k = 0; k < act.size(); ++k) {
        E.row(me + static_cast<Eigen::Index>(k)) = p.Ain.row(act[k]);
        be(me + static_cast<Eigen::Index>(k)) = p.bin(act[k]);
      }
      K.topRightCorner(n, ma) = E.transpose();
      K.bottomLeftCorner(ma, n) = E;
      rhs.tail(ma) = be;
    }
    Eigen::FullPivLU<Matrix> lu(K);
    if (!lu.isInvertible()) continue;
    const Vector sol = lu.solve(rhs);
    const Vector x = sol.head(n);
    bool feasible = true;
    if (me > 0 && (p.Aeq * x - p.beq).cwiseAbs().maxCoeff() > feas_tol) feasible = false;
    if (feasible && mi > 0 && (p.Ain * x - p.bin).maxCoeff() > feas_tol) feasible = false;
    if (!feasible) continue;
    const double obj = p.objective(x);
    if (obj < best) {
      best = obj;
      found = true;
    }
  }
  if (!found) return std::nullopt;
  return best;
}

}  // namespace oracles

#endif  // SLSROB_TESTS_ORACLES_HPP_
