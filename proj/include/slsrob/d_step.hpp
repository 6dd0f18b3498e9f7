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

#ifndef SLSROB_D_STEP_HPP_
#define SLSROB_D_STEP_HPP_

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <vector>

#include "slsrob/norms.hpp"
#include "slsrob/plant.hpp"
#include "slsrob/subsolver.hpp"
#include "slsrob/support.hpp"

namespace slsrob {

namespace detail {

inline void require_nonnegative(const Matrix& M, const char* who) {
  if (M.rows() != M.cols()) throw std::invalid_argument(std::string(who) + ": M must be square");
  if ((M.array() < 0.0).any()) {
    throw std::invalid_argument(std::string(who) + ": M must be nonnegative");
  }
}

// True iff the digraph of nonzero entries (arc i -> j for M_ij != 0,
// including self loops) contains a directed cycle.
inline bool has_directed_cycle(const Matrix& M) {
  const Eigen::Index n = M.rows();
  std::vector<int> color(static_cast<std::size_t>(n), 0);  // 0 white, 1 gray, 2 black
  std::vector<Eigen::Index> stack;
  std::vector<Eigen::Index> next(static_cast<std::size_t>(n), 0);
  for (Eigen::Index s = 0; s < n; ++s) {
    if (color[static_cast<std::size_t>(s)] != 0) continue;
    stack.assign(1, s);
    color[static_cast<std::size_t>(s)] = 1;
    next[static_cast<std::size_t>(s)] = 0;
    while (!stack.empty()) {
      const Eigen::Index v = stack.back();
      bool advanced = false;
      for (Eigen::Index& j = next[static_cast<std::size_t>(v)]; j < n; ++j) {
        if (M(v, j) == 0.0) continue;
        if (color[static_cast<std::size_t>(j)] == 1) return true;
        if (color[static_cast<std::size_t>(j)] == 0) {
          color[static_cast<std::size_t>(j)] = 1;
          stack.push_back(j);
          ++j;
          advanced = true;
          break;
        }
      }
      if (!advanced) {
        color[static_cast<std::size_t>(v)] = 2;
        stack.pop_back();
      }
    }
  }
  return false;
}

// Strong connectivity of the nonzero pattern (self loops ignored).
inline bool strongly_connected(const Matrix& M) {
  const Eigen::Index n = M.rows();
  if (n == 1) return true;
  auto reach = [&](bool forward) {
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    std::vector<Eigen::Index> stack{0};
    seen[0] = true;
    Eigen::Index count = 1;
    while (!stack.empty()) {
      const Eigen::Index v = stack.back();
      stack.pop_back();
      for (Eigen::Index j = 0; j < n; ++j) {
        const double w = forward ? M(v, j) : M(j, v);
        if (j != v && w != 0.0 && !seen[static_cast<std::size_t>(j)]) {
          seen[static_cast<std::size_t>(j)] = true;
          ++count;
          stack.push_back(j);
        }
      }
    }
    return count == n;
  };
  return reach(true) && reach(false);
}

inline Vector random_unit_vector(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Vector c(n);
  for (Eigen::Index i = 0; i < n; ++i) c(i) = 2.0 * uniform01(rng) - 1.0;
  const double norm = c.norm();
  return (norm > 0.0) ? Vector(c / norm) : Vector::Ones(n) / std::sqrt(static_cast<double>(n));
}

inline SolveSettings dstep_lp_settings() {
  SolveSettings s;
  s.tol_abs = 1e-10;
  s.tol_rel = 1e-10;
  s.max_iter = 200000;
  return s;
}

}  // namespace detail

struct NuLpResult {
  DiagonalScaling scaling;
  double eta = 0.0;
  bool clamped = false;  // acyclic pattern: eta unbounded below, log values boxed
};

/// Minimizing D step for nu robustness as the linear program
///   min eta  s.t.  log M_ij + l_i - l_j <= eta  for all M_ij != 0.
/// The optimal eta equals the maximum cycle mean of the nonzero digraph with
/// arc weights log M_ij; for acyclic patterns eta is unbounded below, so the
/// log values are boxed to [-20, 20] and beta floored at 1e-12, flagged.
inline NuLpResult dstep_min_nu_lp(const Matrix& M) {
  detail::require_nonnegative(M, "dstep_min_nu_lp");
  const Eigen::Index n = M.rows();
  NuLpResult out;

  std::vector<std::pair<Eigen::Index, Eigen::Index>> arcs;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (M(i, j) != 0.0) arcs.emplace_back(i, j);
    }
  }
  if (arcs.empty()) {
    out.scaling = DiagonalScaling::identity(n);
    out.scaling.beta = 1e-12;
    out.eta = std::log(1e-12);
    out.clamped = true;
    return out;
  }

  const bool cyclic = detail::has_directed_cycle(M);
  const Eigen::Index eta_idx = n;
  SubproblemBuilder b(n + 1);
  b.add_linear(eta_idx, 1.0);
  for (const auto& [i, j] : arcs) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n + 1);
    row(i) += 1.0;
    row(j) -= 1.0;
    row(eta_idx) = -1.0;
    b.add_inequality(row, -std::log(M(i, j)));
  }
  if (cyclic) {
    Eigen::RowVectorXd gauge = Eigen::RowVectorXd::Zero(n + 1);
    gauge.head(n).setOnes();
    b.add_equality(gauge, 0.0);
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::RowVectorXd up = Eigen::RowVectorXd::Zero(n + 1);
      up(i) = 1.0;
      b.add_inequality(up, 20.0);
      Eigen::RowVectorXd dn = Eigen::RowVectorXd::Zero(n + 1);
      dn(i) = -1.0;
      b.add_inequality(dn, 20.0);
    }
    out.clamped = true;
  }

  const SolveReport rep = solve(b.build(), detail::dstep_lp_settings());
  if (rep.status != SolveStatus::Optimal) {
    throw std::runtime_error("dstep_min_nu_lp: LP solve failed: " + to_string(rep.status));
  }
  out.eta = rep.x(eta_idx);
  Vector l = rep.x.head(n);
  const double beta_raw = std::exp(out.eta);
  out.scaling = DiagonalScaling::from_log(std::move(l), beta_raw);
  out.scaling.beta = std::max(scaled_norm(M, out.scaling, NormKind::NuMaxElt), 1e-12);
  return out;
}

/// Penalty and stopping rule for ADMM consensus (and the partially
/// separable closed-loop ADMM, which shares the same knobs).
struct AdmmConfig {
  double gamma = 1.0;
  double tol_consensus = 1e-4;
  double tol_progress = 1e-4;
  int max_iter = 5000;

  void validate() const {
    if (gamma <= 0.0 || tol_consensus <= 0.0 || tol_progress <= 0.0 || max_iter < 1) {
      throw std::invalid_argument("AdmmConfig: all parameters must be positive");
    }
  }
};

/// Local consensus state for one node: eta plus this node's copies of l_j
/// for every j in its neighborhood, with the dual and averaging variables of
/// the same shape.
struct ConsensusNodeState {
  double eta = 0.0;
  Vector l_copies;      // aligned with the neighborhood ordering
  double y_eta = 0.0;
  Vector y_l;
  double avg_eta = 0.0;
  Vector avg_l;
};

struct ConsensusResult {
  DiagonalScaling scaling;
  double eta = 0.0;
  int iterations = 0;
  bool converged = false;
  double eta_spread = 0.0;
  double l_spread = 0.0;
};

/// Distributed nu D step: per-node subproblems with neighborhood averaging
/// and dual updates, run on a deterministic synchronous schedule. For a
/// connected support this converges to the centralized LP solution.
/// If log is non-null, writes one line per iteration:
/// iter,max_eta_spread,max_l_spread.
inline ConsensusResult dstep_min_nu_consensus(const Matrix& M, const Support& support,
                                              const AdmmConfig& cfg, std::uint64_t /*seed*/ = 0,
                                              std::ostream* log = nullptr) {
  detail::require_nonnegative(M, "dstep_min_nu_consensus");
  cfg.validate();
  const Eigen::Index n = M.rows();
  if (static_cast<Eigen::Index>(support.neighborhoods.size()) != n) {
    throw std::invalid_argument("dstep_min_nu_consensus: support size mismatch");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (M(i, j) != 0.0 && !support.mask(i, j)) {
        throw std::invalid_argument("dstep_min_nu_consensus: M has entries outside the support");
      }
    }
  }

  const auto& hoods = support.neighborhoods;
  std::vector<std::vector<int>> pos_in(static_cast<std::size_t>(n));  // position of i in hoods[j]
  for (Eigen::Index j = 0; j < n; ++j) {
    pos_in[static_cast<std::size_t>(j)].assign(static_cast<std::size_t>(n), -1);
    for (std::size_t k = 0; k < hoods[static_cast<std::size_t>(j)].size(); ++k) {
      pos_in[static_cast<std::size_t>(j)][static_cast<std::size_t>(
          hoods[static_cast<std::size_t>(j)][k])] = static_cast<int>(k);
    }
  }

  std::vector<ConsensusNodeState> nodes(static_cast<std::size_t>(n));
  std::vector<WarmStart> warm(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& nd = nodes[static_cast<std::size_t>(i)];
    const auto sz = static_cast<Eigen::Index>(hoods[static_cast<std::size_t>(i)].size());
    nd.l_copies = Vector::Zero(sz);
    nd.y_l = Vector::Zero(sz);
    nd.avg_l = Vector::Zero(sz);
  }

  SolveSettings inner = detail::dstep_lp_settings();
  inner.tol_abs = 1e-9;
  inner.tol_rel = 1e-9;
  inner.max_iter = 50000;

  ConsensusResult out;
  Vector prev_eta = Vector::Zero(n);
  for (int it = 1; it <= cfg.max_iter; ++it) {
    // Local subproblem at every node.
    for (Eigen::Index i = 0; i < n; ++i) {
      auto& nd = nodes[static_cast<std::size_t>(i)];
      const auto& hood = hoods[static_cast<std::size_t>(i)];
      const auto sz = static_cast<Eigen::Index>(hood.size());
      SubproblemBuilder b(1 + sz);  // [eta_i; l copies]
      b.add_quadratic_diag(0, 2.0 * cfg.gamma);
      b.add_linear(0, 1.0 + nd.y_eta - 2.0 * cfg.gamma * nd.avg_eta);
      for (Eigen::Index k = 0; k < sz; ++k) {
        b.add_quadratic_diag(1 + k, 2.0 * cfg.gamma);
        b.add_linear(1 + k, nd.y_l(k) - 2.0 * cfg.gamma * nd.avg_l(k));
      }
      const int self = pos_in[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
      for (Eigen::Index k = 0; k < sz; ++k) {
        const Eigen::Index j = hood[static_cast<std::size_t>(k)];
        if (M(i, j) == 0.0) continue;
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(1 + sz);
        row(0) = -1.0;
        row(1 + self) += 1.0;
        row(1 + k) -= 1.0;
        b.add_inequality(row, -std::log(M(i, j)));
      }
      const ConvexSubproblem sub = b.build();
      SolveReport rep = solve(sub, inner, warm[static_cast<std::size_t>(i)].x.size() > 0
                                              ? &warm[static_cast<std::size_t>(i)]
                                              : nullptr);
      if (rep.status != SolveStatus::Optimal) {
        throw std::runtime_error("dstep_min_nu_consensus: node subproblem failed");
      }
      warm[static_cast<std::size_t>(i)] = WarmStart{rep.x, rep.y, 0.0};
      nd.eta = rep.x(0);
      nd.l_copies = rep.x.tail(sz);
    }

    // Neighborhood averaging (communication step).
    Vector lbar(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      double acc = 0.0;
      const auto& hood = hoods[static_cast<std::size_t>(j)];
      for (int i : hood) {
        acc += nodes[static_cast<std::size_t>(i)].l_copies(
            pos_in[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
      }
      lbar(j) = acc / static_cast<double>(hood.size());
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      auto& nd = nodes[static_cast<std::size_t>(i)];
      const auto& hood = hoods[static_cast<std::size_t>(i)];
      double acc = 0.0;
      for (int j : hood) acc += nodes[static_cast<std::size_t>(j)].eta;
      nd.avg_eta = acc / static_cast<double>(hood.size());
      for (std::size_t k = 0; k < hood.size(); ++k) {
        nd.avg_l(static_cast<Eigen::Index>(k)) = lbar(hood[k]);
      }
    }

    // Dual update.
    for (Eigen::Index i = 0; i < n; ++i) {
      auto& nd = nodes[static_cast<std::size_t>(i)];
      nd.y_eta += 0.5 * cfg.gamma * (nd.eta - nd.avg_eta);
      nd.y_l += 0.5 * cfg.gamma * (nd.l_copies - nd.avg_l);
    }

    // Disagreement diagnostics.
    double eta_min = nodes[0].eta, eta_max = nodes[0].eta;
    for (const auto& nd : nodes) {
      eta_min = std::min(eta_min, nd.eta);
      eta_max = std::max(eta_max, nd.eta);
    }
    double l_spread = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -std::numeric_limits<double>::infinity();
      for (int i : hoods[static_cast<std::size_t>(j)]) {
        const double v = nodes[static_cast<std::size_t>(i)].l_copies(
            pos_in[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      l_spread = std::max(l_spread, hi - lo);
    }
    out.eta_spread = eta_max - eta_min;
    out.l_spread = l_spread;
    out.iterations = it;
    if (log != nullptr) {
      (*log) << it << ',' << out.eta_spread << ',' << out.l_spread << '\n';
    }

    Vector cur_eta(n);
    for (Eigen::Index i = 0; i < n; ++i) cur_eta(i) = nodes[static_cast<std::size_t>(i)].eta;
    const double progress = (cur_eta - prev_eta).cwiseAbs().maxCoeff();
    prev_eta = cur_eta;
    if (std::max(out.eta_spread, out.l_spread) <= cfg.tol_consensus &&
        progress <= cfg.tol_progress && it > 1) {
      out.converged = true;
      break;
    }
  }

  Vector lbar(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double acc = 0.0;
    const auto& hood = hoods[static_cast<std::size_t>(j)];
    for (int i : hood) {
      acc += nodes[static_cast<std::size_t>(i)].l_copies(
          pos_in[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
    }
    lbar(j) = acc / static_cast<double>(hood.size());
  }
  double eta_acc = 0.0;
  for (const auto& nd : nodes) eta_acc += nd.eta;
  out.eta = eta_acc / static_cast<double>(n);
  out.scaling = DiagonalScaling::from_log(std::move(lbar), std::exp(out.eta));
  out.scaling.beta = std::max(scaled_norm(M, out.scaling, NormKind::NuMaxElt), 1e-12);
  return out;
}

/// Minimizing D step for L1 robustness: D = diag(v)^{-1} with v the Perron
/// vector of M. Reducible patterns are perturbed inside the support before
/// the power iteration; the resulting scaling is verified on the original M.
inline DiagonalScaling dstep_min_l1(const Matrix& M, const BoolMask* support_mask = nullptr) {
  detail::require_nonnegative(M, "dstep_min_l1");
  const Eigen::Index n = M.rows();
  if (M.isDiagonal(0.0)) {
    DiagonalScaling d = DiagonalScaling::identity(n);
    d.beta = (M.size() > 0) ? M.diagonal().cwiseAbs().maxCoeff() : 0.0;
    return d;
  }
  Matrix Mp = M;
  if (!detail::strongly_connected(M)) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (support_mask == nullptr || (*support_mask)(i, j)) Mp(i, j) += 1e-9;
      }
    }
  }
  const PerronResult pr = perron_vector(Mp);
  if (!pr.converged) {
    throw std::runtime_error("dstep_min_l1: power iteration did not converge");
  }
  Vector l(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double vi = std::max(pr.v(i), 1e-300);
    l(i) = -std::log(vi);
  }
  DiagonalScaling d = DiagonalScaling::from_log(std::move(l), pr.radius);
  const double achieved = scaled_norm(M, d, NormKind::L1RowMax);
  if (achieved > (1.0 + 1e-6) * pr.radius) {
    throw std::runtime_error("dstep_min_l1: scaling failed verification after perturbation");
  }
  d.beta = achieved;
  return d;
}

/// Minimizing D step for Linf robustness via the transpose duality with L1.
inline DiagonalScaling dstep_min_linf(const Matrix& M, const BoolMask* support_mask = nullptr) {
  detail::require_nonnegative(M, "dstep_min_linf");
  BoolMask mask_t;
  const BoolMask* mp = nullptr;
  if (support_mask != nullptr) {
    mask_t = support_mask->transpose();
    mp = &mask_t;
  }
  DiagonalScaling dual = dstep_min_l1(M.transpose(), mp);
  DiagonalScaling d = dual.inverse();
  d.beta = scaled_norm(M, d, NormKind::LinfColMax);
  return d;
}

/// Randomizing D step: find any scaling certifying level beta, by solving a
/// feasibility program with a seeded random linear objective. nu works in
/// log-domain; L1 / Linf use the vector reformulations M v <= beta v (with
/// v the inverse diagonal) and M' u <= beta u, solved in the positive
/// orthant with box bounds. Returns nothing when no scaling exists.
inline std::optional<DiagonalScaling> dstep_randomize(const Matrix& M, double beta, NormKind kind,
                                                      std::uint64_t seed) {
  detail::require_nonnegative(M, "dstep_randomize");
  if (beta <= 0.0) throw std::invalid_argument("dstep_randomize: beta must be > 0");
  const Eigen::Index n = M.rows();
  if (std::isinf(beta)) {
    DiagonalScaling d = DiagonalScaling::identity(n);
    d.beta = beta;
    return d;
  }
  // Solve against a slightly tightened level so the exact certificate check
  // below passes with margin despite iterative solver error.
  const double beta_t = beta * (1.0 - 1e-7);
  const Vector c = detail::random_unit_vector(n, seed);

  auto verify = [&](DiagonalScaling d) -> std::optional<DiagonalScaling> {
    const double achieved = scaled_norm(M, d, kind);
    if (achieved <= beta * (1.0 + 1e-9)) {
      d.beta = achieved;
      return d;
    }
    return std::nullopt;
  };

  if (kind == NormKind::NuMaxElt) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (M(i, i) > beta_t) return std::nullopt;  // self-loop: no scaling can help
    }
    SubproblemBuilder b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      b.add_linear(i, c(i));
      Eigen::RowVectorXd up = Eigen::RowVectorXd::Zero(n);
      up(i) = 1.0;
      b.add_inequality(up, 20.0);
      Eigen::RowVectorXd dn = Eigen::RowVectorXd::Zero(n);
      dn(i) = -1.0;
      b.add_inequality(dn, 20.0);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j || M(i, j) == 0.0) continue;
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
        row(i) = 1.0;
        row(j) = -1.0;
        b.add_inequality(row, std::log(beta_t) - std::log(M(i, j)));
      }
    }
    const SolveReport rep = solve(b.build(), detail::dstep_lp_settings());
    if (rep.status != SolveStatus::Optimal) return std::nullopt;
    return verify(DiagonalScaling::from_log(rep.x, beta));
  }

  if (kind != NormKind::L1RowMax && kind != NormKind::LinfColMax) {
    throw std::invalid_argument("dstep_randomize: kind must be a stability criterion");
  }

  // L1: rows of M v <= beta v with v = vec(D)^{-1}; Linf: same on M'.
  const Matrix W = (kind == NormKind::L1RowMax) ? M : Matrix(M.transpose());
  SubproblemBuilder b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    b.add_linear(i, c(i));
    Eigen::RowVectorXd up = Eigen::RowVectorXd::Zero(n);
    up(i) = 1.0;
    b.add_inequality(up, 1.0);
    Eigen::RowVectorXd dn = Eigen::RowVectorXd::Zero(n);
    dn(i) = -1.0;
    b.add_inequality(dn, -1e-9);  // v_i >= 1e-9: strict positivity
    Eigen::RowVectorXd row = W.row(i);
    row(i) -= beta_t;
    b.add_inequality(row, 0.0);
  }
  const SolveReport rep = solve(b.build(), detail::dstep_lp_settings());
  if (rep.status != SolveStatus::Optimal) return std::nullopt;
  Vector l(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double vi = std::max(rep.x(i), 1e-12);
    l(i) = (kind == NormKind::L1RowMax) ? -std::log(vi) : std::log(vi);
  }
  return verify(DiagonalScaling::from_log(std::move(l), beta));
}

/// Minimizing D step realized by bisecting on beta with dstep_randomize as
/// the feasibility oracle; returns the lowest feasible beta within beta_step
/// of the infimum.
inline DiagonalScaling dstep_iterative_min(const Matrix& M, NormKind kind, double beta_step,
                                           std::uint64_t seed) {
  detail::require_nonnegative(M, "dstep_iterative_min");
  if (beta_step <= 0.0) throw std::invalid_argument("dstep_iterative_min: beta_step must be > 0");
  const double start = induced_norm(M, kind);
  DiagonalScaling best = DiagonalScaling::identity(M.rows());
  best.beta = start;
  if (start <= 0.0) {
    best.beta = 0.0;
    return best;
  }
  double lo = 0.0;
  double hi = start;
  std::uint64_t k = 0;
  while (hi - lo > beta_step) {
    const double mid = 0.5 * (lo + hi);
    if (auto d = dstep_randomize(M, mid, kind, seed + (++k))) {
      best = *d;
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return best;
}

}  // namespace slsrob

#endif  // SLSROB_D_STEP_HPP_
