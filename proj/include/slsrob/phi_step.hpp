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

#ifndef SLSROB_PHI_STEP_HPP_
#define SLSROB_PHI_STEP_HPP_

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "slsrob/d_step.hpp"
#include "slsrob/norms.hpp"
#include "slsrob/parallel.hpp"
#include "slsrob/plant.hpp"
#include "slsrob/subsolver.hpp"
#include "slsrob/support.hpp"

namespace slsrob {

/// Everything the Phi step needs: plant, communication structure, FIR
/// horizon, performance weights, regulated output map, and the robustness
/// constraint ||D M D^{-1}||_stab <= beta for a fixed scaling D.
struct PhiStepSpec {
  Plant plant;
  Support support;    // n x n node-level support
  Support u_support;  // m x n actuator-row support
  int horizon = 1;
  Matrix Qx, Qu;      // performance weights
  NormKind perf = NormKind::H2;
  RegulationMap H;
  NormKind stab = NormKind::NuMaxElt;
  DiagonalScaling D;
  double beta = std::numeric_limits<double>::infinity();
  SolveSettings solver;
  AdmmConfig admm;
  int threads = 1;

  PhiStepSpec(Plant p, Support sup, Support usup, int T, Matrix qx, Matrix qu, RegulationMap h)
      : plant(std::move(p)), support(std::move(sup)), u_support(std::move(usup)), horizon(T),
        Qx(std::move(qx)), Qu(std::move(qu)), H(std::move(h)) {
    D = DiagonalScaling::identity(plant.n());
    solver.max_iter = 20000;
  }

  bool weights_separably_diagonal() const { return Qx.isDiagonal(0.0) && Qu.isDiagonal(0.0); }

  void validate() const {
    if (horizon < 1) throw std::invalid_argument("PhiStepSpec: horizon must be >= 1");
    if (!(beta > 0.0)) throw std::invalid_argument("PhiStepSpec: beta must be positive or +inf");
    if (stab == NormKind::H2) {
      throw std::invalid_argument("PhiStepSpec: stability criterion must be l1, linf or nu");
    }
    if (Qx.rows() != plant.n() || Qx.cols() != plant.n() || Qu.rows() != plant.m() ||
        Qu.cols() != plant.m()) {
      throw std::invalid_argument("PhiStepSpec: weight dimensions do not match plant");
    }
    if (H.Hx.cols() != plant.n() || H.Hu.cols() != plant.m() || H.Hx.rows() != plant.n()) {
      throw std::invalid_argument("PhiStepSpec: H must map (x, u) to an n-dimensional output");
    }
    if (support.rows() != plant.n() || support.cols() != plant.n() ||
        u_support.rows() != plant.m() || u_support.cols() != plant.n()) {
      throw std::invalid_argument("PhiStepSpec: support shapes do not match plant");
    }
    if (D.size() != plant.n()) throw std::invalid_argument("PhiStepSpec: scaling size mismatch");
    if (perf != NormKind::H2) {
      throw std::invalid_argument("PhiStepSpec: only the H2 performance objective is supported");
    }
    if (!weights_separably_diagonal()) {
      throw std::invalid_argument("PhiStepSpec: performance weights must be diagonal");
    }
  }
};

/// Weighted nominal performance of a closed loop. H2 returns the squared
/// objective sum_p (||Qx^{1/2} Phi_x(p)||_F^2 + ||Qu^{1/2} Phi_u(p)||_F^2);
/// the induced-norm kinds act on the stacked magnitude of [Qx Phi_x; Qu Phi_u].
inline double nominal_cost(const ClosedLoop& cl, const Matrix& Qx, const Matrix& Qu,
                           NormKind kind) {
  if (kind == NormKind::H2) {
    double acc = 0.0;
    for (int p = 1; p <= cl.horizon(); ++p) {
      const Matrix& tx = cl.phi_x.tap(p);
      const Matrix& tu = cl.phi_u.tap(p);
      acc += tx.cwiseProduct(Qx * tx).sum();
      acc += tu.cwiseProduct(Qu * tu).sum();
    }
    return acc;
  }
  Matrix stacked = Matrix::Zero(Qx.rows() + Qu.rows(), cl.phi_x.cols());
  for (int p = 1; p <= cl.horizon(); ++p) {
    stacked.topRows(Qx.rows()) += (Qx * cl.phi_x.tap(p)).cwiseAbs();
    stacked.bottomRows(Qu.rows()) += (Qu * cl.phi_u.tap(p)).cwiseAbs();
  }
  return induced_norm(stacked, kind);
}

namespace detail {

// Per-column transcription of the Phi step: decision variables are the
// on-support entries of column j of every tap, plus one magnitude slack per
// (tap, output row) when the robustness constraint is active.
struct ColumnProgram {
  std::vector<int> xrows;  // state rows carrying variables
  std::vector<int> urows;  // actuator rows carrying variables
  std::vector<int> zrows;  // regulated-output rows with possible magnitude
  int T = 0;
  Eigen::Index nx = 0, nu = 0, nz = 0;
  Eigen::Index u_base = 0, s_base = 0, nvars = 0;
  bool with_slacks = false;
  ConvexSubproblem prob;

  Eigen::Index xvar(int p, Eigen::Index k) const {
    return static_cast<Eigen::Index>(p - 1) * nx + k;
  }
  Eigen::Index uvar(int p, Eigen::Index k) const {
    return u_base + static_cast<Eigen::Index>(p - 1) * nu + k;
  }
  Eigen::Index svar(int p, Eigen::Index k) const {
    return s_base + static_cast<Eigen::Index>(p - 1) * nz + k;
  }
};

inline ColumnProgram build_column_program(const PhiStepSpec& spec, int j) {
  const Plant& plant = spec.plant;
  const Eigen::Index n = plant.n();
  const int T = spec.horizon;

  ColumnProgram cp;
  cp.T = T;
  cp.xrows = spec.support.col_indices(j);
  cp.urows = spec.u_support.col_indices(j);
  cp.nx = static_cast<Eigen::Index>(cp.xrows.size());
  cp.nu = static_cast<Eigen::Index>(cp.urows.size());
  cp.with_slacks = std::isfinite(spec.beta);

  // Output rows that the column can touch through H.
  if (cp.with_slacks) {
    std::vector<bool> hit(static_cast<std::size_t>(n), false);
    for (int k : cp.xrows) {
      for (Eigen::Index i = 0; i < n; ++i) {
        if (spec.H.Hx(i, k) != 0.0) hit[static_cast<std::size_t>(i)] = true;
      }
    }
    for (int k : cp.urows) {
      for (Eigen::Index i = 0; i < n; ++i) {
        if (spec.H.Hu(i, k) != 0.0) hit[static_cast<std::size_t>(i)] = true;
      }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (hit[static_cast<std::size_t>(i)]) cp.zrows.push_back(static_cast<int>(i));
    }
  }
  cp.nz = static_cast<Eigen::Index>(cp.zrows.size());

  cp.u_base = static_cast<Eigen::Index>(T) * cp.nx;
  cp.s_base = cp.u_base + static_cast<Eigen::Index>(T) * cp.nu;
  cp.nvars = cp.s_base + (cp.with_slacks ? static_cast<Eigen::Index>(T) * cp.nz : 0);

  SubproblemBuilder b(cp.nvars);

  // H2 objective with diagonal weights.
  for (int p = 1; p <= T; ++p) {
    for (Eigen::Index k = 0; k < cp.nx; ++k) {
      b.add_quadratic_diag(cp.xvar(p, k), 2.0 * spec.Qx(cp.xrows[static_cast<std::size_t>(k)],
                                                        cp.xrows[static_cast<std::size_t>(k)]));
    }
    for (Eigen::Index k = 0; k < cp.nu; ++k) {
      b.add_quadratic_diag(cp.uvar(p, k), 2.0 * spec.Qu(cp.urows[static_cast<std::size_t>(k)],
                                                        cp.urows[static_cast<std::size_t>(k)]));
    }
  }

  // Achievability, column j: first tap pins, tap recursion, FIR closure.
  for (Eigen::Index k = 0; k < cp.nx; ++k) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(cp.nvars);
    row(cp.xvar(1, k)) = 1.0;
    b.add_equality(row, (cp.xrows[static_cast<std::size_t>(k)] == j) ? 1.0 : 0.0);
  }
  std::vector<bool> touched(static_cast<std::size_t>(n), false);
  for (int k : cp.xrows) {
    touched[static_cast<std::size_t>(k)] = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (plant.A(i, k) != 0.0) touched[static_cast<std::size_t>(i)] = true;
    }
  }
  for (int k : cp.urows) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (plant.B(i, k) != 0.0) touched[static_cast<std::size_t>(i)] = true;
    }
  }
  std::vector<Eigen::Index> xpos(static_cast<std::size_t>(n), -1);
  for (Eigen::Index k = 0; k < cp.nx; ++k) {
    xpos[static_cast<std::size_t>(cp.xrows[static_cast<std::size_t>(k)])] = k;
  }
  for (int p = 1; p <= T; ++p) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!touched[static_cast<std::size_t>(i)]) continue;
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(cp.nvars);
      bool nontrivial = false;
      if (p < T && xpos[static_cast<std::size_t>(i)] >= 0) {
        row(cp.xvar(p + 1, xpos[static_cast<std::size_t>(i)])) = 1.0;
        nontrivial = true;
      }
      for (Eigen::Index k = 0; k < cp.nx; ++k) {
        const double a = plant.A(i, cp.xrows[static_cast<std::size_t>(k)]);
        if (a != 0.0) {
          row(cp.xvar(p, k)) -= a;
          nontrivial = true;
        }
      }
      for (Eigen::Index k = 0; k < cp.nu; ++k) {
        const double bk = plant.B(i, cp.urows[static_cast<std::size_t>(k)]);
        if (bk != 0.0) {
          row(cp.uvar(p, k)) -= bk;
          nontrivial = true;
        }
      }
      if (nontrivial) b.add_equality(row, 0.0);
    }
  }

  // Robustness transcription at level beta for the fixed scaling.
  if (cp.with_slacks) {
    const Vector& l = spec.D.log_values;
    for (int p = 1; p <= T; ++p) {
      for (Eigen::Index zi = 0; zi < cp.nz; ++zi) {
        const int i = cp.zrows[static_cast<std::size_t>(zi)];
        Eigen::RowVectorXd expr = Eigen::RowVectorXd::Zero(cp.nvars);
        for (Eigen::Index k = 0; k < cp.nx; ++k) {
          expr(cp.xvar(p, k)) = spec.H.Hx(i, cp.xrows[static_cast<std::size_t>(k)]);
        }
        for (Eigen::Index k = 0; k < cp.nu; ++k) {
          expr(cp.uvar(p, k)) = spec.H.Hu(i, cp.urows[static_cast<std::size_t>(k)]);
        }
        transcribe_abs(b, expr, 0.0, cp.svar(p, zi));
      }
    }
    if (spec.stab == NormKind::NuMaxElt) {
      // sum_p s_{p,i} <= beta exp(l_j - l_i), one row per output row.
      for (Eigen::Index zi = 0; zi < cp.nz; ++zi) {
        const int i = cp.zrows[static_cast<std::size_t>(zi)];
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(cp.nvars);
        for (int p = 1; p <= T; ++p) row(cp.svar(p, zi)) = 1.0;
        b.add_inequality(row, spec.beta * std::exp(l(j) - l(i)));
      }
    } else if (spec.stab == NormKind::LinfColMax) {
      // sum_i exp(l_i) M_ij <= beta exp(l_j), a single column-sum row.
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(cp.nvars);
      for (Eigen::Index zi = 0; zi < cp.nz; ++zi) {
        const int i = cp.zrows[static_cast<std::size_t>(zi)];
        for (int p = 1; p <= T; ++p) row(cp.svar(p, zi)) = std::exp(l(i));
      }
      b.add_inequality(row, spec.beta * std::exp(l(j)));
    } else {
      throw std::logic_error("build_column_program: row-separable criterion in column path");
    }
  }

  cp.prob = b.build();
  return cp;
}

inline ClosedLoop zero_closed_loop(const PhiStepSpec& spec) {
  FirTransferMatrix px(spec.plant.n(), spec.plant.n(), spec.horizon);
  FirTransferMatrix pu(spec.plant.m(), spec.plant.n(), spec.horizon);
  return ClosedLoop(std::move(px), std::move(pu), spec.support, spec.u_support);
}

}  // namespace detail

struct PhiStepResult {
  std::optional<ClosedLoop> cl;
  Matrix M;
  SolveStatus status = SolveStatus::IterationLimit;
  double cost = std::numeric_limits<double>::quiet_NaN();
};

/// Per-column warm start carried across successive Phi steps.
struct PhiStepWarmStart {
  std::vector<WarmStart> columns;
};

namespace detail {

inline PhiStepResult phi_step_columns(const PhiStepSpec& spec, PhiStepWarmStart* warm) {
  const Eigen::Index n = spec.plant.n();
  ClosedLoop cl = zero_closed_loop(spec);
  std::vector<SolveStatus> statuses(static_cast<std::size_t>(n), SolveStatus::Optimal);
  if (warm != nullptr && warm->columns.size() != static_cast<std::size_t>(n)) {
    warm->columns.assign(static_cast<std::size_t>(n), WarmStart{});
  }

  parallel_for(static_cast<int>(n), spec.threads, [&](int j) {
    ColumnProgram cp = build_column_program(spec, j);
    const WarmStart* ws = nullptr;
    if (warm != nullptr && warm->columns[static_cast<std::size_t>(j)].x.size() == cp.nvars) {
      ws = &warm->columns[static_cast<std::size_t>(j)];
    }
    const SolveReport rep = solve(cp.prob, spec.solver, ws);
    statuses[static_cast<std::size_t>(j)] = rep.status;
    if (rep.status != SolveStatus::Optimal) return;
    if (warm != nullptr) {
      warm->columns[static_cast<std::size_t>(j)] = WarmStart{rep.x, rep.y, 0.0};
    }
    for (int p = 1; p <= cp.T; ++p) {
      for (Eigen::Index k = 0; k < cp.nx; ++k) {
        cl.phi_x.tap(p)(cp.xrows[static_cast<std::size_t>(k)], j) = rep.x(cp.xvar(p, k));
      }
      for (Eigen::Index k = 0; k < cp.nu; ++k) {
        cl.phi_u.tap(p)(cp.urows[static_cast<std::size_t>(k)], j) = rep.x(cp.uvar(p, k));
      }
    }
  });

  PhiStepResult out;
  bool limit = false, infeasible = false;
  for (const SolveStatus s : statuses) {
    if (s == SolveStatus::Infeasible) infeasible = true;
    if (s == SolveStatus::IterationLimit) limit = true;
  }
  if (infeasible) {
    out.status = SolveStatus::Infeasible;
    return out;
  }
  if (limit) {
    out.status = SolveStatus::IterationLimit;
    return out;
  }
  out.status = SolveStatus::Optimal;
  out.M = magnitude_matrix(cl, spec.H);
  out.cost = nominal_cost(cl, spec.Qx, spec.Qu, spec.perf);
  out.cl = std::move(cl);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Partially separable path (row separable stability criterion, e.g. L1).
// ---------------------------------------------------------------------------

/// Row half of the consensus split: per-node QPs carrying the performance
/// objective and the scaled row-sum constraint of the L1 criterion.
class PhiRowProblem {
 public:
  explicit PhiRowProblem(const PhiStepSpec& spec) : spec_(&spec) {
    const Eigen::Index n = spec.plant.n();
    if (spec.plant.m() != n || !spec.H.separably_diagonal() ||
        !spec.weights_separably_diagonal()) {
      throw std::invalid_argument(
          "PhiRowProblem: the row split needs m == n with diagonal H and weights");
    }
    warm_.assign(static_cast<std::size_t>(n), WarmStart{});
  }

  /// Solves all row subproblems for the prox target (one call per ADMM
  /// iteration); target and result use the (phi_x, phi_u) pair layout.
  std::pair<FirTransferMatrix, FirTransferMatrix> update(const FirTransferMatrix& tx,
                                                         const FirTransferMatrix& tu,
                                                         double gamma, SolveStatus* status) {
    const PhiStepSpec& spec = *spec_;
    const Eigen::Index n = spec.plant.n();
    const int T = spec.horizon;
    FirTransferMatrix rx(n, n, T), ru(n, n, T);
    std::vector<SolveStatus> st(static_cast<std::size_t>(n), SolveStatus::Optimal);

    parallel_for(static_cast<int>(n), spec.threads, [&](int i) {
      const std::vector<int> cols = spec.support.row_indices(i);
      const Eigen::Index nc = static_cast<Eigen::Index>(cols.size());
      const bool with_slacks = std::isfinite(spec.beta);
      const Eigen::Index u_base = static_cast<Eigen::Index>(T) * nc;
      const Eigen::Index s_base = 2 * u_base;
      const Eigen::Index nvars = s_base + (with_slacks ? static_cast<Eigen::Index>(T) * nc : 0);
      auto xv = [&](int p, Eigen::Index k) { return static_cast<Eigen::Index>(p - 1) * nc + k; };
      auto uv = [&](int p, Eigen::Index k) { return u_base + static_cast<Eigen::Index>(p - 1) * nc + k; };
      auto sv = [&](int p, Eigen::Index k) { return s_base + static_cast<Eigen::Index>(p - 1) * nc + k; };

      SubproblemBuilder b(nvars);
      for (int p = 1; p <= T; ++p) {
        for (Eigen::Index k = 0; k < nc; ++k) {
          const int j = cols[static_cast<std::size_t>(k)];
          b.add_quadratic_diag(xv(p, k), spec.Qx(i, i) + gamma);
          b.add_linear(xv(p, k), -gamma * tx.tap(p)(i, j));
          b.add_quadratic_diag(uv(p, k), spec.Qu(i, i) + gamma);
          b.add_linear(uv(p, k), -gamma * tu.tap(p)(i, j));
        }
      }
      if (with_slacks) {
        const Vector& l = spec.D.log_values;
        for (int p = 1; p <= T; ++p) {
          for (Eigen::Index k = 0; k < nc; ++k) {
            Eigen::RowVectorXd expr = Eigen::RowVectorXd::Zero(nvars);
            expr(xv(p, k)) = spec.H.Hx(i, i);
            expr(uv(p, k)) = spec.H.Hu(i, i);
            transcribe_abs(b, expr, 0.0, sv(p, k));
          }
        }
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(nvars);
        for (int p = 1; p <= T; ++p) {
          for (Eigen::Index k = 0; k < nc; ++k) {
            row(sv(p, k)) = std::exp(-l(cols[static_cast<std::size_t>(k)]));
          }
        }
        b.add_inequality(row, spec.beta * std::exp(-l(i)));
      }

      const ConvexSubproblem prob = b.build();
      const WarmStart* ws =
          (warm_[static_cast<std::size_t>(i)].x.size() == nvars) ? &warm_[static_cast<std::size_t>(i)] : nullptr;
      const SolveReport rep = solve(prob, spec.solver, ws);
      st[static_cast<std::size_t>(i)] = rep.status;
      if (rep.status != SolveStatus::Optimal) return;
      warm_[static_cast<std::size_t>(i)] = WarmStart{rep.x, rep.y, 0.0};
      for (int p = 1; p <= T; ++p) {
        for (Eigen::Index k = 0; k < nc; ++k) {
          const int j = cols[static_cast<std::size_t>(k)];
          rx.tap(p)(i, j) = rep.x(xv(p, k));
          ru.tap(p)(i, j) = rep.x(uv(p, k));
        }
      }
    });

    *status = SolveStatus::Optimal;
    for (const SolveStatus s : st) {
      if (s == SolveStatus::Infeasible) {
        *status = SolveStatus::Infeasible;
        return {rx, ru};
      }
      if (s == SolveStatus::IterationLimit) *status = SolveStatus::IterationLimit;
    }
    return {rx, ru};
  }

 private:
  const PhiStepSpec* spec_;
  std::vector<WarmStart> warm_;
};

/// Column half of the consensus split: the projection onto achievability and
/// support, with one KKT factorization per column reused every iteration.
class PhiColProblem {
 public:
  explicit PhiColProblem(const PhiStepSpec& spec, double gamma) : spec_(&spec), gamma_(gamma) {
    const Eigen::Index n = spec.plant.n();
    programs_.reserve(static_cast<std::size_t>(n));
    factors_.resize(static_cast<std::size_t>(n));
    PhiStepSpec nowall = spec;
    nowall.beta = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      detail::ColumnProgram cp = detail::build_column_program(nowall, j);
      Matrix H = Matrix::Zero(cp.nvars, cp.nvars);
      H.diagonal().array() = gamma_;
      factors_[static_cast<std::size_t>(j)].factor(H, cp.prob.Aeq);
      programs_.push_back(std::move(cp));
    }
  }

  std::pair<FirTransferMatrix, FirTransferMatrix> project(const FirTransferMatrix& tx,
                                                          const FirTransferMatrix& tu) const {
    const PhiStepSpec& spec = *spec_;
    const Eigen::Index n = spec.plant.n();
    const int T = spec.horizon;
    FirTransferMatrix rx(n, n, T), ru(n, n, T);
    parallel_for(static_cast<int>(n), spec.threads, [&](int j) {
      const detail::ColumnProgram& cp = programs_[static_cast<std::size_t>(j)];
      Vector rhs(cp.nvars + cp.prob.Aeq.rows());
      rhs.setZero();
      for (int p = 1; p <= T; ++p) {
        for (Eigen::Index k = 0; k < cp.nx; ++k) {
          rhs(cp.xvar(p, k)) = gamma_ * tx.tap(p)(cp.xrows[static_cast<std::size_t>(k)], j);
        }
        for (Eigen::Index k = 0; k < cp.nu; ++k) {
          rhs(cp.uvar(p, k)) = gamma_ * tu.tap(p)(cp.urows[static_cast<std::size_t>(k)], j);
        }
      }
      rhs.tail(cp.prob.Aeq.rows()) = cp.prob.beq;
      const Vector sol = factors_[static_cast<std::size_t>(j)].solve(rhs);
      for (int p = 1; p <= T; ++p) {
        for (Eigen::Index k = 0; k < cp.nx; ++k) {
          rx.tap(p)(cp.xrows[static_cast<std::size_t>(k)], j) = sol(cp.xvar(p, k));
        }
        for (Eigen::Index k = 0; k < cp.nu; ++k) {
          ru.tap(p)(cp.urows[static_cast<std::size_t>(k)], j) = sol(cp.uvar(p, k));
        }
      }
    });
    return {rx, ru};
  }

 private:
  const PhiStepSpec* spec_;
  double gamma_;
  std::vector<detail::ColumnProgram> programs_;
  std::vector<detail::KktFactor> factors_;
};

struct AdmmPhiInit {
  FirTransferMatrix phi_x, phi_u;        // consensus iterate
  FirTransferMatrix lambda_x, lambda_u;  // scaled duals
};

struct AdmmPhiResult {
  std::optional<ClosedLoop> cl;
  SolveStatus status = SolveStatus::IterationLimit;
  int iterations = 0;
  double consensus_residual = 0.0;
  double progress_residual = 0.0;
  FirTransferMatrix lambda_x, lambda_u;  // final scaled duals (for warm restarts)
};

/// ADMM over the row/column split for partially separable Phi steps.
/// Alternates the row update, the column update and the dual update until
/// both the consensus gap ||Phi - Psi||_F and the progress ||Phi^{k+1} -
/// Phi^k||_F fall below tolerance. The returned iterate is the column side,
/// which satisfies achievability and support exactly.
inline AdmmPhiResult admm_phi(PhiRowProblem& rows, const PhiColProblem& cols,
                              const PhiStepSpec& spec, const AdmmConfig& cfg,
                              const AdmmPhiInit* init = nullptr) {
  cfg.validate();
  const Eigen::Index n = spec.plant.n();
  const int T = spec.horizon;
  FirTransferMatrix psi_x(n, n, T), psi_u(n, n, T);
  FirTransferMatrix lam_x(n, n, T), lam_u(n, n, T);
  FirTransferMatrix phi_x(n, n, T), phi_u(n, n, T);
  if (init != nullptr) {
    psi_x = init->phi_x;
    psi_u = init->phi_u;
    lam_x = init->lambda_x;
    lam_u = init->lambda_u;
    phi_x = init->phi_x;
    phi_u = init->phi_u;
  }

  auto pair_norm = [T](const FirTransferMatrix& ax, const FirTransferMatrix& au,
                       const FirTransferMatrix& bx, const FirTransferMatrix& bu) {
    double acc = 0.0;
    for (int p = 1; p <= T; ++p) {
      acc += (ax.tap(p) - bx.tap(p)).squaredNorm();
      acc += (au.tap(p) - bu.tap(p)).squaredNorm();
    }
    return std::sqrt(acc);
  };

  AdmmPhiResult out;
  for (int it = 1; it <= cfg.max_iter; ++it) {
    // Row update on Psi^k - Lambda^k.
    FirTransferMatrix tx(n, n, T), tu(n, n, T);
    for (int p = 1; p <= T; ++p) {
      tx.tap(p) = psi_x.tap(p) - lam_x.tap(p);
      tu.tap(p) = psi_u.tap(p) - lam_u.tap(p);
    }
    SolveStatus row_status = SolveStatus::Optimal;
    auto [nphi_x, nphi_u] = rows.update(tx, tu, cfg.gamma, &row_status);
    if (row_status != SolveStatus::Optimal) {
      out.status = row_status;
      out.iterations = it;
      return out;
    }

    // Column update on Phi^{k+1} + Lambda^k.
    for (int p = 1; p <= T; ++p) {
      tx.tap(p) = nphi_x.tap(p) + lam_x.tap(p);
      tu.tap(p) = nphi_u.tap(p) + lam_u.tap(p);
    }
    auto [npsi_x, npsi_u] = cols.project(tx, tu);

    // Dual update.
    for (int p = 1; p <= T; ++p) {
      lam_x.tap(p) += nphi_x.tap(p) - npsi_x.tap(p);
      lam_u.tap(p) += nphi_u.tap(p) - npsi_u.tap(p);
    }

    out.consensus_residual = pair_norm(nphi_x, nphi_u, npsi_x, npsi_u);
    out.progress_residual = pair_norm(nphi_x, nphi_u, phi_x, phi_u);
    phi_x = std::move(nphi_x);
    phi_u = std::move(nphi_u);
    psi_x = std::move(npsi_x);
    psi_u = std::move(npsi_u);
    out.iterations = it;
    if (out.consensus_residual <= cfg.tol_consensus &&
        out.progress_residual <= cfg.tol_progress) {
      out.status = SolveStatus::Optimal;
      out.cl = ClosedLoop(psi_x, psi_u, spec.support, spec.u_support);
      out.lambda_x = lam_x;
      out.lambda_u = lam_u;
      return out;
    }
  }
  out.status = SolveStatus::IterationLimit;
  out.cl = ClosedLoop(psi_x, psi_u, spec.support, spec.u_support);
  out.lambda_x = lam_x;
  out.lambda_u = lam_u;
  return out;
}

/// The Phi step: minimize nominal performance over achievable, support-
/// constrained closed loops subject to ||D M D^{-1}||_stab <= beta.
/// Dispatch follows the separability of the criterion: nu and Linf run the
/// fully column-separable path (one subproblem per column, in parallel); L1
/// runs the row/column ADMM. Any infeasible column makes the step infeasible.
inline PhiStepResult phi_step(const PhiStepSpec& spec, PhiStepWarmStart* warm = nullptr) {
  spec.validate();

  if (spec.stab == NormKind::NuMaxElt || spec.stab == NormKind::LinfColMax ||
      !std::isfinite(spec.beta)) {
    return detail::phi_step_columns(spec, warm);
  }

  // L1: row separable constraint + column separable achievability.
  PhiRowProblem rows(spec);
  PhiColProblem cols(spec, spec.admm.gamma);
  AdmmConfig cfg = spec.admm;
  AdmmPhiResult admm = admm_phi(rows, cols, spec, cfg);
  PhiStepResult out;
  if (admm.status == SolveStatus::Infeasible) {
    out.status = SolveStatus::Infeasible;
    return out;
  }
  // The column iterate is achievable by construction; require the robustness
  // certificate too, refining the consensus once if it is not yet tight.
  for (int attempt = 0; attempt < 2; ++attempt) {
    if (admm.status == SolveStatus::Optimal && admm.cl.has_value()) {
      const Matrix M = magnitude_matrix(*admm.cl, spec.H);
      if (scaled_norm(M, spec.D, spec.stab) <= spec.beta * (1.0 + 1e-6)) {
        out.status = SolveStatus::Optimal;
        out.M = M;
        out.cost = nominal_cost(*admm.cl, spec.Qx, spec.Qu, spec.perf);
        out.cl = std::move(admm.cl);
        return out;
      }
    }
    if (attempt == 0) {
      cfg.tol_consensus = std::max(cfg.tol_consensus * 1e-3, 1e-9);
      cfg.tol_progress = std::max(cfg.tol_progress * 1e-3, 1e-9);
      cfg.max_iter *= 4;
      AdmmPhiInit init{admm.cl->phi_x, admm.cl->phi_u, admm.lambda_x, admm.lambda_u};
      admm = admm_phi(rows, cols, spec, cfg, &init);
      if (admm.status == SolveStatus::Infeasible) {
        out.status = SolveStatus::Infeasible;
        return out;
      }
    }
  }
  out.status = SolveStatus::IterationLimit;
  return out;
}

}  // namespace slsrob

#endif  // SLSROB_PHI_STEP_HPP_
