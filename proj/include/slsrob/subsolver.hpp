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

#ifndef SLSROB_SUBSOLVER_HPP_
#define SLSROB_SUBSOLVER_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "slsrob/fir.hpp"

namespace slsrob {

/// Small dense convex program
///   min 0.5 x'Px + q'x   s.t.  Aeq x = beq,  Ain x <= bin
/// with P symmetric positive semidefinite (possibly empty, meaning zero).
struct ConvexSubproblem {
  Matrix P;
  Vector q;
  Matrix Aeq;
  Vector beq;
  Matrix Ain;
  Vector bin;

  Eigen::Index num_vars() const { return q.size(); }

  void validate() const {
    const Eigen::Index n = num_vars();
    if (n < 1) throw std::invalid_argument("ConvexSubproblem: no variables");
    if (P.size() != 0 && (P.rows() != n || P.cols() != n)) {
      throw std::invalid_argument("ConvexSubproblem: P dimensions");
    }
    if (Aeq.rows() != beq.size() || (Aeq.rows() > 0 && Aeq.cols() != n)) {
      throw std::invalid_argument("ConvexSubproblem: equality dimensions");
    }
    if (Ain.rows() != bin.size() || (Ain.rows() > 0 && Ain.cols() != n)) {
      throw std::invalid_argument("ConvexSubproblem: inequality dimensions");
    }
    if (P.size() != 0) {
      const double scale = std::max(1.0, P.cwiseAbs().maxCoeff());
      if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
        throw std::invalid_argument("ConvexSubproblem: P must be symmetric");
      }
      if (P.isDiagonal(0.0)) {
        if (P.diagonal().minCoeff() < -1e-10 * scale) {
          throw std::invalid_argument("ConvexSubproblem: P must be PSD");
        }
      } else {
        Eigen::SelfAdjointEigenSolver<Matrix> es(P, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-10 * scale) {
          throw std::invalid_argument("ConvexSubproblem: P must be PSD");
        }
      }
    }
  }

  double objective(const Vector& x) const {
    double obj = q.dot(x);
    if (P.size() != 0) obj += 0.5 * x.dot(P * x);
    return obj;
  }
};

enum class SolveStatus { Optimal, Infeasible, IterationLimit };

inline std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::IterationLimit: return "iteration-limit";
  }
  return "?";
}

struct SolveReport {
  SolveStatus status = SolveStatus::IterationLimit;
  Vector x;
  Vector y;    // inequality multipliers (>= 0 at optimum)
  Vector nu;   // equality multipliers
  double primal_residual = std::numeric_limits<double>::infinity();
  double dual_residual = std::numeric_limits<double>::infinity();
  double objective = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  bool polished = false;
};

struct SolveSettings {
  double tol_abs = 1e-8;
  double tol_rel = 1e-8;
  int max_iter = 100000;
  double sigma = 1e-6;       // proximal weight on the x update
  double alpha = 1.6;        // over-relaxation
  double rho = 0.0;          // 0 = choose from matrix norms
  double eps_infeasible = 1e-6;
  bool polish = true;
  int check_every = 25;
};

struct WarmStart {
  Vector x;
  Vector y;
  double rho = 0.0;  // carry the penalty across related solves
};

namespace detail {

// Independent-row selection for the equality system via column-pivoted QR of
// Aeq'. Returns row indices (sorted) spanning the row space.
inline std::vector<Eigen::Index> independent_rows(const Matrix& Aeq) {
  const Eigen::Index me = Aeq.rows();
  if (me == 0) return {};
  Eigen::ColPivHouseholderQR<Matrix> qr(Aeq.transpose());
  qr.setThreshold(1e-10);
  const Eigen::Index r = qr.rank();
  const auto& perm = qr.colsPermutation().indices();
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(r));
  for (Eigen::Index k = 0; k < r; ++k) rows[static_cast<std::size_t>(k)] = perm(k);
  std::sort(rows.begin(), rows.end());
  return rows;
}

struct KktFactor {
  Eigen::PartialPivLU<Matrix> lu;
  Matrix K;  // kept for iterative refinement
  Eigen::Index n = 0, me = 0;

  void factor(const Matrix& H, const Matrix& Aeq) {
    n = H.rows();
    me = Aeq.rows();
    K.setZero(n + me, n + me);
    K.topLeftCorner(n, n) = H;
    if (me > 0) {
      K.topRightCorner(n, me) = Aeq.transpose();
      K.bottomLeftCorner(me, n) = Aeq;
    }
    lu.compute(K);
  }

  // One step of iterative refinement keeps equality satisfaction near
  // machine precision.
  Vector solve(const Vector& rhs) const {
    Vector sol = lu.solve(rhs);
    sol += lu.solve(rhs - K * sol);
    return sol;
  }
};

}  // namespace detail

/// Operator-splitting solve: the x update solves the equality-constrained
/// proximal subproblem exactly (KKT factorization), the z update projects
/// inequality slacks, with over-relaxation between the two. Inequality-only
/// infeasibility is certified from the divergence direction of the dual
/// sequence; inconsistent equalities are rejected in presolve.
inline SolveReport solve(const ConvexSubproblem& prob, const SolveSettings& settings = {},
                         const WarmStart* warm = nullptr) {
  prob.validate();
  const Eigen::Index n = prob.num_vars();
  const Eigen::Index mi = prob.Ain.rows();

  SolveReport rep;
  rep.y = Vector::Zero(mi);
  rep.nu = Vector::Zero(prob.Aeq.rows());

  // Equality presolve: consistency check and independent-row reduction.
  std::vector<Eigen::Index> eq_rows = detail::independent_rows(prob.Aeq);
  Matrix Aeq_r(static_cast<Eigen::Index>(eq_rows.size()), n);
  Vector beq_r(static_cast<Eigen::Index>(eq_rows.size()));
  for (std::size_t k = 0; k < eq_rows.size(); ++k) {
    Aeq_r.row(static_cast<Eigen::Index>(k)) = prob.Aeq.row(eq_rows[k]);
    beq_r(static_cast<Eigen::Index>(k)) = prob.beq(eq_rows[k]);
  }
  const Eigen::Index me = Aeq_r.rows();

  Vector x0 = Vector::Zero(n);
  if (prob.Aeq.rows() > 0) {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(prob.Aeq);
    x0 = cod.solve(prob.beq);
    const double eq_res = (prob.Aeq * x0 - prob.beq).cwiseAbs().maxCoeff();
    if (eq_res > settings.tol_abs + settings.tol_rel * prob.beq.cwiseAbs().maxCoeff() +
                     1e-8 * (1.0 + prob.beq.cwiseAbs().maxCoeff())) {
      rep.status = SolveStatus::Infeasible;
      rep.x = x0;
      rep.primal_residual = eq_res;
      return rep;
    }
  }
  if (warm != nullptr && warm->x.size() == n) x0 = warm->x;

  const Matrix P = (prob.P.size() != 0) ? prob.P : Matrix::Zero(n, n);

  auto compute_duals_residual = [&](const Vector& x, const Vector& y, const Vector& nu_r) {
    Vector grad = P * x + prob.q;
    if (me > 0) grad += Aeq_r.transpose() * nu_r;
    if (mi > 0) grad += prob.Ain.transpose() * y;
    return grad.cwiseAbs().maxCoeff();
  };

  auto finish = [&](SolveStatus status, const Vector& x, const Vector& y, const Vector& nu_r,
                    int iters, bool polished) {
    rep.status = status;
    rep.x = x;
    rep.y = y;
    rep.nu = Vector::Zero(prob.Aeq.rows());
    for (std::size_t k = 0; k < eq_rows.size(); ++k) rep.nu(eq_rows[k]) = nu_r(static_cast<Eigen::Index>(k));
    double pres = 0.0;
    if (prob.Aeq.rows() > 0) pres = (prob.Aeq * x - prob.beq).cwiseAbs().maxCoeff();
    if (mi > 0) pres = std::max(pres, std::max(0.0, (prob.Ain * x - prob.bin).maxCoeff()));
    rep.primal_residual = pres;
    rep.dual_residual = compute_duals_residual(x, y, nu_r);
    rep.objective = prob.objective(x);
    rep.iterations = iters;
    rep.polished = polished;
    return rep;
  };

  // No inequalities: a single equality-constrained solve is exact.
  if (mi == 0) {
    Matrix H = P;
    H.diagonal().array() += 1e-9;
    detail::KktFactor kkt;
    kkt.factor(H, Aeq_r);
    Vector rhs(n + me);
    rhs.head(n) = -prob.q + 1e-9 * x0;
    rhs.tail(me) = beq_r;
    Vector sol = kkt.solve(rhs);
    // Refine against the unregularized optimality system.
    for (int it = 0; it < 3; ++it) {
      Vector res(n + me);
      res.head(n) = -prob.q - P * sol.head(n);
      if (me > 0) {
        res.head(n) -= Aeq_r.transpose() * sol.tail(me);
        res.tail(me) = beq_r - Aeq_r * sol.head(n);
      }
      sol += kkt.solve(res);
    }
    return finish(SolveStatus::Optimal, sol.head(n), Vector::Zero(0), sol.tail(me), 1, false);
  }

  // Operator-splitting iteration.
  double rho = settings.rho;
  if (warm != nullptr && warm->rho > 0.0) rho = warm->rho;
  if (rho <= 0.0) {
    const double pscale = std::max(1e-6, P.norm() + prob.q.norm());
    const double ascale = std::max(1e-6, prob.Ain.norm());
    rho = std::clamp(0.1 * std::sqrt(pscale) / std::sqrt(ascale), 1e-4, 1e4);
  }

  Vector x = x0;
  Vector z = (prob.Ain * x).cwiseMin(prob.bin);
  Vector y = Vector::Zero(mi);
  if (warm != nullptr && warm->y.size() == mi) y = warm->y.cwiseMax(0.0);
  Vector nu_r = Vector::Zero(me);

  detail::KktFactor kkt;
  auto refactor = [&]() {
    Matrix H = P + rho * prob.Ain.transpose() * prob.Ain;
    H.diagonal().array() += settings.sigma;
    kkt.factor(H, Aeq_r);
  };
  refactor();

  Vector y_prev_check = y;
  Vector nu_prev_check = nu_r;
  double best_prim = std::numeric_limits<double>::infinity();
  double stagnation_ref = std::numeric_limits<double>::infinity();
  int stagnation_iter = 0;

  const double bin_scale = (mi > 0) ? prob.bin.cwiseAbs().maxCoeff() : 0.0;
  const double beq_scale = (me > 0) ? beq_r.cwiseAbs().maxCoeff() : 0.0;

  auto try_polish = [&](const Vector& xs, const Vector& ys,
                        const Vector& /*nus*/) -> std::optional<SolveReport> {
    if (!settings.polish) return std::nullopt;
    const double ymax = std::max(1.0, ys.cwiseAbs().maxCoeff());
    std::vector<Eigen::Index> act;
    const Vector slack = prob.bin - prob.Ain * xs;
    for (Eigen::Index i = 0; i < mi; ++i) {
      if (ys(i) > 1e-8 * ymax || slack(i) < 1e-7 * (1.0 + std::abs(prob.bin(i)))) act.push_back(i);
    }
    Matrix E(me + static_cast<Eigen::Index>(act.size()), n);
    Vector be(E.rows());
    E.topRows(me) = Aeq_r;
    be.head(me) = beq_r;
    for (std::size_t k = 0; k < act.size(); ++k) {
      E.row(me + static_cast<Eigen::Index>(k)) = prob.Ain.row(act[k]);
      be(me + static_cast<Eigen::Index>(k)) = prob.bin(act[k]);
    }
    Matrix K(n + E.rows(), n + E.rows());
    K.setZero();
    K.topLeftCorner(n, n) = P;
    K.topLeftCorner(n, n).diagonal().array() += 1e-11;
    K.topRightCorner(n, E.rows()) = E.transpose();
    K.bottomLeftCorner(E.rows(), n) = E;
    K.bottomRightCorner(E.rows(), E.rows()).diagonal().array() -= 1e-11;
    Eigen::PartialPivLU<Matrix> lu(K);
    Vector rhs(n + E.rows());
    rhs.head(n) = -prob.q;
    rhs.tail(E.rows()) = be;
    Vector sol = lu.solve(rhs);
    sol += lu.solve(rhs - K * sol);
    const Vector xp = sol.head(n);
    const Vector mult = sol.tail(E.rows());

    const double eqv = (me > 0) ? (Aeq_r * xp - beq_r).cwiseAbs().maxCoeff() : 0.0;
    const double inv = std::max(0.0, (prob.Ain * xp - prob.bin).maxCoeff());
    const double dual_sign = (act.empty()) ? 0.0 : -mult.tail(static_cast<Eigen::Index>(act.size())).minCoeff();
    const bool obj_ok = prob.objective(xp) <= prob.objective(xs) + 1e-9 * (1.0 + std::abs(prob.objective(xs)));
    if (eqv <= 1e-9 * (1.0 + beq_scale) && inv <= 1e-9 * (1.0 + bin_scale) &&
        dual_sign <= 1e-7 * ymax && obj_ok) {
      Vector yp = Vector::Zero(mi);
      for (std::size_t k = 0; k < act.size(); ++k) {
        yp(act[k]) = std::max(0.0, mult(me + static_cast<Eigen::Index>(k)));
      }
      SolveReport out = finish(SolveStatus::Optimal, xp, yp, mult.head(me), 0, true);
      return out;
    }
    return std::nullopt;
  };

  Vector rhs(n + me);
  int it = 0;
  for (it = 1; it <= settings.max_iter; ++it) {
    rhs.head(n) = settings.sigma * x - prob.q + prob.Ain.transpose() * (rho * z - y);
    rhs.tail(me) = beq_r;
    const Vector sol = kkt.solve(rhs);
    const Vector x_tilde = sol.head(n);
    nu_r = sol.tail(me);
    const Vector z_tilde = prob.Ain * x_tilde;

    x = settings.alpha * x_tilde + (1.0 - settings.alpha) * x;
    const Vector z_relax = settings.alpha * z_tilde + (1.0 - settings.alpha) * z;
    z = (z_relax + y / rho).cwiseMin(prob.bin);
    y += rho * (z_relax - z);

    if (it % settings.check_every != 0 && it != settings.max_iter) continue;

    const Vector Ax = prob.Ain * x;
    const double r_prim = (Ax - z).cwiseAbs().maxCoeff();
    const double prim_scale = std::max(Ax.cwiseAbs().maxCoeff(), z.cwiseAbs().maxCoeff());
    Vector grad = P * x + prob.q + prob.Ain.transpose() * y;
    if (me > 0) grad += Aeq_r.transpose() * nu_r;
    const double r_dual = grad.cwiseAbs().maxCoeff();
    const double dual_scale =
        std::max({(P * x).cwiseAbs().maxCoeff(), prob.q.cwiseAbs().maxCoeff(),
                  (prob.Ain.transpose() * y).cwiseAbs().maxCoeff()});

    if (r_prim <= settings.tol_abs + settings.tol_rel * prim_scale &&
        r_dual <= settings.tol_abs + settings.tol_rel * dual_scale) {
      if (auto polished = try_polish(x, y, nu_r)) return *polished;
      return finish(SolveStatus::Optimal, x, y, nu_r, it, false);
    }

    // Primal infeasibility certificate from the dual divergence direction.
    {
      const Vector dy = y - y_prev_check;
      const Vector dnu = nu_r - nu_prev_check;
      const double scale = std::max(dy.cwiseAbs().maxCoeff(),
                                    (me > 0) ? dnu.cwiseAbs().maxCoeff() : 0.0);
      if (scale > 100.0 * settings.tol_abs && dy.minCoeff() >= -settings.eps_infeasible * scale) {
        Vector dir = prob.Ain.transpose() * dy;
        if (me > 0) dir += Aeq_r.transpose() * dnu;
        const double support = prob.bin.dot(dy) + ((me > 0) ? beq_r.dot(dnu) : 0.0);
        if (dir.cwiseAbs().maxCoeff() <= settings.eps_infeasible * scale &&
            support < -settings.eps_infeasible * scale * std::max(1.0, std::max(bin_scale, beq_scale))) {
          return finish(SolveStatus::Infeasible, x, y, nu_r, it, false);
        }
      }
      y_prev_check = y;
      nu_prev_check = nu_r;
    }

    // Divergence heuristic: exploding duals with a stagnating primal.
    best_prim = std::min(best_prim, r_prim);
    if (it - stagnation_iter >= 1000) {
      if (y.cwiseAbs().maxCoeff() > 1e8 && best_prim > 0.99 * stagnation_ref) {
        return finish(SolveStatus::Infeasible, x, y, nu_r, it, false);
      }
      stagnation_ref = best_prim;
      stagnation_iter = it;
    }

    // Penalty adaptation; restart the factorization on strong imbalance.
    if (it % 100 == 0) {
      const double pr = r_prim / std::max(settings.tol_abs, prim_scale);
      const double dr = r_dual / std::max(settings.tol_abs, std::max(1.0, dual_scale));
      const double ratio = pr / std::max(1e-16, dr);
      if (ratio > 100.0 || ratio < 0.01) {
        rho = std::clamp(rho * std::clamp(std::sqrt(ratio), 0.1, 10.0), 1e-6, 1e7);
        refactor();
      }
    }
  }

  return finish(SolveStatus::IterationLimit, x, y, nu_r, settings.max_iter, false);
}

/// Builder that accumulates a ConvexSubproblem row by row.
class SubproblemBuilder {
 public:
  explicit SubproblemBuilder(Eigen::Index nvars)
      : nvars_(nvars), pdiag_(Vector::Zero(nvars)), q_(Vector::Zero(nvars)) {}

  Eigen::Index num_vars() const { return nvars_; }

  void add_quadratic_diag(Eigen::Index var, double weight) { pdiag_(var) += weight; }
  void add_linear(Eigen::Index var, double weight) { q_(var) += weight; }

  void add_equality(const Eigen::RowVectorXd& row, double rhs) {
    eq_rows_.push_back(row);
    eq_rhs_.push_back(rhs);
  }

  void add_inequality(const Eigen::RowVectorXd& row, double rhs) {
    in_rows_.push_back(row);
    in_rhs_.push_back(rhs);
  }

  ConvexSubproblem build() const {
    ConvexSubproblem p;
    if ((pdiag_.array() != 0.0).any()) p.P = Matrix(pdiag_.asDiagonal());
    p.q = q_;
    p.Aeq.resize(static_cast<Eigen::Index>(eq_rows_.size()), nvars_);
    p.beq.resize(static_cast<Eigen::Index>(eq_rows_.size()));
    for (std::size_t k = 0; k < eq_rows_.size(); ++k) {
      p.Aeq.row(static_cast<Eigen::Index>(k)) = eq_rows_[k];
      p.beq(static_cast<Eigen::Index>(k)) = eq_rhs_[k];
    }
    p.Ain.resize(static_cast<Eigen::Index>(in_rows_.size()), nvars_);
    p.bin.resize(static_cast<Eigen::Index>(in_rows_.size()));
    for (std::size_t k = 0; k < in_rows_.size(); ++k) {
      p.Ain.row(static_cast<Eigen::Index>(k)) = in_rows_[k];
      p.bin(static_cast<Eigen::Index>(k)) = in_rhs_[k];
    }
    return p;
  }

 private:
  Eigen::Index nvars_;
  Vector pdiag_;
  Vector q_;
  std::vector<Eigen::RowVectorXd> eq_rows_;
  std::vector<double> eq_rhs_;
  std::vector<Eigen::RowVectorXd> in_rows_;
  std::vector<double> in_rhs_;
};

/// Epigraph transcription of an absolute value: for the affine expression
/// expr = coeffs' x + offset and slack variable s at slack_index, emits the
/// two rows  expr - s <= -offset_side  encoding s >= |expr|.
inline void transcribe_abs(SubproblemBuilder& b, const Eigen::RowVectorXd& coeffs, double offset,
                           Eigen::Index slack_index) {
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(b.num_vars());
  row.head(coeffs.size()) = coeffs;
  row(slack_index) -= 1.0;
  b.add_inequality(row, -offset);  //  expr - s <= 0
  Eigen::RowVectorXd row2 = Eigen::RowVectorXd::Zero(b.num_vars());
  row2.head(coeffs.size()) = -coeffs;
  row2(slack_index) -= 1.0;
  b.add_inequality(row2, offset);  // -expr - s <= 0
}

}  // namespace slsrob

#endif  // SLSROB_SUBSOLVER_HPP_
