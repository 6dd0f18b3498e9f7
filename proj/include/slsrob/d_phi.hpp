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

#ifndef SLSROB_D_PHI_HPP_
#define SLSROB_D_PHI_HPP_

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "slsrob/d_step.hpp"
#include "slsrob/phi_step.hpp"

namespace slsrob {

enum class DStepMode { Minimize, IterativelyMinimize, Randomize };

inline std::string to_string(DStepMode m) {
  switch (m) {
    case DStepMode::Minimize: return "minimize";
    case DStepMode::IterativelyMinimize: return "iterative";
    case DStepMode::Randomize: return "randomize";
  }
  return "?";
}

struct DPhiConfig {
  double beta_step = 0.05;
  double beta_max = 1.0;
  NormKind stab = NormKind::NuMaxElt;
  NormKind perf = NormKind::H2;
  Matrix Qx, Qu;                    // empty = defaults I and 50 I
  std::optional<RegulationMap> H;   // empty = z = x + u
  int d = 2;
  int horizon = 30;
  DStepMode mode = DStepMode::Minimize;
  bool consensus = false;
  std::uint64_t seed = 0;
  int threads = 1;
  SolveSettings solver;
  AdmmConfig admm;

  DPhiConfig() { solver.max_iter = 20000; }

  void validate() const {
    if (beta_step <= 0.0) throw std::invalid_argument("DPhiConfig: beta_step must be > 0");
    if (!(beta_max > 0.0)) throw std::invalid_argument("DPhiConfig: beta_max must be > 0");
    if (d < 0 || horizon < 1) throw std::invalid_argument("DPhiConfig: bad d or horizon");
    if (stab == NormKind::H2) {
      throw std::invalid_argument("DPhiConfig: stability criterion must be l1, linf or nu");
    }
    if (consensus && !(stab == NormKind::NuMaxElt && mode == DStepMode::Minimize)) {
      throw std::invalid_argument(
          "DPhiConfig: consensus is available only for the minimizing nu D step");
    }
  }
};

struct TraceRecord {
  int k = 0;
  std::string phase;  // "phi-step", "d-step" or "re-solve"
  double beta = 0.0;
  double cost = 0.0;
  bool feasible = true;
  double elapsed_ms = 0.0;
};

struct IterationTrace {
  std::vector<TraceRecord> records;
};

enum class DPhiStatus { TargetMet, Stalled, SolverFailure };

inline std::string to_string(DPhiStatus s) {
  switch (s) {
    case DPhiStatus::TargetMet: return "target-met";
    case DPhiStatus::Stalled: return "stalled";
    case DPhiStatus::SolverFailure: return "error";
  }
  return "?";
}

struct DPhiResult {
  std::optional<ClosedLoop> cl;
  DiagonalScaling scaling;
  Matrix M;
  double beta = std::numeric_limits<double>::infinity();
  double cost = std::numeric_limits<double>::quiet_NaN();  // rooted for H2
  IterationTrace trace;
  DPhiStatus status = DPhiStatus::SolverFailure;
  int phi_steps = 0;
  std::string diagnostic;
};

namespace detail {

inline double reported_cost(double raw, NormKind perf) {
  return (perf == NormKind::H2) ? std::sqrt(raw) : raw;
}

inline double elapsed_ms_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

inline PhiStepSpec make_phi_spec(const Plant& plant, const DPhiConfig& cfg) {
  const Eigen::Index n = plant.n();
  const Eigen::Index m = plant.m();
  Matrix Qx = (cfg.Qx.size() != 0) ? cfg.Qx : Matrix(Matrix::Identity(n, n));
  Matrix Qu = (cfg.Qu.size() != 0) ? cfg.Qu : Matrix(50.0 * Matrix::Identity(m, m));
  RegulationMap H = cfg.H.has_value() ? *cfg.H : RegulationMap::scaled_identity(n, m, 1.0, 1.0);
  PhiStepSpec spec(plant, dhop_support(plant, cfg.d, n, n), dhop_support(plant, cfg.d, m, n),
                   cfg.horizon, std::move(Qx), std::move(Qu), std::move(H));
  spec.perf = cfg.perf;
  spec.stab = cfg.stab;
  spec.solver = cfg.solver;
  spec.admm = cfg.admm;
  spec.threads = cfg.threads;
  return spec;
}

inline DiagonalScaling minimizing_d_step(const Matrix& M, const PhiStepSpec& spec,
                                         const DPhiConfig& cfg, std::uint64_t salt) {
  if (cfg.mode == DStepMode::IterativelyMinimize) {
    return dstep_iterative_min(M, cfg.stab, cfg.beta_step, cfg.seed + salt);
  }
  switch (cfg.stab) {
    case NormKind::NuMaxElt:
      if (cfg.consensus) {
        return dstep_min_nu_consensus(M, spec.support, cfg.admm, cfg.seed).scaling;
      }
      return dstep_min_nu_lp(M).scaling;
    case NormKind::L1RowMax:
      return dstep_min_l1(M, &spec.support.mask);
    case NormKind::LinfColMax:
      return dstep_min_linf(M, &spec.support.mask);
    default:
      throw std::logic_error("minimizing_d_step: bad criterion");
  }
}

}  // namespace detail

/// D-Phi iteration with the minimizing D step: alternately tighten beta by
/// beta_step, re-solve the Phi step, and re-center the scaling at the
/// minimizer for the new magnitude matrix; stop when the Phi step becomes
/// infeasible (stalled) or the target beta_max is certified (target-met).
inline DPhiResult dphi_minimizing(const Plant& plant, const DPhiConfig& cfg) {
  cfg.validate();
  if (cfg.mode == DStepMode::Randomize) {
    throw std::invalid_argument("dphi_minimizing: use dphi_randomizing for the randomizing mode");
  }
  PhiStepSpec spec = detail::make_phi_spec(plant, cfg);
  PhiStepWarmStart warm;
  DPhiResult out;

  double beta_prev = std::numeric_limits<double>::infinity();
  for (int k = 1;; ++k) {
    spec.beta = (k == 1) ? std::numeric_limits<double>::infinity() : beta_prev - cfg.beta_step;
    if (k > 1 && spec.beta <= 0.0) {
      out.status = DPhiStatus::Stalled;
      return out;
    }

    auto t0 = std::chrono::steady_clock::now();
    PhiStepResult step = phi_step(spec, &warm);
    const double phi_ms = detail::elapsed_ms_since(t0);
    ++out.phi_steps;
    out.trace.records.push_back({k, "phi-step", spec.beta,
                                 detail::reported_cost(step.cost, cfg.perf),
                                 step.status == SolveStatus::Optimal, phi_ms});

    if (step.status == SolveStatus::Infeasible) {
      if (k == 1) throw std::runtime_error("dphi_minimizing: first Phi step is infeasible");
      out.status = DPhiStatus::Stalled;
      return out;
    }
    if (step.status != SolveStatus::Optimal) {
      if (k == 1) throw std::runtime_error("dphi_minimizing: first Phi step did not converge");
      out.status = DPhiStatus::SolverFailure;
      out.diagnostic = "phi step did not converge at iteration " + std::to_string(k);
      return out;
    }

    t0 = std::chrono::steady_clock::now();
    DiagonalScaling D = detail::minimizing_d_step(step.M, spec, cfg, static_cast<std::uint64_t>(k));
    const double beta_k = scaled_norm(step.M, D, cfg.stab);
    D.beta = beta_k;
    const double d_ms = detail::elapsed_ms_since(t0);
    out.trace.records.push_back({k, "d-step", beta_k,
                                 detail::reported_cost(step.cost, cfg.perf), true, d_ms});

    out.cl = std::move(step.cl);
    out.M = std::move(step.M);
    out.scaling = D;
    out.beta = beta_k;
    out.cost = detail::reported_cost(step.cost, cfg.perf);
    beta_prev = beta_k;
    spec.D = std::move(D);

    if (beta_k <= cfg.beta_max) {
      out.status = DPhiStatus::TargetMet;
      return out;
    }
  }
}

/// D-Phi iteration with the randomizing D step: the scaling is re-sampled
/// from the feasible set at the current level between iterations, and an
/// infeasible Phi step triggers one attempt to rescue progress by finding a
/// different scaling before giving up.
inline DPhiResult dphi_randomizing(const Plant& plant, const DPhiConfig& cfg) {
  cfg.validate();
  if (cfg.mode != DStepMode::Randomize) {
    throw std::invalid_argument("dphi_randomizing: config mode must be randomize");
  }
  PhiStepSpec spec = detail::make_phi_spec(plant, cfg);
  spec.D = DiagonalScaling::identity(plant.n());
  PhiStepWarmStart warm;
  DPhiResult out;

  double beta_prev = std::numeric_limits<double>::infinity();
  Matrix m_prev;
  for (int k = 1;; ++k) {
    double beta_k = (k == 1) ? std::numeric_limits<double>::infinity() : beta_prev - cfg.beta_step;
    if (k > 1 && beta_k <= 0.0) {
      out.status = DPhiStatus::Stalled;
      return out;
    }
    spec.beta = beta_k;

    auto t0 = std::chrono::steady_clock::now();
    PhiStepResult step = phi_step(spec, &warm);
    ++out.phi_steps;
    out.trace.records.push_back({k, "phi-step", beta_k,
                                 detail::reported_cost(step.cost, cfg.perf),
                                 step.status == SolveStatus::Optimal,
                                 detail::elapsed_ms_since(t0)});

    if (step.status == SolveStatus::IterationLimit) {
      if (k == 1) throw std::runtime_error("dphi_randomizing: first Phi step did not converge");
      out.status = DPhiStatus::SolverFailure;
      out.diagnostic = "phi step did not converge at iteration " + std::to_string(k);
      return out;
    }
    if (step.status == SolveStatus::Infeasible) {
      if (k == 1) throw std::runtime_error("dphi_randomizing: first Phi step is infeasible");
      // Try to rescue the level with a different scaling for the previous M.
      t0 = std::chrono::steady_clock::now();
      auto rescue = dstep_randomize(m_prev, beta_k, cfg.stab, cfg.seed + 7919 * static_cast<std::uint64_t>(k));
      out.trace.records.push_back({k, "d-step", beta_k,
                                   detail::reported_cost(step.cost, cfg.perf),
                                   rescue.has_value(), detail::elapsed_ms_since(t0)});
      if (!rescue.has_value()) {
        out.status = DPhiStatus::Stalled;
        return out;
      }
      spec.D = *rescue;
      t0 = std::chrono::steady_clock::now();
      step = phi_step(spec, &warm);
      ++out.phi_steps;
      out.trace.records.push_back({k, "re-solve", beta_k,
                                   detail::reported_cost(step.cost, cfg.perf),
                                   step.status == SolveStatus::Optimal,
                                   detail::elapsed_ms_since(t0)});
      if (step.status != SolveStatus::Optimal) {
        // The rescued scaling certifies the previous iterate, so this should
        // not happen; surface it rather than looping.
        out.status = DPhiStatus::SolverFailure;
        out.diagnostic = "re-solve failed at iteration " + std::to_string(k);
        return out;
      }
    }

    if (k == 1) beta_k = scaled_norm(step.M, spec.D, cfg.stab);

    DiagonalScaling certified = spec.D;
    certified.beta = scaled_norm(step.M, spec.D, cfg.stab);
    out.cl = std::move(step.cl);
    out.M = step.M;
    out.scaling = certified;
    out.beta = beta_k;
    out.cost = detail::reported_cost(step.cost, cfg.perf);
    beta_prev = beta_k;
    m_prev = std::move(step.M);

    if (beta_k <= cfg.beta_max) {
      out.status = DPhiStatus::TargetMet;
      return out;
    }

    // Randomizing D step between iterations; the current scaling stays valid
    // if no new one is found at this level.
    auto t0d = std::chrono::steady_clock::now();
    auto next = dstep_randomize(m_prev, beta_k, cfg.stab, cfg.seed + 104729 * static_cast<std::uint64_t>(k));
    out.trace.records.push_back({k, "d-step", beta_k, out.cost, next.has_value(),
                                 detail::elapsed_ms_since(t0d)});
    if (next.has_value()) spec.D = *next;
  }
}

inline DPhiResult run_dphi(const Plant& plant, const DPhiConfig& cfg) {
  return (cfg.mode == DStepMode::Randomize) ? dphi_randomizing(plant, cfg)
                                            : dphi_minimizing(plant, cfg);
}

struct SweepRow {
  double beta_max = 0.0;
  double beta = 0.0;
  double cost = 0.0;
  int iters = 0;
  DPhiStatus status = DPhiStatus::SolverFailure;
};

/// Runs the configured algorithm once per beta_max value (no warm starting
/// across points) and tabulates the achieved margin level and cost.
inline std::vector<SweepRow> tradeoff_sweep(const Plant& plant, const DPhiConfig& cfg,
                                            const std::vector<double>& beta_max_values) {
  if (beta_max_values.empty()) {
    throw std::invalid_argument("tradeoff_sweep: beta_max list must be nonempty");
  }
  std::vector<SweepRow> rows;
  rows.reserve(beta_max_values.size());
  for (const double bmax : beta_max_values) {
    DPhiConfig point = cfg;
    point.beta_max = bmax;
    const DPhiResult res = run_dphi(plant, point);
    rows.push_back({bmax, res.beta, res.cost, res.phi_steps, res.status});
  }
  return rows;
}

}  // namespace slsrob

#endif  // SLSROB_D_PHI_HPP_
