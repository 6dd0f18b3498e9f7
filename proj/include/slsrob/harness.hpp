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

#ifndef SLSROB_HARNESS_HPP_
#define SLSROB_HARNESS_HPP_

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "slsrob/d_phi.hpp"
#include "slsrob/io.hpp"
#include "slsrob/lqr.hpp"
#include "slsrob/sls.hpp"

namespace slsrob {

// Exit codes shared by all subcommands.
inline constexpr int kExitTargetMet = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitStalled = 2;

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// One experiment: plant source, synthesis parameters, and output location.
/// Defaults follow the ring benchmark (N=10 ring at spectral radius 3,
/// T=30, d=2, Qx=I, Qu=50I, z = x + u, beta_step=0.05).
struct ExperimentConfig {
  std::optional<std::string> plant_file;
  int ring_n = 10;
  double ring_rho = 3.0;
  std::uint64_t ring_seed = 7;

  int horizon = 30;
  int d = 2;
  NormKind stab = NormKind::NuMaxElt;
  std::string algorithm = "alg1";  // alg1 | alg2
  DStepMode mode = DStepMode::Minimize;
  bool consensus = false;
  double beta_step = 0.05;
  std::vector<double> beta_max;  // required by dphi (first entry) and sweep
  double qx = 1.0, qu = 50.0;
  double hx = 1.0, hu = 1.0;
  std::uint64_t seed = 1;
  int threads = 0;
  std::string out_dir = "out";
  double gamma = 1.0;
  double tol_consensus = 1e-4;
  double tol_progress = 1e-4;
  int admm_max_iter = 5000;
};

inline DStepMode dstep_mode_from_string(const std::string& s) {
  if (s == "minimize") return DStepMode::Minimize;
  if (s == "iterative" || s == "iteratively-minimize") return DStepMode::IterativelyMinimize;
  if (s == "randomize") return DStepMode::Randomize;
  throw std::invalid_argument("unknown dstep mode '" + s +
                              "' (expected minimize, iterative or randomize)");
}

inline ExperimentConfig parse_experiment_config(const json& j) {
  static const std::set<std::string> allowed{
      "plant",     "horizon",       "d",        "stab",    "algorithm", "dstep_mode",
      "consensus", "beta_step",     "beta_max", "qx",      "qu",        "hx",
      "hu",        "seed",          "threads",  "out_dir", "gamma",     "tol_consensus",
      "tol_progress", "admm_max_iter"};
  if (!j.is_object()) throw std::invalid_argument("config error: document must be a JSON object");
  for (const auto& item : j.items()) {
    if (allowed.find(item.key()) == allowed.end()) {
      throw std::invalid_argument("config error: unknown key '" + item.key() + "'");
    }
  }

  ExperimentConfig cfg;
  bool mode_given = false;
  try {
    if (j.contains("plant")) {
      const json& p = j.at("plant");
      if (p.contains("file")) {
        cfg.plant_file = p.at("file").get<std::string>();
      } else if (p.contains("ring")) {
        const json& r = p.at("ring");
        cfg.ring_n = r.value("n", cfg.ring_n);
        cfg.ring_rho = r.value("rho", cfg.ring_rho);
        cfg.ring_seed = r.value("seed", cfg.ring_seed);
      } else {
        throw std::invalid_argument("config error: plant must have 'file' or 'ring'");
      }
    }
    cfg.horizon = j.value("horizon", cfg.horizon);
    cfg.d = j.value("d", cfg.d);
    if (j.contains("stab")) cfg.stab = norm_kind_from_string(j.at("stab").get<std::string>());
    cfg.algorithm = j.value("algorithm", cfg.algorithm);
    if (j.contains("dstep_mode")) {
      cfg.mode = dstep_mode_from_string(j.at("dstep_mode").get<std::string>());
      mode_given = true;
    }
    cfg.consensus = j.value("consensus", cfg.consensus);
    cfg.beta_step = j.value("beta_step", cfg.beta_step);
    if (j.contains("beta_max")) {
      if (j.at("beta_max").is_array()) {
        cfg.beta_max = j.at("beta_max").get<std::vector<double>>();
      } else {
        cfg.beta_max = {j.at("beta_max").get<double>()};
      }
    }
    cfg.qx = j.value("qx", cfg.qx);
    cfg.qu = j.value("qu", cfg.qu);
    cfg.hx = j.value("hx", cfg.hx);
    cfg.hu = j.value("hu", cfg.hu);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.threads = j.value("threads", cfg.threads);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    cfg.gamma = j.value("gamma", cfg.gamma);
    cfg.tol_consensus = j.value("tol_consensus", cfg.tol_consensus);
    cfg.tol_progress = j.value("tol_progress", cfg.tol_progress);
    cfg.admm_max_iter = j.value("admm_max_iter", cfg.admm_max_iter);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config error: ") + e.what());
  }

  if (cfg.algorithm != "alg1" && cfg.algorithm != "alg2") {
    throw std::invalid_argument("config error: algorithm must be 'alg1' or 'alg2'");
  }
  if (!mode_given) {
    cfg.mode = (cfg.algorithm == "alg2") ? DStepMode::Randomize : DStepMode::Minimize;
  }
  if (cfg.algorithm == "alg2" && cfg.mode != DStepMode::Randomize) {
    throw std::invalid_argument("config error: alg2 requires dstep_mode 'randomize'");
  }
  if (cfg.algorithm == "alg1" && cfg.mode == DStepMode::Randomize) {
    throw std::invalid_argument("config error: alg1 requires a minimizing dstep_mode");
  }
  return cfg;
}

inline Plant experiment_plant(const ExperimentConfig& cfg) {
  if (cfg.plant_file.has_value()) return plant_from_json(load_json_file(*cfg.plant_file));
  return ring_plant(cfg.ring_n, cfg.ring_rho, cfg.ring_seed);
}

inline DPhiConfig to_dphi_config(const ExperimentConfig& cfg, const Plant& plant) {
  DPhiConfig out;
  out.beta_step = cfg.beta_step;
  if (!cfg.beta_max.empty()) out.beta_max = cfg.beta_max.front();
  out.stab = cfg.stab;
  out.Qx = cfg.qx * Matrix::Identity(plant.n(), plant.n());
  out.Qu = cfg.qu * Matrix::Identity(plant.m(), plant.m());
  out.H = RegulationMap::scaled_identity(plant.n(), plant.m(), cfg.hx, cfg.hu);
  out.d = cfg.d;
  out.horizon = cfg.horizon;
  out.mode = cfg.mode;
  out.consensus = cfg.consensus;
  out.seed = cfg.seed;
  out.threads = cfg.threads;
  out.admm.gamma = cfg.gamma;
  out.admm.tol_consensus = cfg.tol_consensus;
  out.admm.tol_progress = cfg.tol_progress;
  out.admm.max_iter = cfg.admm_max_iter;
  return out;
}

inline std::string resolve_out_dir(const std::string& configured) {
  if (const char* env = std::getenv("SLSROB_OUT_DIR")) return env;
  return configured;
}

inline void write_trace_csv(const std::string& path, const IterationTrace& trace) {
  std::ofstream ofs(path);
  if (!ofs) throw std::runtime_error("cannot write '" + path + "'");
  ofs << "k,phase,beta,cost,feasible,elapsed_ms\n";
  for (const TraceRecord& r : trace.records) {
    ofs << r.k << ',' << r.phase << ',' << fmt_double(r.beta) << ',' << fmt_double(r.cost) << ','
        << (r.feasible ? 1 : 0) << ',' << fmt_double(r.elapsed_ms) << '\n';
  }
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  const Eigen::Index n = traj.x.cols();
  const Eigen::Index m = traj.u.cols();
  os << "t";
  for (Eigen::Index i = 0; i < n; ++i) os << ",x_" << (i + 1);
  for (Eigen::Index i = 0; i < m; ++i) os << ",u_" << (i + 1);
  os << '\n';
  for (Eigen::Index t = 0; t < traj.u.rows(); ++t) {
    os << t;
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << fmt_double(traj.x(t, i));
    for (Eigen::Index i = 0; i < m; ++i) os << ',' << fmt_double(traj.u(t, i));
    os << '\n';
  }
}

/// LQR comparison point: rooted H2 cost and the centrally minimized level
/// beta_lqr for the requested criterion, both computed from the truncated
/// static-gain loop with the same horizon and regulated output.
struct LqrReference {
  LqrSolution sol;
  double cost_rooted = 0.0;
  double beta = 0.0;
};

inline LqrReference lqr_reference(const Plant& plant, double qx, double qu, int horizon,
                                  double hx, double hu, NormKind stab) {
  const Matrix Qx = qx * Matrix::Identity(plant.n(), plant.n());
  const Matrix Qu = qu * Matrix::Identity(plant.m(), plant.m());
  LqrReference ref;
  ref.sol = dare_solve(plant.A, plant.B, Qx, Qu);
  ref.cost_rooted = std::sqrt(ref.sol.cost);
  const LqrLoop loop = lqr_closed_loop(plant, ref.sol.K, horizon);
  const RegulationMap H = RegulationMap::scaled_identity(plant.n(), plant.m(), hx, hu);
  const Matrix M = magnitude_matrix(loop.cl, H);
  switch (stab) {
    case NormKind::NuMaxElt: ref.beta = dstep_min_nu_lp(M).scaling.beta; break;
    case NormKind::L1RowMax: ref.beta = dstep_min_l1(M).beta; break;
    case NormKind::LinfColMax: ref.beta = dstep_min_linf(M).beta; break;
    default: throw std::invalid_argument("lqr_reference: bad criterion");
  }
  return ref;
}

inline ControllerFile make_controller_file(const DPhiResult& res, const ExperimentConfig& cfg) {
  ControllerFile c;
  c.horizon = res.cl->horizon();
  c.d = cfg.d;
  c.stab = cfg.stab;
  c.beta = res.beta;
  c.cost = res.cost;
  c.scaling_log = res.scaling.log_values;
  c.hx = cfg.hx;
  c.hu = cfg.hu;
  c.qx = cfg.qx;
  c.qu = cfg.qu;
  c.phi_x_taps = res.cl->phi_x.taps();
  c.phi_u_taps = res.cl->phi_u.taps();
  return c;
}

inline int exit_code_for(DPhiStatus s) {
  switch (s) {
    case DPhiStatus::TargetMet: return kExitTargetMet;
    case DPhiStatus::Stalled: return kExitStalled;
    case DPhiStatus::SolverFailure: return kExitError;
  }
  return kExitError;
}

// ---------------------------------------------------------------------------
// Subcommands (the CLI in tools/ is a thin wrapper over these).
// ---------------------------------------------------------------------------

inline int cmd_ring_gen(int n, double rho, std::uint64_t seed, const std::string& out_path,
                        std::ostream& os = std::cout) {
  const Plant plant = ring_plant(n, rho, seed);
  save_json_file(out_path, plant_to_json(plant, seed));
  os << "wrote " << out_path << " (n=" << n << ", spectral radius " << fmt_double(rho) << ")\n";
  return kExitTargetMet;
}

inline int cmd_dphi(const ExperimentConfig& cfg, std::ostream& os = std::cout) {
  if (cfg.beta_max.empty()) {
    throw std::invalid_argument("config error: dphi requires beta_max");
  }
  const Plant plant = experiment_plant(cfg);
  const DPhiConfig dcfg = to_dphi_config(cfg, plant);
  const DPhiResult res = run_dphi(plant, dcfg);

  const std::string dir = resolve_out_dir(cfg.out_dir);
  std::filesystem::create_directories(dir);
  write_trace_csv(dir + "/trace.csv", res.trace);

  if (!res.cl.has_value()) {
    os << "status=" << to_string(res.status) << " diagnostic=" << res.diagnostic << '\n';
    return exit_code_for(res.status);
  }
  save_json_file(dir + "/controller.json", controller_to_json(make_controller_file(res, cfg)));

  const LqrReference ref =
      lqr_reference(plant, cfg.qx, cfg.qu, cfg.horizon, cfg.hx, cfg.hu, cfg.stab);
  // cost_norm = cost / cost_lqr (rooted H2); margin_norm = beta_lqr / beta:
  // the LQR point maps to (1, 1) and larger margin_norm is more robust.
  os << "status=" << to_string(res.status) << " beta=" << fmt_double(res.beta)
     << " cost=" << fmt_double(res.cost) << " cost_norm=" << fmt_double(res.cost / ref.cost_rooted)
     << " margin_norm=" << fmt_double(ref.beta / res.beta) << " phi_steps=" << res.phi_steps
     << '\n';
  if (!res.diagnostic.empty()) os << "diagnostic=" << res.diagnostic << '\n';
  return exit_code_for(res.status);
}

inline int cmd_sweep(const ExperimentConfig& cfg, std::ostream& os = std::cout) {
  if (cfg.beta_max.empty()) {
    throw std::invalid_argument("config error: sweep requires a beta_max list");
  }
  const Plant plant = experiment_plant(cfg);
  const DPhiConfig dcfg = to_dphi_config(cfg, plant);
  const std::vector<SweepRow> rows = tradeoff_sweep(plant, dcfg, cfg.beta_max);
  const LqrReference ref =
      lqr_reference(plant, cfg.qx, cfg.qu, cfg.horizon, cfg.hx, cfg.hu, cfg.stab);

  const std::string dir = resolve_out_dir(cfg.out_dir);
  std::filesystem::create_directories(dir);
  const std::string path = dir + "/sweep.csv";
  std::ofstream ofs(path);
  if (!ofs) throw std::runtime_error("cannot write '" + path + "'");
  ofs << "beta_max,beta,cost,cost_norm,margin_norm,iters\n";
  bool any_error = false;
  for (const SweepRow& r : rows) {
    ofs << fmt_double(r.beta_max) << ',' << fmt_double(r.beta) << ',' << fmt_double(r.cost) << ','
        << fmt_double(r.cost / ref.cost_rooted) << ',' << fmt_double(ref.beta / r.beta) << ','
        << r.iters << '\n';
    if (r.status == DPhiStatus::SolverFailure) any_error = true;
  }
  os << "wrote " << path << " (" << rows.size() << " rows)\n";
  return any_error ? kExitError : kExitTargetMet;
}

inline int cmd_lqr(const ExperimentConfig& cfg, std::ostream& os = std::cout) {
  const Plant plant = experiment_plant(cfg);
  const LqrReference ref =
      lqr_reference(plant, cfg.qx, cfg.qu, cfg.horizon, cfg.hx, cfg.hu, cfg.stab);
  const std::string dir = resolve_out_dir(cfg.out_dir);
  std::filesystem::create_directories(dir);
  save_json_file(dir + "/lqr.json",
                 json{{"P", matrix_to_json(ref.sol.P)},
                      {"K", matrix_to_json(ref.sol.K)},
                      {"closed_loop_radius", ref.sol.closed_loop_radius},
                      {"cost", ref.cost_rooted},
                      {"stab", to_string(cfg.stab)},
                      {"beta", ref.beta}});
  os << "lqr cost=" << fmt_double(ref.cost_rooted)
     << " radius=" << fmt_double(ref.sol.closed_loop_radius) << " beta_" << to_string(cfg.stab)
     << "=" << fmt_double(ref.beta) << " margin=" << fmt_double(margin(ref.beta)) << '\n';
  return kExitTargetMet;
}

struct DStepArgs {
  std::string matrix_path;
  NormKind kind = NormKind::NuMaxElt;
  DStepMode mode = DStepMode::Minimize;
  double beta = 0.0;       // randomize only
  double beta_step = 0.05; // iterative only
  bool consensus = false;
  int consensus_d = 1;     // support hops when consensus is used
  std::uint64_t seed = 0;
  double gamma = 1.0;
  std::optional<std::string> out_path;
  std::optional<std::string> log_path;
};

inline int cmd_dstep(const DStepArgs& args, std::ostream& os = std::cout) {
  const Matrix M = matrix_from_json(load_json_file(args.matrix_path));
  DiagonalScaling d = DiagonalScaling::identity(M.rows());
  bool feasible = true;
  double eta = 0.0;
  bool have_eta = false;

  if (args.mode == DStepMode::Minimize) {
    if (args.consensus) {
      if (args.kind != NormKind::NuMaxElt) {
        throw std::invalid_argument("dstep: consensus is available only for nu");
      }
      // The consensus support comes from the nonzero pattern of M itself.
      Matrix sym = M + M.transpose();
      Plant shell(Matrix(sym.array().abs().matrix()), Matrix::Identity(M.rows(), M.rows()));
      Support sup = dhop_support(shell, args.consensus_d, M.rows(), M.rows());
      AdmmConfig cfg;
      cfg.gamma = args.gamma;
      std::ofstream log;
      std::ostream* logp = nullptr;
      if (args.log_path.has_value()) {
        log.open(*args.log_path);
        if (!log) throw std::runtime_error("cannot write '" + *args.log_path + "'");
        log << "iter,max_eta_spread,max_l_spread\n";
        logp = &log;
      }
      const ConsensusResult res = dstep_min_nu_consensus(M, sup, cfg, args.seed, logp);
      d = res.scaling;
      eta = res.eta;
      have_eta = true;
    } else {
      switch (args.kind) {
        case NormKind::NuMaxElt: {
          const NuLpResult res = dstep_min_nu_lp(M);
          d = res.scaling;
          eta = res.eta;
          have_eta = true;
          break;
        }
        case NormKind::L1RowMax: d = dstep_min_l1(M); break;
        case NormKind::LinfColMax: d = dstep_min_linf(M); break;
        default: throw std::invalid_argument("dstep: kind must be l1, linf or nu");
      }
    }
  } else if (args.mode == DStepMode::IterativelyMinimize) {
    d = dstep_iterative_min(M, args.kind, args.beta_step, args.seed);
  } else {
    if (!(args.beta > 0.0)) throw std::invalid_argument("dstep: randomize requires --beta > 0");
    const auto res = dstep_randomize(M, args.beta, args.kind, args.seed);
    feasible = res.has_value();
    if (res.has_value()) d = *res;
  }

  os << "feasible=" << (feasible ? 1 : 0);
  if (feasible) {
    os << " beta=" << fmt_double(d.beta);
    if (have_eta) os << " eta=" << fmt_double(eta);
    os << " l=[";
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      os << (i > 0 ? "," : "") << fmt_double(d.log_values(i));
    }
    os << ']';
  }
  os << '\n';
  if (args.out_path.has_value() && feasible) {
    json out{{"beta", d.beta},
             {"l", std::vector<double>(d.log_values.data(), d.log_values.data() + d.size())}};
    if (have_eta) out["eta"] = eta;
    save_json_file(*args.out_path, out);
  }
  return kExitTargetMet;
}

struct VerifyArgs {
  std::string controller_path;
  std::string plant_path;
  int smoke_seeds = 100;
  int smoke_steps = 1000;
  std::uint64_t seed = 0;
  std::optional<std::string> traj_out;
};

/// Post-hoc certification: recomputes the achievability residual, support
/// compliance, the magnitude matrix and the stored certificate, reports the
/// best margin each criterion could certify, and runs the uncertain-rollout
/// smoke suite (statistical, non-certifying).
inline int cmd_verify(const VerifyArgs& args, std::ostream& os = std::cout) {
  const ControllerFile c = controller_from_json(load_json_file(args.controller_path));
  const Plant plant = plant_from_json(load_json_file(args.plant_path));

  FirTransferMatrix phi_x(c.phi_x_taps);
  FirTransferMatrix phi_u(c.phi_u_taps);
  std::optional<ClosedLoop> cl;
  if (c.d >= 0) {
    cl.emplace(std::move(phi_x), std::move(phi_u), dhop_support(plant, c.d, plant.n(), plant.n()),
               dhop_support(plant, c.d, plant.m(), plant.n()));
  } else {
    cl.emplace(make_dense_closed_loop(std::move(phi_x), std::move(phi_u)));
  }

  bool all_pass = true;
  auto report = [&](const std::string& name, bool pass) {
    os << "check " << name << ": " << (pass ? "PASS" : "FAIL") << '\n';
    all_pass = all_pass && pass;
  };

  const double residual = achievability_residual(plant, *cl);
  os << "achievability residual = " << fmt_double(residual) << '\n';
  report("achievability", residual <= 1e-6);
  report("support", cl->respects_support());

  const RegulationMap H = RegulationMap::scaled_identity(plant.n(), plant.m(), c.hx, c.hu);
  const Matrix M = magnitude_matrix(*cl, H);
  os << "best margins: nu=" << fmt_double(margin(dstep_min_nu_lp(M).scaling.beta))
     << " l1=" << fmt_double(margin(dstep_min_l1(M).beta))
     << " linf=" << fmt_double(margin(dstep_min_linf(M).beta)) << '\n';

  DiagonalScaling stored;
  stored.log_values = c.scaling_log;
  stored.beta = c.beta;
  const double achieved = scaled_norm(M, stored, c.stab);
  os << "stored certificate: kind=" << to_string(c.stab) << " beta=" << fmt_double(c.beta)
     << " achieved=" << fmt_double(achieved) << '\n';
  report("certificate", achieved <= c.beta * (1.0 + 1e-6));

  int bounded_count = 0;
  for (int s = 0; s < args.smoke_seeds; ++s) {
    const Uncertainty unc = sample_uncertainty(plant.n(), c.stab, 0.9 / c.beta,
                                               args.seed + static_cast<std::uint64_t>(s),
                                               args.smoke_steps);
    const UncertainRollout roll =
        uncertain_rollout(plant, *cl, H, unc, args.smoke_steps, args.seed + static_cast<std::uint64_t>(s));
    if (roll.bounded) ++bounded_count;
    if (s == 0 && args.traj_out.has_value()) {
      std::ofstream tofs(*args.traj_out);
      if (!tofs) throw std::runtime_error("cannot write '" + *args.traj_out + "'");
      write_trajectory_csv(tofs, roll.traj);
    }
  }
  os << "uncertain rollouts bounded: " << bounded_count << "/" << args.smoke_seeds
     << " (delta at 0.9 of certified margin, " << args.smoke_steps << " steps)\n";
  report("uncertain-rollout-smoke", bounded_count == args.smoke_seeds);

  return all_pass ? kExitTargetMet : kExitError;
}

}  // namespace slsrob

#endif  // SLSROB_HARNESS_HPP_
