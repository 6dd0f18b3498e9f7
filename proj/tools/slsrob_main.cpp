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

#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "slsrob/harness.hpp"

namespace {

slsrob::ExperimentConfig load_config(const std::string& path) {
  return slsrob::parse_experiment_config(slsrob::load_json_file(path));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed robust controller synthesis via D-Phi iteration over SLS"};
  app.require_subcommand(1);

  // ring-gen
  auto* ring = app.add_subcommand("ring-gen", "Generate a ring plant and write it as JSON");
  int ring_n = 10;
  double ring_rho = 3.0;
  std::uint64_t ring_seed = 7;
  std::string ring_out = "plant.json";
  ring->add_option("--n", ring_n, "node count (>= 3)");
  ring->add_option("--rho", ring_rho, "target spectral radius (> 0)");
  ring->add_option("--seed", ring_seed, "generator seed");
  ring->add_option("--out", ring_out, "output path");

  // dphi
  auto* dphi = app.add_subcommand("dphi", "Run D-Phi iteration from a JSON config");
  std::string dphi_config;
  int dphi_threads = -1;
  dphi->add_option("--config", dphi_config, "experiment config (JSON)")->required();
  dphi->add_option("--threads", dphi_threads, "worker cap (overrides config; 0 = hardware)");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Cost/margin tradeoff over a beta_max list");
  std::string sweep_config;
  int sweep_threads = -1;
  sweep->add_option("--config", sweep_config, "experiment config (JSON)")->required();
  sweep->add_option("--threads", sweep_threads, "worker cap (overrides config; 0 = hardware)");

  // dstep
  auto* dstep = app.add_subcommand("dstep", "Run one D step on a magnitude matrix");
  slsrob::DStepArgs dargs;
  std::string dstep_kind = "nu", dstep_mode = "minimize";
  std::string dstep_out, dstep_log;
  dstep->add_option("--matrix", dargs.matrix_path, "matrix JSON {rows, cols, data}")->required();
  dstep->add_option("--kind", dstep_kind, "l1 | linf | nu");
  dstep->add_option("--mode", dstep_mode, "minimize | iterative | randomize");
  dstep->add_option("--beta", dargs.beta, "level for randomize");
  dstep->add_option("--beta-step", dargs.beta_step, "resolution for iterative");
  dstep->add_flag("--consensus", dargs.consensus, "distributed consensus (nu minimize only)");
  dstep->add_option("--consensus-d", dargs.consensus_d, "hops for the consensus support");
  dstep->add_option("--seed", dargs.seed, "seed for randomized objectives");
  dstep->add_option("--gamma", dargs.gamma, "consensus penalty");
  dstep->add_option("--out", dstep_out, "write the scaling as JSON");
  dstep->add_option("--log", dstep_log, "consensus disagreement CSV");

  // lqr
  auto* lqr = app.add_subcommand("lqr", "LQR baseline cost and margin");
  std::string lqr_config;
  lqr->add_option("--config", lqr_config, "experiment config (JSON)")->required();

  // verify
  auto* verify = app.add_subcommand("verify", "Re-certify a synthesized controller");
  slsrob::VerifyArgs vargs;
  std::string verify_traj;
  verify->add_option("--controller", vargs.controller_path, "controller JSON")->required();
  verify->add_option("--plant", vargs.plant_path, "plant JSON")->required();
  verify->add_option("--smoke-seeds", vargs.smoke_seeds, "number of sampled perturbations");
  verify->add_option("--smoke-steps", vargs.smoke_steps, "rollout length");
  verify->add_option("--seed", vargs.seed, "base seed for the smoke suite");
  verify->add_option("--traj", verify_traj, "write the first rollout as CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (ring->parsed()) {
      return slsrob::cmd_ring_gen(ring_n, ring_rho, ring_seed, ring_out);
    }
    if (dphi->parsed()) {
      slsrob::ExperimentConfig cfg = load_config(dphi_config);
      if (dphi_threads >= 0) cfg.threads = dphi_threads;
      return slsrob::cmd_dphi(cfg);
    }
    if (sweep->parsed()) {
      slsrob::ExperimentConfig cfg = load_config(sweep_config);
      if (sweep_threads >= 0) cfg.threads = sweep_threads;
      return slsrob::cmd_sweep(cfg);
    }
    if (dstep->parsed()) {
      dargs.kind = slsrob::norm_kind_from_string(dstep_kind);
      dargs.mode = slsrob::dstep_mode_from_string(dstep_mode);
      if (!dstep_out.empty()) dargs.out_path = dstep_out;
      if (!dstep_log.empty()) dargs.log_path = dstep_log;
      return slsrob::cmd_dstep(dargs);
    }
    if (lqr->parsed()) {
      return slsrob::cmd_lqr(load_config(lqr_config));
    }
    if (verify->parsed()) {
      if (!verify_traj.empty()) vargs.traj_out = verify_traj;
      return slsrob::cmd_verify(vargs);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return slsrob::kExitError;
  }
  return slsrob::kExitError;
}
