// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "resfit/env.hpp"

namespace resfit {

/// Every knob of the pipeline, parsed from flat `key = value` lines with
/// dotted namespaces. Unknown keys are rejected; every run writes its fully
/// resolved config next to its outputs.
struct TrainConfig {
  // env.*
  std::string env_name = "point_reach";
  double env_success_epsilon = -1.0;  // -1: environment default
  double env_observation_noise = 0.0;
  int env_horizon = -1;  // -1: environment default

  // run.*
  std::string run_out_dir = "runs/default";

  // demos.*
  int demos_count = 30;
  double demos_expert_noise = 0.25;
  std::uint64_t demos_seed = 1;
  std::string demos_path;  // empty: <out_dir>/demos.jsonl

  // bc.*
  int bc_chunk_size = 0;  // 0: per-env default (8 point_reach, 16 arm)
  int bc_epochs = 200;
  double bc_lr = 1e-3;
  int bc_batch_size = 64;
  std::vector<std::size_t> bc_hidden = {64, 64};
  bool bc_use_layernorm = false;
  std::uint64_t bc_seed = 2;
  int bc_eval_seeds = 100;
  std::string bc_checkpoint_path;  // empty: <out_dir>/base_policy.rft

  // top-level algorithm switches
  std::string algo = "resfit";                // resfit | filtered_bc
  std::string residual_mode = "residual";     // residual | full_action
  bool split_mode = false;
  bool base_requery_every_step = false;

  // rl.*
  double rl_gamma = 0.99;
  int rl_n_step = 3;
  double rl_utd = 4.0;
  int rl_batch_size = 64;
  int rl_ensemble_size = 5;
  int rl_subset_size = 2;
  double rl_residual_scale = 0.2;
  int rl_warmup_steps = 1000;
  double rl_warmup_noise = -1.0;     // -1: residual_scale
  int rl_actor_delay = 2;
  double rl_rho = 0.995;
  double rl_smoothing_sigma = -1.0;  // -1: 0.1 * residual_scale
  double rl_smoothing_clip = -1.0;   // -1: 0.3 * residual_scale
  double rl_explore_sigma = -1.0;    // -1: 0.05 * residual_scale
  double rl_actor_lr = 3e-4;
  double rl_critic_lr = 1e-3;
  std::uint64_t rl_seed = 3;
  int rl_total_env_steps = 60000;
  std::vector<std::size_t> rl_actor_hidden = {64, 64};
  std::vector<std::size_t> rl_critic_hidden = {64, 64};
  bool rl_actor_use_layernorm = false;
  bool rl_critic_use_layernorm = true;
  int rl_online_capacity = 200000;
  bool rl_demos_in_buffer = true;  // false: sample batches from online data only
  int rl_checkpoint_every_episodes = 50;
  int rl_eval_every_episodes = 0;  // 0: no periodic eval
  int rl_eval_seeds = 50;
  double rl_stop_at_success = 0.0;  // 0: never stop early

  // filtered_bc.*
  int fbc_rounds = 5;
  int fbc_rollouts_per_round = 50;
  int fbc_epochs_per_round = 30;
  int fbc_eval_seeds = 100;
  std::uint64_t fbc_seed = 4;

  // split.*
  bool split_lockstep = false;
  int split_poll_ms = 5;
  bool split_learner_enabled = true;
  int split_checkpoint_every_updates = 200;

  // eval.*
  int eval_pairs = 200;
  int eval_seeds = 100;
  std::uint64_t eval_seed = 5;

  // metrics.*
  std::string metrics_wallclock_mode = "real";  // real | zero

  // ablate.*
  std::vector<std::size_t> ablate_seeds = {1, 2, 3};
  double ablate_threshold = 0.5;

  static TrainConfig defaults() { return {}; }
  static TrainConfig load_file(const std::filesystem::path& path);
  static TrainConfig from_text(const std::string& text);

  /// Set one key from its text value. Throws ConfigError on unknown keys or
  /// malformed values.
  void apply(const std::string& key, const std::string& value);

  /// Canonical `key = value` dump of every key, sorted, resolvable back into
  /// an identical config.
  std::string serialize() const;

  std::string get(const std::string& key) const;
  static std::vector<std::string> known_keys();

  /// Cross-field validation plus resolution of per-env and derived defaults
  /// (-1 sentinels). Returns the resolved copy; idempotent.
  TrainConfig resolved() const;

  /// EnvSpec implied by the (resolved) env.* keys.
  EnvSpec env_spec() const;

  int chunk_size_resolved() const;
};

}  // namespace resfit
