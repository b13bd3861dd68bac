// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "resfit/bc.hpp"
#include "resfit/metrics.hpp"
#include "resfit/resfit.hpp"
#include "resfit/rollout.hpp"

namespace resfit {

/// Executes base + residual (residual_mode=residual) or the residual network
/// alone over a zero base (residual_mode=full_action). With a null exploration
/// stream the policy is deterministic; a zero-initialized actor then replays
/// the base policy bitwise.
class ResidualRolloutPolicy : public RolloutPolicy {
 public:
  ResidualRolloutPolicy(ChunkedBasePolicy* base, const ResidualActor* actor,
                        Rng* explore_rng = nullptr, double explore_sigma = 0.0);

  void begin_episode() override;
  std::vector<double> act(std::span<const double> obs) override;

  const std::vector<double>& last_base() const { return last_base_; }

 private:
  ChunkedBasePolicy* base_;  // null: zero base actions (full_action mode)
  const ResidualActor* actor_;
  Rng* explore_rng_;
  double explore_sigma_;
  std::vector<double> last_base_;
};

struct EpisodeSummary {
  long env_steps_at_end = 0;
  double episode_return = 0.0;
  int length = 0;
  bool success = false;
  bool completed = true;  // false when collection stopped mid-episode
};

/// Scheduler for critic/actor updates: one call performs one critic update
/// (fresh symmetric batch, n-step REDQ targets, per-critic Adam, target
/// Polyak) and, every actor_delay critic updates, one actor update on the
/// latest batch followed by the actor-target Polyak. Shared between the
/// single-process trainer and the split-mode learner.
class UpdateEngine {
 public:
  UpdateEngine(const TrainConfig& resolved, ResidualActor actor,
               CriticEnsemble critics, std::uint64_t rng_root);

  /// Returns false (and does nothing) while either buffer lacks a batch.
  bool try_update_cycle(const ReplayStore& store);

  const ResidualActor& actor() const { return actor_; }
  ResidualActor& actor() { return actor_; }
  const CriticEnsemble& critics() const { return critics_; }

  long critic_updates() const { return critic_updates_; }
  long actor_updates() const { return actor_updates_; }
  double max_abs_q() const { return max_abs_q_; }

  struct IntervalStats {
    double mean_msbe = 0.0;
    double mean_q = 0.0;
    double actor_loss = 0.0;
    long critic_updates = 0;
    long actor_updates = 0;
  };
  /// Averages since the previous call; resets the accumulators.
  IntervalStats take_interval_stats();

 private:
  TrainConfig cfg_;
  ResidualActor actor_;
  CriticEnsemble critics_;
  std::vector<AdamState> critic_opts_;
  AdamState actor_opt_;
  Rng sample_rng_;
  Rng target_rng_;
  long critic_updates_ = 0;
  long actor_updates_ = 0;
  double max_abs_q_ = 0.0;
  double acc_msbe_ = 0.0, acc_q_ = 0.0, acc_aloss_ = 0.0;
  long acc_critic_ = 0, acc_actor_ = 0;
};

struct EvalPoint {
  long env_steps = 0;
  double success_rate = 0.0;
};

struct TrainResult {
  ResidualActor actor;
  CriticEnsemble critics;
  long env_steps = 0;
  long warmup_steps = 0;
  long episodes = 0;
  long critic_updates = 0;
  long actor_updates = 0;
  double max_abs_q = 0.0;
  std::vector<EvalPoint> eval_history;
  bool stopped_early = false;
  std::uint64_t base_hash_before = 0;
  std::uint64_t base_hash_after = 0;
};

/// Uniform-noise warmup (full_action = clamp(base + U(-noise, noise))) until
/// the online buffer holds exactly rl.warmup_steps transitions, cutting the
/// final episode short if needed. Returns per-episode summaries for logging.
std::vector<EpisodeSummary> warmup_phase(const EnvSpec& spec, ChunkedBasePolicy* base,
                                         ReplayStore& store,
                                         const TrainConfig& resolved);

/// Single-process ResFiT training: warmup, then per env step the UTD-
/// scheduled updates. Deterministic given the config seeds. When out_dir is
/// non-empty, writes metrics.csv, eval.csv, periodic checkpoints and a final
/// checkpoint there; on divergence a checkpoint is written before rethrow.
TrainResult train_resfit(const EnvSpec& spec, ChunkedBasePolicy* base_policy,
                         ReplayStore& store, const TrainConfig& resolved,
                         const std::filesystem::path& out_dir = {});

/// Fresh actor/critics initialized from the config's rl.seed.
ResidualActor make_actor(const EnvSpec& spec, const TrainConfig& resolved);
CriticEnsemble make_critics(const EnvSpec& spec, const TrainConfig& resolved);

}  // namespace resfit
