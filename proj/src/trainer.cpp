// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#include "resfit/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "resfit/checkpoint.hpp"
#include "resfit/errors.hpp"

namespace resfit {

namespace {

std::vector<double> clamp_unit_vec(std::vector<double> v) {
  for (double& x : v) x = std::clamp(x, -1.0, 1.0);
  return v;
}

}  // namespace

ResidualRolloutPolicy::ResidualRolloutPolicy(ChunkedBasePolicy* base,
                                             const ResidualActor* actor,
                                             Rng* explore_rng, double explore_sigma)
    : base_(base), actor_(actor), explore_rng_(explore_rng),
      explore_sigma_(explore_sigma) {}

void ResidualRolloutPolicy::begin_episode() {
  if (base_) base_->begin_episode();
}

std::vector<double> ResidualRolloutPolicy::act(std::span<const double> obs) {
  if (base_) {
    last_base_ = base_->act(obs);
  } else {
    last_base_.assign(actor_->action_dim, 0.0);
  }
  std::vector<double> res = actor_->residual(obs, last_base_);
  const double alpha = actor_->residual_scale;
  if (explore_rng_ && explore_sigma_ > 0.0) {
    for (double& r : res) {
      r = std::clamp(r + explore_rng_->normal(0.0, explore_sigma_), -alpha, alpha);
    }
  }
  std::vector<double> action(last_base_.size());
  for (std::size_t i = 0; i < action.size(); ++i) {
    action[i] = std::clamp(last_base_[i] + res[i], -1.0, 1.0);
  }
  return action;
}

ResidualActor make_actor(const EnvSpec& spec, const TrainConfig& cfg) {
  Rng rng(derive_seed(cfg.rl_seed, "init-actor"));
  return ResidualActor::create(spec.obs_dim, spec.action_dim, cfg.rl_actor_hidden,
                               cfg.rl_actor_use_layernorm, cfg.rl_residual_scale, rng);
}

CriticEnsemble make_critics(const EnvSpec& spec, const TrainConfig& cfg) {
  Rng rng(derive_seed(cfg.rl_seed, "init-critic"));
  return CriticEnsemble::create(spec.obs_dim, spec.action_dim, cfg.rl_critic_hidden,
                                cfg.rl_critic_use_layernorm, cfg.rl_ensemble_size,
                                cfg.rl_subset_size, rng);
}

UpdateEngine::UpdateEngine(const TrainConfig& resolved, ResidualActor actor,
                           CriticEnsemble critics, std::uint64_t rng_root)
    : cfg_(resolved),
      actor_(std::move(actor)),
      critics_(std::move(critics)),
      actor_opt_(AdamState::create(actor_.spec, resolved.rl_actor_lr)),
      sample_rng_(derive_seed(rng_root, "sampling")),
      target_rng_(derive_seed(rng_root, "targets")) {
  for (int i = 0; i < critics_.size(); ++i) {
    critic_opts_.push_back(AdamState::create(critics_.spec, cfg_.rl_critic_lr));
  }
}

bool UpdateEngine::try_update_cycle(const ReplayStore& store) {
  auto batch = cfg_.rl_demos_in_buffer
                   ? sample_symmetric(store, cfg_.rl_batch_size, cfg_.rl_n_step,
                                      cfg_.rl_gamma, sample_rng_)
                   : sample_uniform(store.online(), cfg_.rl_batch_size, cfg_.rl_n_step,
                                    cfg_.rl_gamma, sample_rng_);
  if (!batch) return false;

  const std::vector<double> y =
      compute_td_targets(*batch, actor_, critics_, cfg_, target_rng_);
  const CriticUpdateStats stats = critic_update(*batch, y, critics_, critic_opts_);
  for (std::size_t i = 0; i < critics_.members.size(); ++i) {
    polyak_update(critics_.targets[i], critics_.members[i], cfg_.rl_rho);
  }
  ++critic_updates_;
  acc_msbe_ += stats.msbe;
  acc_q_ += stats.mean_q;
  ++acc_critic_;
  max_abs_q_ = std::max(max_abs_q_, stats.max_abs_q);

  if (critic_updates_ % cfg_.rl_actor_delay == 0) {
    const ActorUpdateStats astats = actor_update(*batch, actor_, critics_, actor_opt_);
    polyak_update(actor_.target, actor_.params, cfg_.rl_rho);
    ++actor_updates_;
    acc_aloss_ += astats.loss;
    ++acc_actor_;
  }
  return true;
}

UpdateEngine::IntervalStats UpdateEngine::take_interval_stats() {
  IntervalStats s;
  s.critic_updates = acc_critic_;
  s.actor_updates = acc_actor_;
  if (acc_critic_ > 0) {
    s.mean_msbe = acc_msbe_ / static_cast<double>(acc_critic_);
    s.mean_q = acc_q_ / static_cast<double>(acc_critic_);
  }
  if (acc_actor_ > 0) s.actor_loss = acc_aloss_ / static_cast<double>(acc_actor_);
  acc_msbe_ = acc_q_ = acc_aloss_ = 0.0;
  acc_critic_ = acc_actor_ = 0;
  return s;
}

std::vector<EpisodeSummary> warmup_phase(const EnvSpec& spec, ChunkedBasePolicy* base,
                                         ReplayStore& store,
                                         const TrainConfig& cfg) {
  const bool zero_base = cfg.residual_mode == "full_action";
  if (!zero_base && base == nullptr) {
    throw ValidationError("warmup_phase: base policy required in residual mode");
  }
  std::vector<EpisodeSummary> episodes;
  Rng noise_rng(derive_seed(cfg.rl_seed, "warmup-noise"));
  long collected = 0;
  std::uint64_t episode_index = 0;

  while (collected < cfg.rl_warmup_steps) {
    const std::uint64_t scene_seed =
        derive_seed(cfg.rl_seed, "warmup-scene", episode_index++);
    auto [state, obs] = env_reset(spec, scene_seed);
    if (base) base->begin_episode();
    std::vector<double> base_t =
        zero_base ? std::vector<double>(spec.action_dim, 0.0)
                  : clamp_unit_vec(base->act(obs));
    EpisodeSummary summary;
    int t = 0;
    while (true) {
      std::vector<double> action(spec.action_dim);
      for (std::size_t i = 0; i < action.size(); ++i) {
        const double eps = noise_rng.uniform(-cfg.rl_warmup_noise, cfg.rl_warmup_noise);
        action[i] = std::clamp(base_t[i] + eps, -1.0, 1.0);
      }
      auto [next_state, result] = env_step(spec, state, action);
      std::vector<double> base_next =
          zero_base ? std::vector<double>(spec.action_dim, 0.0)
                    : clamp_unit_vec(base->act(result.observation));

      Transition tr;
      tr.obs = obs;
      tr.base_action = base_t;
      tr.full_action = std::move(action);
      tr.next_obs = result.observation;
      tr.next_base_action = base_next;
      tr.reward = result.reward;
      tr.done = result.done;
      tr.step_index = t;
      store.online().push(std::move(tr));
      ++collected;
      ++t;
      summary.episode_return += result.reward;

      state = std::move(next_state);
      obs = result.observation;
      base_t = std::move(base_next);

      if (result.done) {
        summary.success = result.success;
        summary.completed = true;
        break;
      }
      if (collected >= cfg.rl_warmup_steps) {
        summary.completed = false;  // episode cut; its tail heads stay dead
        break;
      }
    }
    summary.length = t;
    summary.env_steps_at_end = collected;
    if (summary.completed) episodes.push_back(summary);
  }
  return episodes;
}

namespace {

struct CheckpointSink {
  std::filesystem::path dir;  // empty: disabled

  void write(const std::string& tag, const UpdateEngine& engine,
             const TrainConfig& cfg, long env_steps, long episodes) const {
    if (dir.empty()) return;
    namespace fs = std::filesystem;
    const fs::path ckpt = dir / "checkpoints" / tag;
    fs::create_directories(ckpt);
    const ResidualActor& actor = engine.actor();
    save_params_file(ckpt / "actor.rft", actor.params, actor.spec);
    save_params_file(ckpt / "actor_target.rft", actor.target, actor.spec);
    if (tag == "final" || tag == "diverged") {
      const CriticEnsemble& critics = engine.critics();
      for (int i = 0; i < critics.size(); ++i) {
        const auto idx = static_cast<std::size_t>(i);
        save_params_file(ckpt / ("critic_" + std::to_string(i) + ".rft"),
                         critics.members[idx], critics.spec);
        save_params_file(ckpt / ("critic_target_" + std::to_string(i) + ".rft"),
                         critics.targets[idx], critics.spec);
      }
    }
    std::string manifest = "{\n  \"env_steps\": " + std::to_string(env_steps) +
                           ",\n  \"episodes\": " + std::to_string(episodes) +
                           ",\n  \"critic_updates\": " +
                           std::to_string(engine.critic_updates()) +
                           ",\n  \"config\": " + "\"see resolved.cfg\"" + "\n}\n";
    atomic_write_file(ckpt / "state.json", manifest);
  }
};

}  // namespace

TrainResult train_resfit(const EnvSpec& spec, ChunkedBasePolicy* base_policy,
                         ReplayStore& store, const TrainConfig& cfg,
                         const std::filesystem::path& out_dir) {
  const bool zero_base = cfg.residual_mode == "full_action";
  if (!zero_base && base_policy == nullptr) {
    throw ValidationError("train_resfit: base policy required in residual mode");
  }

  TrainResult result;
  result.base_hash_before = base_policy ? base_policy->hash() : 0;

  UpdateEngine engine(cfg, make_actor(spec, cfg), make_critics(spec, cfg), cfg.rl_seed);
  Rng explore_rng(derive_seed(cfg.rl_seed, "explore"));
  const std::vector<std::uint64_t> eval_seeds =
      eval_scene_seeds(derive_seed(cfg.rl_seed, "eval"), cfg.rl_eval_seeds);

  MetricsWriter metrics;
  std::ofstream eval_csv;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    metrics = MetricsWriter(out_dir / "metrics.csv");
    eval_csv.open(out_dir / "eval.csv", std::ios::binary | std::ios::trunc);
    eval_csv << "env_steps,success_rate\n";
  }
  CheckpointSink checkpoints{out_dir};

  const auto t0 = std::chrono::steady_clock::now();
  const auto wallclock = [&]() {
    if (cfg.metrics_wallclock_mode == "zero") return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  long env_steps = 0;
  long episodes = 0;

  const auto emit_row = [&](const EpisodeSummary& ep) {
    ++episodes;
    const UpdateEngine::IntervalStats s = engine.take_interval_stats();
    metrics.write_row(env_steps, episodes, ep.episode_return, ep.length, ep.success,
                      s.mean_msbe, s.mean_q, s.actor_loss, wallclock());
  };

  // Warmup: uniform-noise residuals, no updates.
  const std::vector<EpisodeSummary> warmup_eps =
      warmup_phase(spec, base_policy, store, cfg);
  env_steps = cfg.rl_warmup_steps;
  result.warmup_steps = cfg.rl_warmup_steps;
  for (const EpisodeSummary& ep : warmup_eps) {
    env_steps = ep.env_steps_at_end;
    emit_row(ep);
  }
  env_steps = cfg.rl_warmup_steps;

  const auto run_eval = [&]() {
    ResidualRolloutPolicy policy(zero_base ? nullptr : base_policy,
                                 &engine.actor());
    const double rate = success_rate(spec, policy, eval_seeds);
    result.eval_history.push_back({env_steps, rate});
    if (eval_csv.is_open()) {
      eval_csv << env_steps << ',' << format_double(rate) << "\n";
      eval_csv.flush();
    }
    return rate;
  };

  double utd_acc = 0.0;
  std::uint64_t episode_index = 0;
  bool stop = false;

  try {
    while (!stop && env_steps < cfg.rl_total_env_steps) {
      const std::uint64_t scene_seed =
          derive_seed(cfg.rl_seed, "scene", episode_index++);
      auto [state, obs] = env_reset(spec, scene_seed);
      if (base_policy) base_policy->begin_episode();
      std::vector<double> base_t =
          zero_base ? std::vector<double>(spec.action_dim, 0.0)
                    : clamp_unit_vec(base_policy->act(obs));
      EpisodeSummary summary;
      int t = 0;

      while (true) {
        std::vector<double> res = engine.actor().residual(obs, base_t);
        const double alpha = engine.actor().residual_scale;
        if (cfg.rl_explore_sigma > 0.0) {
          for (double& r : res) {
            r = std::clamp(r + explore_rng.normal(0.0, cfg.rl_explore_sigma), -alpha,
                           alpha);
          }
        }
        std::vector<double> action(spec.action_dim);
        for (std::size_t i = 0; i < action.size(); ++i) {
          action[i] = std::clamp(base_t[i] + res[i], -1.0, 1.0);
        }

        auto [next_state, step_result] = env_step(spec, state, action);
        std::vector<double> base_next =
            zero_base ? std::vector<double>(spec.action_dim, 0.0)
                      : clamp_unit_vec(base_policy->act(step_result.observation));

        Transition tr;
        tr.obs = obs;
        tr.base_action = base_t;
        tr.full_action = std::move(action);
        tr.next_obs = step_result.observation;
        tr.next_base_action = base_next;
        tr.reward = step_result.reward;
        tr.done = step_result.done;
        tr.step_index = t;
        store.online().push(std::move(tr));
        ++env_steps;
        ++t;
        summary.episode_return += step_result.reward;

        utd_acc += cfg.rl_utd;
        while (utd_acc >= 1.0) {
          if (!engine.try_update_cycle(store)) break;
          utd_acc -= 1.0;
        }

        state = std::move(next_state);
        obs = step_result.observation;
        base_t = std::move(base_next);

        if (step_result.done) {
          summary.success = step_result.success;
          break;
        }
        if (env_steps >= cfg.rl_total_env_steps) {
          summary.completed = false;  // final episode truncated by the step budget
          break;
        }
      }
      summary.length = t;
      summary.env_steps_at_end = env_steps;
      emit_row(summary);

      if (cfg.rl_checkpoint_every_episodes > 0 &&
          episodes % cfg.rl_checkpoint_every_episodes == 0) {
        char tag[32];
        std::snprintf(tag, sizeof(tag), "ep%08ld", episodes);
        checkpoints.write(tag, engine, cfg, env_steps, episodes);
      }
      if (cfg.rl_eval_every_episodes > 0 &&
          episodes % cfg.rl_eval_every_episodes == 0) {
        const double rate = run_eval();
        if (cfg.rl_stop_at_success > 0.0 && rate >= cfg.rl_stop_at_success) {
          result.stopped_early = true;
          stop = true;
        }
      }
    }
  } catch (const DivergedError&) {
    checkpoints.write("diverged", engine, cfg, env_steps, episodes);
    throw;
  }

  if (cfg.rl_eval_every_episodes > 0 &&
      (result.eval_history.empty() || result.eval_history.back().env_steps != env_steps)) {
    run_eval();
  }
  checkpoints.write("final", engine, cfg, env_steps, episodes);
  if (!out_dir.empty()) {
    save_params_file(out_dir / "actor.rft", engine.actor().params, engine.actor().spec);
    metrics.flush();
  }

  result.actor = engine.actor();
  result.critics = engine.critics();
  result.env_steps = env_steps;
  result.episodes = episodes;
  result.critic_updates = engine.critic_updates();
  result.actor_updates = engine.actor_updates();
  result.max_abs_q = engine.max_abs_q();
  result.base_hash_after = base_policy ? base_policy->hash() : 0;
  return result;
}

}  // namespace resfit
