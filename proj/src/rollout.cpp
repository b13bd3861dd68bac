// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#include "resfit/rollout.hpp"

namespace resfit {

std::string to_string(EpisodeLabel label) {
  switch (label) {
    case EpisodeLabel::success: return "success";
    case EpisodeLabel::failure: return "failure";
    case EpisodeLabel::timeout: return "timeout";
  }
  return "failure";
}

EpisodeTrace run_episode(const EnvSpec& spec, RolloutPolicy& policy,
                         std::uint64_t scene_seed) {
  EpisodeTrace trace;
  trace.outcome.seed = scene_seed;
  policy.begin_episode();
  auto [state, obs] = env_reset(spec, scene_seed);
  trace.obs.push_back(obs);

  bool success = false;
  while (true) {
    const std::vector<double> action = policy.act(trace.obs.back());
    auto [next_state, result] = env_step(spec, state, action);
    trace.actions.push_back(action);
    trace.obs.push_back(result.observation);
    trace.rewards.push_back(result.reward);
    trace.outcome.episode_return += result.reward;
    state = std::move(next_state);
    if (result.done) {
      success = result.success;
      break;
    }
  }
  trace.outcome.length = static_cast<int>(trace.actions.size());
  if (success) {
    trace.outcome.label = EpisodeLabel::success;
  } else if (trace.outcome.length >= spec.horizon) {
    trace.outcome.label = EpisodeLabel::timeout;
  } else {
    trace.outcome.label = EpisodeLabel::failure;
  }
  return trace;
}

double success_rate(const EnvSpec& spec, RolloutPolicy& policy,
                    std::span<const std::uint64_t> scene_seeds) {
  if (scene_seeds.empty()) return 0.0;
  int wins = 0;
  for (std::uint64_t seed : scene_seeds) {
    if (run_episode(spec, policy, seed).outcome.succeeded()) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(scene_seeds.size());
}

std::vector<std::uint64_t> eval_scene_seeds(std::uint64_t root, int count) {
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    seeds[static_cast<std::size_t>(i)] =
        derive_seed(root, "eval-scene", static_cast<std::uint64_t>(i));
  }
  return seeds;
}

}  // namespace resfit
