// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#include "resfit/runtime.hpp"

#include <algorithm>
#include <cmath>

namespace resfit {

EpisodeRecord episode_lifecycle(const EnvSpec& spec, SplitStepPolicy& policy,
                                std::uint64_t scene_seed) {
  EpisodeRecord record;
  record.outcome.seed = scene_seed;
  policy.begin_episode();
  auto [state, obs] = env_reset(spec, scene_seed);
  std::vector<double> base_t = policy.base_action(obs);

  int t = 0;
  while (true) {
    std::vector<double> action = policy.full_action(obs, base_t);
    auto [next_state, result] = env_step(spec, state, action);
    std::vector<double> base_next = policy.base_action(result.observation);

    Transition tr;
    tr.obs = obs;
    tr.base_action = base_t;
    tr.full_action = std::move(action);
    tr.next_obs = result.observation;
    tr.next_base_action = base_next;
    tr.reward = result.reward;
    tr.done = result.done;
    tr.step_index = t;
    record.transitions.push_back(std::move(tr));

    record.outcome.episode_return += result.reward;
    ++t;
    state = std::move(next_state);
    obs = result.observation;
    base_t = std::move(base_next);
    if (result.done) {
      record.outcome.label =
          result.success ? EpisodeLabel::success
                         : (t >= spec.horizon ? EpisodeLabel::timeout
                                              : EpisodeLabel::failure);
      break;
    }
  }
  record.outcome.length = t;
  return record;
}

double exact_binomial_two_sided(int k, int n) {
  if (n <= 0) return 1.0;
  // pmf(i) of Binomial(n, 1/2), computed iteratively.
  std::vector<double> pmf(static_cast<std::size_t>(n) + 1);
  pmf[0] = std::pow(0.5, n);
  for (int i = 0; i < n; ++i) {
    pmf[static_cast<std::size_t>(i) + 1] =
        pmf[static_cast<std::size_t>(i)] * static_cast<double>(n - i) /
        static_cast<double>(i + 1);
  }
  double lower = 0.0, upper = 0.0;
  for (int i = 0; i <= n; ++i) {
    if (i <= k) lower += pmf[static_cast<std::size_t>(i)];
    if (i >= k) upper += pmf[static_cast<std::size_t>(i)];
  }
  return std::min(1.0, 2.0 * std::min(lower, upper));
}

AbResult evaluate_ab(RolloutPolicy& policy_first, RolloutPolicy& policy_second,
                     const EnvSpec& spec, int num_pairs, std::uint64_t seed) {
  AbResult result;
  int succ_first = 0, succ_second = 0;
  for (int i = 0; i < num_pairs; ++i) {
    AbPairRow row;
    row.pair_index = i;
    row.scene_seed = derive_seed(seed, "ab-scene", static_cast<std::uint64_t>(i));
    // Blind labeling: the label depends only on (seed, pair), not on the
    // argument order, so swapping policies preserves per-pair outcomes.
    row.label_of_first =
        (derive_seed(seed, "ab-label", static_cast<std::uint64_t>(i)) & 1) ? 'B' : 'A';
    row.outcome_first = run_episode(spec, policy_first, row.scene_seed).outcome;
    row.outcome_second = run_episode(spec, policy_second, row.scene_seed).outcome;

    const bool a = row.outcome_first.succeeded();
    const bool b = row.outcome_second.succeeded();
    if (a && b) ++result.both_succeed;
    if (!a && !b) ++result.neither_succeed;
    if (a && !b) ++result.wins_first;
    if (!a && b) ++result.wins_second;
    if (a) ++succ_first;
    if (b) ++succ_second;
    result.pairs.push_back(row);
  }
  if (num_pairs > 0) {
    result.success_first = static_cast<double>(succ_first) / num_pairs;
    result.success_second = static_cast<double>(succ_second) / num_pairs;
    result.difference = result.success_first - result.success_second;
  }
  result.p_value = exact_binomial_two_sided(result.wins_first, result.discordant());
  return result;
}

}  // namespace resfit
