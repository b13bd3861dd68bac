// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "resfit/replay.hpp"
#include "resfit/rollout.hpp"

namespace resfit {

/// Policy that exposes its base/full decomposition so episode transitions can
/// be assembled for replay.
class SplitStepPolicy {
 public:
  virtual ~SplitStepPolicy() = default;
  virtual void begin_episode() = 0;
  /// Base action for this observation; advances the base policy's schedule.
  virtual std::vector<double> base_action(std::span<const double> obs) = 0;
  /// Executed action given the observation and its base action.
  virtual std::vector<double> full_action(std::span<const double> obs,
                                          std::span<const double> base) = 0;
};

struct EpisodeRecord {
  EpisodeOutcome outcome;
  std::vector<Transition> transitions;
};

/// Runs one episode to success or horizon, labels the outcome and assembles
/// replay transitions (including the next-state base action each TD target
/// needs).
EpisodeRecord episode_lifecycle(const EnvSpec& spec, SplitStepPolicy& policy,
                                std::uint64_t scene_seed);

/// Two-sided exact binomial test of k successes out of n at p = 1/2.
double exact_binomial_two_sided(int k, int n);

struct AbPairRow {
  int pair_index = 0;
  std::uint64_t scene_seed = 0;
  char label_of_first = 'A';  // blind label assigned to the first policy
  EpisodeOutcome outcome_first;
  EpisodeOutcome outcome_second;
};

struct AbResult {
  std::vector<AbPairRow> pairs;
  int wins_first = 0;   // discordant pairs won by the first policy
  int wins_second = 0;
  int both_succeed = 0;
  int neither_succeed = 0;
  double success_first = 0.0;
  double success_second = 0.0;
  double difference = 0.0;  // success_first - success_second
  double p_value = 1.0;     // exact binomial on discordant pairs

  int discordant() const { return wins_first + wins_second; }
};

/// Paired A/B evaluation with matched initial conditions: each pair draws one
/// scene seed, both policies run from that identical initial state, and blind
/// labels are assigned at random (revealed in the rows). The reported
/// difference is tested with a two-sided exact binomial on discordant pairs.
AbResult evaluate_ab(RolloutPolicy& policy_first, RolloutPolicy& policy_second,
                     const EnvSpec& spec, int num_pairs, std::uint64_t seed);

}  // namespace resfit
