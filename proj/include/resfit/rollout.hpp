// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "resfit/env.hpp"

namespace resfit {

/// Per-episode control interface. Implementations may be stateful within an
/// episode (chunk cursors, exploration streams); begin_episode resets that.
class RolloutPolicy {
 public:
  virtual ~RolloutPolicy() = default;
  virtual void begin_episode() = 0;
  virtual std::vector<double> act(std::span<const double> obs) = 0;
};

enum class EpisodeLabel : std::uint8_t { success = 0, failure = 1, timeout = 2 };

std::string to_string(EpisodeLabel label);

struct EpisodeOutcome {
  EpisodeLabel label = EpisodeLabel::failure;
  int length = 0;
  double episode_return = 0.0;
  std::uint64_t seed = 0;

  bool succeeded() const { return label == EpisodeLabel::success; }
};

/// Everything one episode produced. `obs` includes the terminal observation,
/// so obs.size() == actions.size() + 1.
struct EpisodeTrace {
  EpisodeOutcome outcome;
  std::vector<std::vector<double>> obs;
  std::vector<std::vector<double>> actions;
  std::vector<double> rewards;
};

/// Runs one episode to success or horizon. Pure given the policy's behavior.
EpisodeTrace run_episode(const EnvSpec& spec, RolloutPolicy& policy,
                         std::uint64_t scene_seed);

/// Fraction of episodes that succeed over the given scene seeds.
double success_rate(const EnvSpec& spec, RolloutPolicy& policy,
                    std::span<const std::uint64_t> scene_seeds);

/// Scene seeds for evaluation: derive_seed(root, "eval-scene", i).
std::vector<std::uint64_t> eval_scene_seeds(std::uint64_t root, int count);

}  // namespace resfit
