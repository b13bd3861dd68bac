// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "resfit/env.hpp"

namespace resfit {

/// One recorded trajectory. `obs` holds one more entry than `act` (the
/// terminal observation), so replay and transition stitching are exact.
struct DemoTrajectory {
  std::uint64_t seed = 0;
  std::vector<std::vector<double>> obs;
  std::vector<std::vector<double>> act;
  bool success = false;

  std::size_t length() const { return act.size(); }
};

struct DemoCollection {
  std::vector<DemoTrajectory> demos;
  int attempts = 0;   // expert rollouts drawn, including discarded failures
  int successes = 0;  // equals demos.size() on success

  double mean_length() const;
  double expert_success_rate() const {
    return attempts == 0 ? 0.0 : static_cast<double>(successes) / attempts;
  }
};

/// Rolls the scripted expert until `num_demos` successful trajectories are
/// collected; failures are discarded but counted. Throws CalibrationError when
/// 10 * num_demos attempts do not yield num_demos successes.
DemoCollection collect_demos(const EnvSpec& spec, double expert_noise_scale,
                             int num_demos, std::uint64_t seed);

/// JSON-lines demo file: one trajectory per line,
/// {"seed": int, "obs": [[...]], "act": [[...]], "success": true}.
void write_demo_file(const std::filesystem::path& path,
                     const std::vector<DemoTrajectory>& demos);
std::vector<DemoTrajectory> read_demo_file(const std::filesystem::path& path);

}  // namespace resfit
