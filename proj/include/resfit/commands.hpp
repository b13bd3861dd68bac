// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "resfit/bc.hpp"
#include "resfit/config.hpp"
#include "resfit/resfit.hpp"
#include "resfit/rollout.hpp"

namespace resfit {

/// Checkpoint plus sidecar loaded for evaluation. instantiate() builds an
/// independent rollout policy (own chunk cursor) per call.
struct LoadedPolicy {
  std::string type;  // "base" or "residual"
  std::string env_name;
  std::shared_ptr<ChunkedBasePolicy> base;
  std::optional<ResidualActor> actor;

  std::unique_ptr<RolloutPolicy> instantiate() const;
};

LoadedPolicy load_policy(const std::filesystem::path& checkpoint_path);

/// Wilson 95% score interval for a binomial proportion.
std::pair<double, double> wilson_interval(int successes, int total);

// Command implementations shared by the C API. Each writes its artifacts
// (plus resolved.cfg and run_manifest.json) under out_dir and returns a JSON
// summary string. Errors are thrown: ConfigError/Error for usage problems,
// CalibrationError and DivergedError for their dedicated exit codes.
std::string cmd_demos(const TrainConfig& config, const std::filesystem::path& out_dir);
std::string cmd_bc(const TrainConfig& config, const std::filesystem::path& out_dir);
std::string cmd_rl(const TrainConfig& config, const std::filesystem::path& out_dir);
std::string cmd_eval(const TrainConfig& config, const std::filesystem::path& ckpt_a,
                     const std::optional<std::filesystem::path>& ckpt_b,
                     const std::filesystem::path& out_dir);
std::string cmd_ablate(const TrainConfig& config, const std::string& grid_spec,
                       const std::filesystem::path& out_dir);

}  // namespace resfit
