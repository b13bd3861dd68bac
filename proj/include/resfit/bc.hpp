// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "resfit/demos.hpp"
#include "resfit/mlp.hpp"
#include "resfit/rollout.hpp"

namespace resfit {

/// Frozen behavior-cloned policy that emits k-step action chunks. A chunk is
/// produced by one forward pass and consumed open-loop; the cursor tracks how
/// much of the cached chunk has been executed.
class ChunkedBasePolicy : public RolloutPolicy {
 public:
  ChunkedBasePolicy(MlpSpec spec, MlpParams params, int chunk_size,
                    std::size_t action_dim, bool requery_every_step = false);

  void begin_episode() override;
  std::vector<double> act(std::span<const double> obs) override;

  const MlpSpec& spec() const { return spec_; }
  const MlpParams& params() const { return params_; }
  int chunk_size() const { return chunk_size_; }
  std::size_t action_dim() const { return action_dim_; }
  bool requery_every_step() const { return requery_; }

  /// Forward passes since construction; chunk scheduling is observable here.
  std::int64_t forward_count() const { return forward_count_; }

  /// Content hash of the frozen parameters, for freeze checks.
  std::uint64_t hash() const { return params_hash(params_); }

 private:
  MlpSpec spec_;
  MlpParams params_;
  int chunk_size_;
  std::size_t action_dim_;
  bool requery_;
  int cursor_;  // in [0, chunk_size]; chunk_size means exhausted
  std::vector<std::vector<double>> cached_chunk_;
  std::int64_t forward_count_ = 0;
};

struct BcResult {
  std::shared_ptr<ChunkedBasePolicy> policy;
  double final_mse = 0.0;
};

struct BcOptions {
  int chunk_size = 8;
  int epochs = 200;
  double learning_rate = 1e-3;
  int batch_size = 64;
  std::vector<std::size_t> hidden_dims = {64, 64};
  bool use_layernorm = false;
  std::uint64_t seed = 2;
  bool requery_every_step = false;
};

/// Chunked behavior cloning: fits the k-step action chunks of successful
/// demonstrations with a squared-error loss (fixed-variance Gaussian head).
/// Chunks at an episode's tail are padded by repeating the final action.
BcResult train_bc(const std::vector<DemoTrajectory>& demos, const EnvSpec& spec,
                  const BcOptions& options);

/// Training targets for one demo step: actions t..t+k-1, repeat-last padded.
std::vector<double> chunk_targets(const DemoTrajectory& demo, std::size_t t,
                                  int chunk_size);

struct FilteredBcOptions {
  int rounds = 5;
  int rollouts_per_round = 50;
  int epochs_per_round = 30;
  double learning_rate = 1e-3;
  int batch_size = 64;
  int eval_seeds = 100;
  std::uint64_t seed = 4;
};

struct FilteredBcResult {
  std::shared_ptr<ChunkedBasePolicy> policy;
  std::vector<double> success_history;  // initial eval plus one entry per round
  std::vector<std::size_t> dataset_sizes;
};

/// Filtered BC baseline: roll out the policy, append successful trajectories
/// to the dataset, continue BC training. Rounds with zero successes are
/// skipped with a warning and training continues.
FilteredBcResult filtered_bc(const ChunkedBasePolicy& policy, const EnvSpec& spec,
                             std::vector<DemoTrajectory> dataset,
                             const FilteredBcOptions& options);

}  // namespace resfit
