// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <vector>

#include "resfit/adam.hpp"
#include "resfit/config.hpp"
#include "resfit/mlp.hpp"
#include "resfit/replay.hpp"

namespace resfit {

/// Residual policy: maps concat(observation, base action) to a bounded
/// per-step correction, tanh output scaled by residual_scale. The final layer
/// is zero-initialized so the initial correction is exactly zero.
struct ResidualActor {
  MlpSpec spec;
  MlpParams params;
  MlpParams target;
  double residual_scale = 0.2;
  std::size_t obs_dim = 0;
  std::size_t action_dim = 0;

  static ResidualActor create(std::size_t obs_dim, std::size_t action_dim,
                              const std::vector<std::size_t>& hidden_dims,
                              bool use_layernorm, double residual_scale, Rng& rng);

  /// Batched residuals for (obs, base) rows using the chosen parameter set.
  Matrix residuals(const Matrix& obs, const Matrix& base, const MlpParams& which) const;

  /// Single-sample residual with the online parameters.
  std::vector<double> residual(std::span<const double> obs,
                               std::span<const double> base) const;
};

/// Randomized ensemble of Q networks with target copies. TD targets take the
/// min over a random subset; actor updates use the full ensemble.
struct CriticEnsemble {
  MlpSpec spec;
  std::vector<MlpParams> members;
  std::vector<MlpParams> targets;
  int subset_size = 2;
  std::size_t obs_dim = 0;
  std::size_t action_dim = 0;

  static CriticEnsemble create(std::size_t obs_dim, std::size_t action_dim,
                               const std::vector<std::size_t>& hidden_dims,
                               bool use_layernorm, int ensemble_size, int subset_size,
                               Rng& rng);

  int size() const { return static_cast<int>(members.size()); }

  /// Batched Q values of one member (online or target parameter set).
  std::vector<double> q_values(const MlpParams& member, const Matrix& obs,
                               const Matrix& action) const;
};

struct CriticUpdateStats {
  double msbe = 0.0;      // mean over critics of the pre-update batch MSE
  double mean_q = 0.0;    // mean prediction over critics and batch
  double max_abs_q = 0.0; // largest |Q| seen in this update
};

struct ActorUpdateStats {
  double loss = 0.0;  // negative full-ensemble mean Q, pre-update
};

/// n-step REDQ targets: the target actor proposes the lookahead residual
/// (with clipped Gaussian smoothing noise), and a freshly drawn random subset
/// of target critics is min-reduced. Consumes `rng` in a documented order:
/// first the subset draw, then (if smoothing_sigma > 0) one normal draw per
/// sample per action dimension. No gradients flow through any of this.
std::vector<double> compute_td_targets(const std::vector<NStepSample>& batch,
                                       const ResidualActor& actor,
                                       const CriticEnsemble& critics,
                                       const TrainConfig& config, Rng& rng);

/// One Adam step per critic toward the shared targets. Returns pre-update
/// statistics. Throws DivergedError on a non-finite loss.
CriticUpdateStats critic_update(const std::vector<NStepSample>& batch,
                                const std::vector<double>& targets,
                                CriticEnsemble& critics,
                                std::vector<AdamState>& optimizers);

/// One Adam ascent step on the full-ensemble mean Q of (s, base + residual).
/// Critic parameters are read-only here; the gradient reaches the actor only
/// through the critics' action input.
ActorUpdateStats actor_update(const std::vector<NStepSample>& batch,
                              ResidualActor& actor, const CriticEnsemble& critics,
                              AdamState& optimizer);

namespace detail {

/// Partial Fisher-Yates draw of m distinct indices out of n.
std::vector<int> draw_subset(int n, int m, Rng& rng);

/// compute_td_targets with an explicit critic subset (noise still drawn from
/// `rng` when smoothing_sigma > 0).
std::vector<double> compute_td_targets_with_subset(
    const std::vector<NStepSample>& batch, const ResidualActor& actor,
    const CriticEnsemble& critics, const std::vector<int>& subset,
    const TrainConfig& config, Rng& rng);

/// Per-sample ensemble-mean Q values and their gradient w.r.t. the action.
using BatchedCritic = std::function<std::pair<std::vector<double>, Matrix>(
    const Matrix& obs, const Matrix& action)>;

ActorUpdateStats actor_update_with(const std::vector<NStepSample>& batch,
                                   ResidualActor& actor, AdamState& optimizer,
                                   const BatchedCritic& critic);

}  // namespace detail

}  // namespace resfit
