// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "resfit/mlp.hpp"

namespace resfit {

/// Bias-corrected Adam state for one network's parameters.
struct AdamState {
  std::uint64_t step = 0;
  MlpParams m;  // first moments, same shapes as the parameters
  MlpParams v;  // second moments
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double learning_rate = 1e-3;

  static AdamState create(const MlpSpec& spec, double learning_rate);
};

/// One Adam update in place. Throws DivergedError naming the first offending
/// layer when a gradient entry is non-finite.
void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state);

/// target <- rho * target + (1 - rho) * online, elementwise.
void polyak_update(MlpParams& target, const MlpParams& online, double rho);

}  // namespace resfit
