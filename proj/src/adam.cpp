// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#include "resfit/adam.hpp"

#include <cmath>
#include <string>

#include "resfit/errors.hpp"

namespace resfit {

AdamState AdamState::create(const MlpSpec& spec, double learning_rate) {
  AdamState s;
  s.m = MlpParams::zeros(spec);
  s.v = MlpParams::zeros(spec);
  s.learning_rate = learning_rate;
  return s;
}

void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state) {
  if (!params.same_shape(grads) || !params.same_shape(state.m)) {
    throw DimensionError("adam_step: shape mismatch between params, grads and state");
  }
  grads.for_each_array([&](std::size_t layer, const char* name,
                           const std::vector<double>& g) {
    for (double v : g) {
      if (!std::isfinite(v)) {
        throw DivergedError("adam_step: non-finite gradient in layer " +
                                std::to_string(layer) + " (" + name + ")",
                            static_cast<int>(layer));
      }
    }
  });

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);

  // Walk the three shape-identical structures in lockstep.
  std::vector<std::vector<double>*> ps, ms, vs;
  std::vector<const std::vector<double>*> gs;
  params.for_each_array([&](std::size_t, const char*, std::vector<double>& a) {
    ps.push_back(&a);
  });
  state.m.for_each_array([&](std::size_t, const char*, std::vector<double>& a) {
    ms.push_back(&a);
  });
  state.v.for_each_array([&](std::size_t, const char*, std::vector<double>& a) {
    vs.push_back(&a);
  });
  grads.for_each_array([&](std::size_t, const char*, const std::vector<double>& a) {
    gs.push_back(&a);
  });

  for (std::size_t k = 0; k < ps.size(); ++k) {
    std::vector<double>& p = *ps[k];
    std::vector<double>& m = *ms[k];
    std::vector<double>& v = *vs[k];
    const std::vector<double>& g = *gs[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

void polyak_update(MlpParams& target, const MlpParams& online, double rho) {
  if (rho < 0.0 || rho > 1.0) {
    throw ValidationError("polyak_update: rho must lie in [0, 1]");
  }
  if (!target.same_shape(online)) {
    throw DimensionError("polyak_update: shape mismatch");
  }
  std::vector<const std::vector<double>*> src;
  online.for_each_array([&](std::size_t, const char*, const std::vector<double>& a) {
    src.push_back(&a);
  });
  std::size_t k = 0;
  target.for_each_array([&](std::size_t, const char*, std::vector<double>& a) {
    const std::vector<double>& o = *src[k++];
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = rho * a[i] + (1.0 - rho) * o[i];
    }
  });
}

}  // namespace resfit
