// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#include "oracles.hpp"

#include <algorithm>
#include <cmath>

namespace resfit::testing {

std::vector<double> scalar_mlp_forward(const MlpParams& params, const MlpSpec& spec,
                                       std::span<const double> input) {
  std::vector<double> current(input.begin(), input.end());
  for (std::size_t layer = 0; layer < spec.num_layers(); ++layer) {
    const std::size_t out_dim = spec.layer_output_dim(layer);
    const std::size_t in_dim = spec.layer_input_dim(layer);
    std::vector<double> z(out_dim, 0.0);
    for (std::size_t o = 0; o < out_dim; ++o) {
      double acc = params.biases[layer][o];
      for (std::size_t i = 0; i < in_dim; ++i) {
        acc += params.weights[layer](o, i) * current[i];
      }
      z[o] = acc;
    }
    const bool is_output = layer == spec.num_layers() - 1;
    if (!is_output && spec.layer_has_layernorm(layer)) {
      double mean = 0.0;
      for (double v : z) mean += v;
      mean /= static_cast<double>(out_dim);
      double var = 0.0;
      for (double v : z) var += (v - mean) * (v - mean);
      var /= static_cast<double>(out_dim);
      const double inv_std = 1.0 / std::sqrt(var + kLayerNormEpsilon);
      for (std::size_t o = 0; o < out_dim; ++o) {
        z[o] = (z[o] - mean) * inv_std * params.ln_gains[layer][o] +
               params.ln_offsets[layer][o];
      }
    }
    if (!is_output) {
      for (double& v : z) {
        v = spec.hidden_activation == Activation::relu ? (v > 0.0 ? v : 0.0)
                                                       : std::tanh(v);
      }
    } else if (spec.output_activation == OutputActivation::tanh) {
      for (double& v : z) v = std::tanh(v);
    }
    current = std::move(z);
  }
  return current;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1e-3, std::abs(a), std::abs(b)});
}

MlpParams fd_param_gradient(const MlpParams& params,
                            const std::function<double(const MlpParams&)>& f,
                            double h) {
  MlpParams work = params;
  MlpParams grad = params;  // same shape; values overwritten

  std::vector<std::vector<double>*> work_arrays;
  work.for_each_array([&](std::size_t, const char*, std::vector<double>& a) {
    work_arrays.push_back(&a);
  });
  std::vector<std::vector<double>*> grad_arrays;
  grad.for_each_array([&](std::size_t, const char*, std::vector<double>& a) {
    grad_arrays.push_back(&a);
  });

  for (std::size_t k = 0; k < work_arrays.size(); ++k) {
    std::vector<double>& arr = *work_arrays[k];
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const double orig = arr[i];
      arr[i] = orig + h;
      const double fp = f(work);
      arr[i] = orig - h;
      const double fm = f(work);
      arr[i] = orig;
      (*grad_arrays[k])[i] = (fp - fm) / (2.0 * h);
    }
  }
  return grad;
}

std::vector<double> fd_vector_gradient(
    const std::vector<double>& x,
    const std::function<double(const std::vector<double>&)>& f, double h) {
  std::vector<double> work = x;
  std::vector<double> grad(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = work[i];
    work[i] = orig + h;
    const double fp = f(work);
    work[i] = orig - h;
    const double fm = f(work);
    work[i] = orig;
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

double max_param_rel_err(const MlpParams& analytic, const MlpParams& fd) {
  std::vector<const std::vector<double>*> a_arrays, f_arrays;
  analytic.for_each_array([&](std::size_t, const char*, const std::vector<double>& a) {
    a_arrays.push_back(&a);
  });
  fd.for_each_array([&](std::size_t, const char*, const std::vector<double>& a) {
    f_arrays.push_back(&a);
  });
  double worst = 0.0;
  for (std::size_t k = 0; k < a_arrays.size(); ++k) {
    for (std::size_t i = 0; i < a_arrays[k]->size(); ++i) {
      worst = std::max(worst, rel_err((*a_arrays[k])[i], (*f_arrays[k])[i]));
    }
  }
  return worst;
}

MlpSpec random_spec(Rng& rng, std::size_t max_dim) {
  const auto dim = [&]() { return 1 + rng.below(max_dim); };
  MlpSpec spec;
  spec.input_dim = dim();
  const std::size_t layers = 1 + rng.below(3);
  for (std::size_t i = 0; i < layers; ++i) spec.hidden_dims.push_back(1 + dim());
  spec.output_dim = dim();
  spec.hidden_activation = rng.below(2) ? Activation::tanh : Activation::relu;
  spec.output_activation = rng.below(2) ? OutputActivation::tanh
                                        : OutputActivation::linear;
  spec.layernorm.resize(spec.hidden_dims.size());
  for (auto& f : spec.layernorm) f = rng.below(2) ? 1 : 0;
  return spec;
}

MlpParams random_params(const MlpSpec& spec, Rng& rng, double scale) {
  MlpParams p = MlpParams::zeros(spec);
  p.for_each_array([&](std::size_t, const char* name, std::vector<double>& a) {
    const bool is_gain = std::string_view(name) == "ln_gain";
    for (double& v : a) {
      v = is_gain ? 1.0 + 0.3 * rng.uniform(-1.0, 1.0)
                  : scale * rng.uniform(-1.0, 1.0);
    }
  });
  return p;
}

std::vector<double> random_vector(std::size_t n, Rng& rng, double lo, double hi) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

NStepOracle nstep_slice(std::span<const double> rewards, bool episode_terminated,
                        std::size_t t, int n, double gamma) {
  NStepOracle out;
  const std::size_t len = rewards.size();
  const std::size_t steps_to_end = len - t;
  const std::size_t m = std::min<std::size_t>(static_cast<std::size_t>(n), steps_to_end);
  out.terminal_within = episode_terminated && steps_to_end <= static_cast<std::size_t>(n);
  out.effective_n = static_cast<int>(m);
  double discount = 1.0;
  for (std::size_t i = 0; i < m; ++i) {
    out.rn += discount * rewards[t + i];
    discount *= gamma;
  }
  out.lookahead_index = t + m - 1;
  return out;
}

double chi_squared(std::span<const int> counts, double expected) {
  double stat = 0.0;
  for (int c : counts) {
    const double d = c - expected;
    stat += d * d / expected;
  }
  return stat;
}

}  // namespace resfit::testing
