// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#include "resfit/mlp.hpp"

#include <cmath>
#include <cstring>

#include "resfit/errors.hpp"

namespace resfit {

MlpSpec MlpSpec::dense(std::size_t input_dim, std::vector<std::size_t> hidden_dims,
                       std::size_t output_dim, Activation hidden_act,
                       OutputActivation output_act, bool layernorm_all) {
  MlpSpec spec;
  spec.input_dim = input_dim;
  spec.hidden_dims = std::move(hidden_dims);
  spec.output_dim = output_dim;
  spec.hidden_activation = hidden_act;
  spec.output_activation = output_act;
  spec.layernorm.assign(spec.hidden_dims.size(), layernorm_all ? 1 : 0);
  spec.validate();
  return spec;
}

std::size_t MlpSpec::layer_input_dim(std::size_t layer) const {
  return layer == 0 ? input_dim : hidden_dims[layer - 1];
}

std::size_t MlpSpec::layer_output_dim(std::size_t layer) const {
  return layer == hidden_dims.size() ? output_dim : hidden_dims[layer];
}

bool MlpSpec::layer_has_layernorm(std::size_t layer) const {
  return layer < hidden_dims.size() && layernorm[layer] != 0;
}

std::size_t MlpSpec::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    n += layer_output_dim(l) * layer_input_dim(l) + layer_output_dim(l);
    if (layer_has_layernorm(l)) n += 2 * layer_output_dim(l);
  }
  return n;
}

void MlpSpec::validate() const {
  if (input_dim < 1 || output_dim < 1) {
    throw DimensionError("MlpSpec: input and output dims must be >= 1");
  }
  for (std::size_t h : hidden_dims) {
    if (h < 1) throw DimensionError("MlpSpec: hidden dims must be >= 1");
  }
  if (layernorm.size() != hidden_dims.size()) {
    throw DimensionError("MlpSpec: layernorm flags must match hidden layer count");
  }
}

MlpParams MlpParams::zeros(const MlpSpec& spec) {
  spec.validate();
  MlpParams p;
  const std::size_t layers = spec.num_layers();
  p.weights.reserve(layers);
  p.biases.reserve(layers);
  p.ln_gains.resize(spec.hidden_dims.size());
  p.ln_offsets.resize(spec.hidden_dims.size());
  for (std::size_t l = 0; l < layers; ++l) {
    p.weights.emplace_back(spec.layer_output_dim(l), spec.layer_input_dim(l));
    p.biases.emplace_back(spec.layer_output_dim(l), 0.0);
    if (spec.layer_has_layernorm(l)) {
      p.ln_gains[l].assign(spec.layer_output_dim(l), 0.0);
      p.ln_offsets[l].assign(spec.layer_output_dim(l), 0.0);
    }
  }
  return p;
}

MlpParams MlpParams::init(const MlpSpec& spec, Rng& rng, bool zero_final_layer) {
  MlpParams p = zeros(spec);
  const std::size_t layers = spec.num_layers();
  for (std::size_t l = 0; l < layers; ++l) {
    const bool zero_this = zero_final_layer && l == layers - 1;
    const double bound = 1.0 / std::sqrt(static_cast<double>(spec.layer_input_dim(l)));
    if (!zero_this) {
      for (double& w : p.weights[l].values()) w = rng.uniform(-bound, bound);
      for (double& b : p.biases[l]) b = rng.uniform(-bound, bound);
    }
    if (spec.layer_has_layernorm(l)) {
      p.ln_gains[l].assign(p.ln_gains[l].size(), 1.0);
      // offsets stay zero
    }
  }
  return p;
}

bool MlpParams::same_shape(const MlpParams& o) const {
  if (weights.size() != o.weights.size() || biases.size() != o.biases.size() ||
      ln_gains.size() != o.ln_gains.size() || ln_offsets.size() != o.ln_offsets.size()) {
    return false;
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (!weights[l].same_shape(o.weights[l]) || biases[l].size() != o.biases[l].size()) {
      return false;
    }
  }
  for (std::size_t l = 0; l < ln_gains.size(); ++l) {
    if (ln_gains[l].size() != o.ln_gains[l].size() ||
        ln_offsets[l].size() != o.ln_offsets[l].size()) {
      return false;
    }
  }
  return true;
}

bool MlpParams::all_finite() const {
  bool ok = true;
  for_each_array([&](std::size_t, const char*, const std::vector<double>& a) {
    for (double v : a) {
      if (!std::isfinite(v)) ok = false;
    }
  });
  return ok;
}

void MlpParams::for_each_array(
    const std::function<void(std::size_t, const char*, std::vector<double>&)>& fn) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    fn(l, "weight", weights[l].values());
    fn(l, "bias", biases[l]);
    if (l < ln_gains.size() && !ln_gains[l].empty()) {
      fn(l, "ln_gain", ln_gains[l]);
      fn(l, "ln_offset", ln_offsets[l]);
    }
  }
}

void MlpParams::for_each_array(
    const std::function<void(std::size_t, const char*, const std::vector<double>&)>& fn)
    const {
  const_cast<MlpParams*>(this)->for_each_array(
      [&](std::size_t l, const char* name, std::vector<double>& a) {
        fn(l, name, a);
      });
}

std::uint64_t params_hash(const MlpParams& params) {
  std::uint64_t h = 14695981039346656037ull;
  params.for_each_array([&](std::size_t l, const char* name,
                            const std::vector<double>& a) {
    h = fnv1a64(&l, sizeof(l), h);
    h = fnv1a64(name, std::strlen(name), h);
    const std::size_t n = a.size();
    h = fnv1a64(&n, sizeof(n), h);
    h = fnv1a64(a.data(), a.size() * sizeof(double), h);
  });
  return h;
}

void layer_norm(std::span<const double> x, std::span<const double> gain,
                std::span<const double> offset, std::span<double> out, double epsilon) {
  const std::size_t n = x.size();
  if (gain.size() != n || offset.size() != n || out.size() != n) {
    throw DimensionError("layer_norm: size mismatch");
  }
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  const double inv_std = 1.0 / std::sqrt(var + epsilon);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = (x[i] - mean) * inv_std * gain[i] + offset[i];
  }
}

namespace {

void check_forward_shapes(const MlpParams& params, const MlpSpec& spec,
                          const Matrix& input) {
  spec.validate();
  if (input.cols() != spec.input_dim) {
    throw DimensionError("mlp_forward: input has " + std::to_string(input.cols()) +
                         " columns, spec expects " + std::to_string(spec.input_dim));
  }
  if (params.weights.size() != spec.num_layers()) {
    throw DimensionError("mlp_forward: params do not match spec layer count");
  }
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    if (params.weights[l].rows() != spec.layer_output_dim(l) ||
        params.weights[l].cols() != spec.layer_input_dim(l) ||
        params.biases[l].size() != spec.layer_output_dim(l)) {
      throw DimensionError("mlp_forward: layer " + std::to_string(l) +
                           " shape mismatch");
    }
    if (spec.layer_has_layernorm(l) &&
        (params.ln_gains[l].size() != spec.layer_output_dim(l) ||
         params.ln_offsets[l].size() != spec.layer_output_dim(l))) {
      throw DimensionError("mlp_forward: layernorm params mismatch at layer " +
                           std::to_string(l));
    }
  }
}

// In-place layernorm over each row of z; writes x-hat and 1/std when caching.
void apply_layernorm_rows(Matrix& z, const std::vector<double>& gain,
                          const std::vector<double>& offset, Matrix* normalized,
                          std::vector<double>* inv_std_out) {
  const std::size_t n = z.cols();
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const double inv_std = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    if (inv_std_out) (*inv_std_out)[r] = inv_std;
    for (std::size_t i = 0; i < n; ++i) {
      const double xhat = (row[i] - mean) * inv_std;
      if (normalized) (*normalized)(r, i) = xhat;
      row[i] = xhat * gain[i] + offset[i];
    }
  }
}

void apply_hidden_activation(Matrix& z, Activation act) {
  if (act == Activation::relu) {
    for (double& v : z.values()) v = v > 0.0 ? v : 0.0;
  } else {
    for (double& v : z.values()) v = std::tanh(v);
  }
}

}  // namespace

Matrix mlp_forward(const MlpParams& params, const MlpSpec& spec, const Matrix& input,
                   MlpForwardCache* cache) {
  check_forward_shapes(params, spec, input);
  const std::size_t hidden = spec.hidden_dims.size();
  if (cache) {
    cache->input = input;
    cache->normalized.assign(hidden, Matrix());
    cache->inv_std.assign(hidden, {});
    cache->activations.assign(hidden, Matrix());
  }

  Matrix current = input;
  for (std::size_t l = 0; l < hidden; ++l) {
    Matrix z;
    linear_forward(current, params.weights[l], params.biases[l], z);
    if (spec.layer_has_layernorm(l)) {
      Matrix* norm = nullptr;
      std::vector<double>* inv_std = nullptr;
      if (cache) {
        cache->normalized[l] = Matrix(z.rows(), z.cols());
        cache->inv_std[l].assign(z.rows(), 0.0);
        norm = &cache->normalized[l];
        inv_std = &cache->inv_std[l];
      }
      apply_layernorm_rows(z, params.ln_gains[l], params.ln_offsets[l], norm, inv_std);
    }
    apply_hidden_activation(z, spec.hidden_activation);
    if (cache) cache->activations[l] = z;
    current = std::move(z);
  }

  Matrix out;
  linear_forward(current, params.weights[hidden], params.biases[hidden], out);
  if (spec.output_activation == OutputActivation::tanh) {
    for (double& v : out.values()) v = std::tanh(v);
  }
  if (cache) cache->output = out;
  return out;
}

std::vector<double> mlp_forward(const MlpParams& params, const MlpSpec& spec,
                                std::span<const double> input) {
  Matrix x(1, input.size());
  std::copy(input.begin(), input.end(), x.values().begin());
  Matrix y = mlp_forward(params, spec, x);
  return y.values();
}

void mlp_backward(const MlpParams& params, const MlpSpec& spec,
                  const MlpForwardCache& cache, const Matrix& output_grad,
                  MlpParams* param_grads, Matrix* input_grad) {
  const std::size_t hidden = spec.hidden_dims.size();
  if (output_grad.rows() != cache.output.rows() ||
      output_grad.cols() != cache.output.cols()) {
    throw DimensionError("mlp_backward: output_grad shape mismatch");
  }
  if (param_grads && !param_grads->same_shape(params)) {
    throw DimensionError("mlp_backward: param_grads shape mismatch");
  }

  // Gradient w.r.t. the output layer's pre-activation.
  Matrix dz = output_grad;
  if (spec.output_activation == OutputActivation::tanh) {
    const Matrix& y = cache.output;
    for (std::size_t i = 0; i < dz.values().size(); ++i) {
      const double t = y.values()[i];
      dz.values()[i] *= 1.0 - t * t;
    }
  }

  for (std::size_t l = spec.num_layers(); l-- > 0;) {
    const Matrix& layer_input = l == 0 ? cache.input : cache.activations[l - 1];
    if (param_grads) {
      linear_backward_params(dz, layer_input, param_grads->weights[l],
                             param_grads->biases[l]);
    }
    const bool need_input = l > 0 || input_grad != nullptr;
    if (!need_input) break;

    Matrix da;
    linear_backward_input(dz, params.weights[l], da);
    if (l == 0) {
      *input_grad = std::move(da);
      break;
    }

    // Through the previous hidden layer's activation.
    const std::size_t pl = l - 1;
    const Matrix& act = cache.activations[pl];
    if (spec.hidden_activation == Activation::relu) {
      for (std::size_t i = 0; i < da.values().size(); ++i) {
        if (act.values()[i] <= 0.0) da.values()[i] = 0.0;
      }
    } else {
      for (std::size_t i = 0; i < da.values().size(); ++i) {
        const double t = act.values()[i];
        da.values()[i] *= 1.0 - t * t;
      }
    }

    if (spec.layer_has_layernorm(pl)) {
      // da currently holds the gradient w.r.t. gain*xhat+offset.
      const Matrix& xhat = cache.normalized[pl];
      const std::vector<double>& inv_std = cache.inv_std[pl];
      const std::vector<double>& gain = params.ln_gains[pl];
      const std::size_t n = da.cols();
      Matrix dzp(da.rows(), n);
      for (std::size_t r = 0; r < da.rows(); ++r) {
        double mean_dxhat = 0.0;
        double mean_dxhat_xhat = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double dy = da(r, i);
          const double xh = xhat(r, i);
          if (param_grads) {
            (*param_grads).ln_gains[pl][i] += dy * xh;
            (*param_grads).ln_offsets[pl][i] += dy;
          }
          const double dxh = dy * gain[i];
          mean_dxhat += dxh;
          mean_dxhat_xhat += dxh * xh;
        }
        mean_dxhat /= static_cast<double>(n);
        mean_dxhat_xhat /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
          const double dxh = da(r, i) * gain[i];
          dzp(r, i) = inv_std[r] * (dxh - mean_dxhat - xhat(r, i) * mean_dxhat_xhat);
        }
      }
      dz = std::move(dzp);
    } else {
      dz = std::move(da);
    }
  }
}

}  // namespace resfit
