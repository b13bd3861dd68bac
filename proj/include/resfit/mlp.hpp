// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "resfit/matrix.hpp"
#include "resfit/rng.hpp"

namespace resfit {

enum class Activation : std::uint8_t { relu = 0, tanh = 1 };
enum class OutputActivation : std::uint8_t { linear = 0, tanh = 1 };

constexpr double kLayerNormEpsilon = 1e-5;

/// Architecture of a fixed-topology dense network. The spec fully determines
/// the parameter count and the checkpoint layout.
struct MlpSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;
  std::size_t output_dim = 0;
  Activation hidden_activation = Activation::relu;
  OutputActivation output_activation = OutputActivation::linear;
  /// One flag per hidden layer; layer normalization is applied to the
  /// pre-activation values of flagged layers.
  std::vector<std::uint8_t> layernorm;

  static MlpSpec dense(std::size_t input_dim, std::vector<std::size_t> hidden_dims,
                       std::size_t output_dim, Activation hidden_act,
                       OutputActivation output_act, bool layernorm_all);

  std::size_t num_layers() const { return hidden_dims.size() + 1; }
  std::size_t layer_input_dim(std::size_t layer) const;
  std::size_t layer_output_dim(std::size_t layer) const;
  bool layer_has_layernorm(std::size_t layer) const;
  std::size_t parameter_count() const;

  void validate() const;

  bool operator==(const MlpSpec&) const = default;
};

/// All learnable arrays of one network, in checkpoint layer order:
/// weight, bias, then layernorm gain/offset where present.
struct MlpParams {
  std::vector<Matrix> weights;                  // (out, in) per layer
  std::vector<std::vector<double>> biases;      // per layer
  std::vector<std::vector<double>> ln_gains;    // per hidden layer (empty if off)
  std::vector<std::vector<double>> ln_offsets;  // per hidden layer (empty if off)

  static MlpParams zeros(const MlpSpec& spec);

  /// Uniform fan-in initialization; layernorm gains start at 1, offsets at 0.
  /// With zero_final_layer set, the output layer's weight and bias are zero so
  /// the network maps everything to activation(0).
  static MlpParams init(const MlpSpec& spec, Rng& rng, bool zero_final_layer = false);

  bool same_shape(const MlpParams& o) const;
  bool all_finite() const;

  /// Visits every parameter array in checkpoint order. The callback receives
  /// the owning layer index and a stable name ("weight", "bias", "ln_gain",
  /// "ln_offset").
  void for_each_array(
      const std::function<void(std::size_t layer, const char* name,
                               std::vector<double>&)>& fn);
  void for_each_array(
      const std::function<void(std::size_t layer, const char* name,
                               const std::vector<double>&)>& fn) const;
};

/// Intermediate values of one batched forward pass, retained for backward.
struct MlpForwardCache {
  Matrix input;                        // B x input_dim
  std::vector<Matrix> normalized;      // per layer: x-hat of layernorm (empty if off)
  std::vector<std::vector<double>> inv_std;  // per layer: 1/sqrt(var+eps), per row
  std::vector<Matrix> activations;     // per hidden layer: post-activation values
  Matrix output;                       // B x output_dim
};

/// Batched forward pass; rows of `input` are independent samples. When `cache`
/// is non-null the intermediates needed by mlp_backward are stored there.
Matrix mlp_forward(const MlpParams& params, const MlpSpec& spec, const Matrix& input,
                   MlpForwardCache* cache = nullptr);

/// Single-sample convenience wrapper.
std::vector<double> mlp_forward(const MlpParams& params, const MlpSpec& spec,
                                std::span<const double> input);

/// Exact reverse-mode gradients of the forward map. `output_grad` holds
/// d(loss)/d(output) per row. Fills `param_grads` (accumulating) unless null
/// and `input_grad` unless null; `input_grad` is what lets actor gradients
/// flow through a critic's action input.
void mlp_backward(const MlpParams& params, const MlpSpec& spec,
                  const MlpForwardCache& cache, const Matrix& output_grad,
                  MlpParams* param_grads, Matrix* input_grad);

/// Layer normalization of one vector (population mean/variance, then
/// gain/offset). Exposed for direct inspection of the normalization step.
void layer_norm(std::span<const double> x, std::span<const double> gain,
                std::span<const double> offset, std::span<double> out,
                double epsilon = kLayerNormEpsilon);

/// Content hash of parameters (shape and values).
std::uint64_t params_hash(const MlpParams& params);

}  // namespace resfit
