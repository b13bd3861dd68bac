// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0
//
// Test-side oracles, implemented independently of the library's forward and
// sampling paths so they can check them.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "resfit/mlp.hpp"
#include "resfit/rng.hpp"

namespace resfit::testing {

/// Per-neuron scalar-loop forward pass of the same MLP topology, written
/// without matrices: plain loops, naive mean/variance for layernorm.
std::vector<double> scalar_mlp_forward(const MlpParams& params, const MlpSpec& spec,
                                       std::span<const double> input);

/// Relative error with an absolute floor: |a-b| / max(1e-3, |a|, |b|).
double rel_err(double a, double b);

/// Central finite differences of a scalar function with respect to every
/// parameter entry; returns gradients in the same structure.
MlpParams fd_param_gradient(const MlpParams& params,
                            const std::function<double(const MlpParams&)>& f,
                            double h = 1e-6);

/// Central finite differences with respect to an input vector.
std::vector<double> fd_vector_gradient(const std::vector<double>& x,
                                       const std::function<double(const std::vector<double>&)>& f,
                                       double h = 1e-6);

/// Max rel_err between an analytic parameter gradient and its FD counterpart.
double max_param_rel_err(const MlpParams& analytic, const MlpParams& fd);

/// Random spec/params for property tests (small dims, all activation and
/// layernorm combinations).
MlpSpec random_spec(Rng& rng, std::size_t max_dim = 6);
MlpParams random_params(const MlpSpec& spec, Rng& rng, double scale = 1.0);
std::vector<double> random_vector(std::size_t n, Rng& rng, double lo = -1.5,
                                  double hi = 1.5);

/// Brute-force n-step slice over one raw episode (rewards plus a terminal
/// flag on its last step): returns (rn, effective_n, terminal_within) for the
/// head at index t. Summation runs in increasing step order.
struct NStepOracle {
  double rn = 0.0;
  int effective_n = 0;
  bool terminal_within = false;
  std::size_t lookahead_index = 0;  // index of the step whose next-state is used
};
NStepOracle nstep_slice(std::span<const double> rewards, bool episode_terminated,
                        std::size_t t, int n, double gamma);

/// Chi-squared statistic over equally likely bins.
double chi_squared(std::span<const int> counts, double expected);

}  // namespace resfit::testing
