// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "resfit/adam.hpp"
#include "resfit/checkpoint.hpp"
#include "resfit/errors.hpp"
#include "resfit/mlp.hpp"
#include "support/oracles.hpp"

using namespace resfit;
namespace oracle = resfit::testing;

namespace {

Matrix row_matrix(const std::vector<double>& v) {
  Matrix m(1, v.size());
  std::copy(v.begin(), v.end(), m.values().begin());
  return m;
}

}  // namespace

TEST_CASE("zero-parameter network maps any input to zero") {
  const MlpSpec spec = MlpSpec::dense(4, {8, 8}, 3, Activation::relu,
                                      OutputActivation::linear, false);
  const MlpParams params = MlpParams::zeros(spec);
  Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const auto out = mlp_forward(params, spec, oracle::random_vector(4, rng));
    for (double v : out) CHECK(v == 0.0);
  }
}

TEST_CASE("single linear identity layer returns its input") {
  const MlpSpec spec = MlpSpec::dense(3, {}, 3, Activation::relu,
                                      OutputActivation::linear, false);
  MlpParams params = MlpParams::zeros(spec);
  for (std::size_t i = 0; i < 3; ++i) params.weights[0](i, i) = 1.0;
  const std::vector<double> x = {0.25, -1.75, 3.5};
  const auto y = mlp_forward(params, spec, x);
  CHECK(y == x);
}

TEST_CASE("3-layer random net matches the scalar-loop oracle to 1e-12") {
  Rng rng(42);
  const MlpSpec spec = MlpSpec::dense(5, {7, 6, 4}, 3, Activation::tanh,
                                      OutputActivation::tanh, true);
  const MlpParams params = oracle::random_params(spec, rng);
  for (int trial = 0; trial < 5; ++trial) {
    const std::vector<double> x = oracle::random_vector(5, rng);
    const auto got = mlp_forward(params, spec, x);
    const auto want = oracle::scalar_mlp_forward(params, spec, x);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(std::abs(got[i] - want[i]) < 1e-12);
    }
  }
}

TEST_CASE("forward determinism is bitwise") {
  Rng rng(3);
  const MlpSpec spec = MlpSpec::dense(6, {16, 16}, 2, Activation::relu,
                                      OutputActivation::tanh, true);
  const MlpParams params = oracle::random_params(spec, rng);
  const std::vector<double> x = oracle::random_vector(6, rng);
  const auto a = mlp_forward(params, spec, x);
  const auto b = mlp_forward(params, spec, x);
  CHECK(a == b);
}

TEST_CASE("forward rejects dimension mismatches") {
  const MlpSpec spec = MlpSpec::dense(4, {5}, 2, Activation::relu,
                                      OutputActivation::linear, false);
  const MlpParams params = MlpParams::zeros(spec);
  CHECK_THROWS_AS(mlp_forward(params, spec, std::vector<double>(3, 0.0)),
                  DimensionError);
}

TEST_CASE("linear layer backward matches the analytic expressions") {
  // y = Wx + b: param grad g x', input grad W' g.
  const MlpSpec spec = MlpSpec::dense(3, {}, 2, Activation::relu,
                                      OutputActivation::linear, false);
  Rng rng(11);
  const MlpParams params = oracle::random_params(spec, rng);
  const std::vector<double> x = oracle::random_vector(3, rng);
  const std::vector<double> g = oracle::random_vector(2, rng);

  MlpForwardCache cache;
  mlp_forward(params, spec, row_matrix(x), &cache);
  MlpParams grads = MlpParams::zeros(spec);
  Matrix input_grad;
  mlp_backward(params, spec, cache, row_matrix(g), &grads, &input_grad);

  for (std::size_t o = 0; o < 2; ++o) {
    CHECK(grads.biases[0][o] == doctest::Approx(g[o]).epsilon(1e-12));
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(grads.weights[0](o, i) == doctest::Approx(g[o] * x[i]).epsilon(1e-12));
    }
  }
  for (std::size_t i = 0; i < 3; ++i) {
    double want = 0.0;
    for (std::size_t o = 0; o < 2; ++o) want += params.weights[0](o, i) * g[o];
    CHECK(input_grad(0, i) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("backward matches central finite differences on random nets") {
  Rng rng(123);
  for (int trial = 0; trial < 25; ++trial) {
    const MlpSpec spec = oracle::random_spec(rng);
    const MlpParams params = oracle::random_params(spec, rng);
    const std::vector<double> x = oracle::random_vector(spec.input_dim, rng);
    const std::vector<double> g = oracle::random_vector(spec.output_dim, rng);

    MlpForwardCache cache;
    mlp_forward(params, spec, row_matrix(x), &cache);
    MlpParams analytic = MlpParams::zeros(spec);
    Matrix input_grad;
    mlp_backward(params, spec, cache, row_matrix(g), &analytic, &input_grad);

    const auto loss = [&](const MlpParams& p) {
      const auto y = oracle::scalar_mlp_forward(p, spec, x);
      return std::inner_product(y.begin(), y.end(), g.begin(), 0.0);
    };
    const MlpParams fd = oracle::fd_param_gradient(params, loss);
    CHECK(oracle::max_param_rel_err(analytic, fd) < 1e-6);

    const auto input_loss = [&](const std::vector<double>& xi) {
      const auto y = oracle::scalar_mlp_forward(params, spec, xi);
      return std::inner_product(y.begin(), y.end(), g.begin(), 0.0);
    };
    const std::vector<double> fd_input = oracle::fd_vector_gradient(x, input_loss);
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(oracle::rel_err(input_grad(0, i), fd_input[i]) < 1e-6);
    }
  }
}

TEST_CASE("saturated tanh output kills the gradient") {
  const MlpSpec spec = MlpSpec::dense(1, {}, 1, Activation::relu,
                                      OutputActivation::tanh, false);
  MlpParams params = MlpParams::zeros(spec);
  params.weights[0](0, 0) = 20.0;  // pre-activation 20 at x=1

  MlpForwardCache cache;
  mlp_forward(params, spec, row_matrix({1.0}), &cache);
  MlpParams grads = MlpParams::zeros(spec);
  Matrix input_grad;
  mlp_backward(params, spec, cache, row_matrix({1.0}), &grads, &input_grad);
  CHECK(std::abs(grads.weights[0](0, 0)) < 1e-15);
  CHECK(std::abs(input_grad(0, 0)) < 1e-15);
}

TEST_CASE("layernorm normalizes to zero mean and unit variance before gain") {
  Rng rng(5);
  const std::size_t n = 64;
  const std::vector<double> x = oracle::random_vector(n, rng, -10.0, 10.0);
  const std::vector<double> gain(n, 1.0), offset(n, 0.0);
  std::vector<double> out(n);
  layer_norm(x, gain, offset, out);

  double mean = 0.0;
  for (double v : out) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : out) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  CHECK(std::abs(mean) < 1e-10);
  CHECK(std::abs(var - 1.0) < 1e-6);
}

TEST_CASE("adam: zero gradients leave parameters unchanged, step advances") {
  const MlpSpec spec = MlpSpec::dense(2, {3}, 1, Activation::relu,
                                      OutputActivation::linear, false);
  Rng rng(9);
  MlpParams params = oracle::random_params(spec, rng);
  const MlpParams before = params;
  AdamState state = AdamState::create(spec, 1e-3);
  adam_step(params, MlpParams::zeros(spec), state);
  CHECK(state.step == 1);
  std::vector<const std::vector<double>*> pa, pb;
  params.for_each_array([&](std::size_t, const char*, const std::vector<double>& a) {
    pa.push_back(&a);
  });
  before.for_each_array([&](std::size_t, const char*, const std::vector<double>& a) {
    pb.push_back(&a);
  });
  for (std::size_t k = 0; k < pa.size(); ++k) CHECK(*pa[k] == *pb[k]);
}

TEST_CASE("adam: one bias-corrected step moves a scalar by -lr") {
  const MlpSpec spec = MlpSpec::dense(1, {}, 1, Activation::relu,
                                      OutputActivation::linear, false);
  MlpParams params = MlpParams::zeros(spec);  // p = 0
  MlpParams grads = MlpParams::zeros(spec);
  grads.weights[0](0, 0) = 1.0;
  AdamState state = AdamState::create(spec, 1e-3);
  adam_step(params, grads, state);
  // mhat = 1, vhat = 1 after bias correction: p -> -lr / (1 + eps)
  CHECK(params.weights[0](0, 0) == doctest::Approx(-1e-3).epsilon(1e-6));
}

TEST_CASE("adam: descent on p^2 shrinks |p| monotonically after warm-up") {
  const MlpSpec spec = MlpSpec::dense(1, {}, 1, Activation::relu,
                                      OutputActivation::linear, false);
  MlpParams params = MlpParams::zeros(spec);
  params.weights[0](0, 0) = 1.0;
  AdamState state = AdamState::create(spec, 1e-2);
  double prev = 1.0;
  for (int step = 0; step < 100; ++step) {
    MlpParams grads = MlpParams::zeros(spec);
    grads.weights[0](0, 0) = 2.0 * params.weights[0](0, 0);
    adam_step(params, grads, state);
    const double now = std::abs(params.weights[0](0, 0));
    if (step >= 5) CHECK(now < prev);
    prev = now;
  }
  CHECK(prev < 0.5);
}

TEST_CASE("adam rejects non-finite gradients naming the layer") {
  const MlpSpec spec = MlpSpec::dense(2, {3}, 1, Activation::relu,
                                      OutputActivation::linear, false);
  MlpParams params = MlpParams::zeros(spec);
  MlpParams grads = MlpParams::zeros(spec);
  grads.weights[1](0, 0) = std::numeric_limits<double>::quiet_NaN();
  AdamState state = AdamState::create(spec, 1e-3);
  try {
    adam_step(params, grads, state);
    FAIL("expected DivergedError");
  } catch (const DivergedError& e) {
    CHECK(e.layer_index == 1);
  }
}

TEST_CASE("polyak update: arithmetic, fixed point and endpoint behavior") {
  const MlpSpec spec = MlpSpec::dense(2, {4}, 2, Activation::relu,
                                      OutputActivation::linear, true);
  Rng rng(77);
  const MlpParams online = oracle::random_params(spec, rng);

  SUBCASE("tau 0.005 means rho 0.995: scalar arithmetic") {
    MlpParams target = MlpParams::zeros(spec);
    MlpParams ones = MlpParams::zeros(spec);
    ones.for_each_array([](std::size_t, const char*, std::vector<double>& a) {
      for (double& v : a) v = 1.0;
    });
    polyak_update(target, ones, 0.995);
    CHECK(target.weights[0](0, 0) == doctest::Approx(0.005).epsilon(1e-12));
  }

  SUBCASE("target equal to online is a fixed point for any rho") {
    for (double rho : {0.0, 0.37, 0.995, 1.0}) {
      MlpParams target = online;
      polyak_update(target, online, rho);
      CHECK(params_hash(target) == params_hash(online));
    }
  }

  SUBCASE("rho 1 is the identity, rho 0 copies online") {
    MlpParams target = oracle::random_params(spec, rng);
    const std::uint64_t before = params_hash(target);
    polyak_update(target, online, 1.0);
    CHECK(params_hash(target) == before);
    polyak_update(target, online, 0.0);
    CHECK(params_hash(target) == params_hash(online));
  }

  SUBCASE("rho outside [0,1] is rejected") {
    MlpParams target = online;
    CHECK_THROWS_AS(polyak_update(target, online, 1.5), ValidationError);
  }
}

TEST_CASE("checkpoint round trip is bitwise; corrupt and truncated streams fail") {
  Rng rng(2026);
  const MlpSpec spec = MlpSpec::dense(5, {9, 4}, 3, Activation::tanh,
                                      OutputActivation::tanh, true);
  const MlpParams params = oracle::random_params(spec, rng);
  const std::vector<std::uint8_t> bytes = serialize_params(params, spec);

  SUBCASE("round trip") {
    const auto [restored, rspec] = deserialize_params(bytes);
    CHECK(rspec == spec);
    CHECK(params_hash(restored) == params_hash(params));
    CHECK(serialize_params(restored, rspec) == bytes);
  }

  SUBCASE("corrupted magic reports a version mismatch") {
    std::vector<std::uint8_t> bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(deserialize_params(bad), VersionMismatchError);
  }

  SUBCASE("stream truncated mid-layer names the layer") {
    // Cut inside layer 1's weights: header + layer0 arrays + a few bytes.
    const std::size_t header = 4 + 4 * 3 + 4 * 2 + 2 + 2;
    const std::size_t layer0 = (9 * 5 + 9 + 9 + 9) * 8;
    std::vector<std::uint8_t> cut(bytes.begin(),
                                  bytes.begin() + static_cast<std::ptrdiff_t>(
                                                      header + layer0 + 16));
    try {
      deserialize_params(cut);
      FAIL("expected TruncatedStreamError");
    } catch (const TruncatedStreamError& e) {
      CHECK(e.layer_index == 1);
      CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
    }
  }
}

TEST_CASE("zero-initialized final layer emits exactly zero through tanh") {
  Rng rng(8);
  const MlpSpec spec = MlpSpec::dense(6, {32, 32}, 4, Activation::relu,
                                      OutputActivation::tanh, false);
  const MlpParams params = MlpParams::init(spec, rng, /*zero_final_layer=*/true);
  for (int trial = 0; trial < 10; ++trial) {
    const auto out = mlp_forward(params, spec, oracle::random_vector(6, rng));
    for (double v : out) CHECK(v == 0.0);
  }
}
