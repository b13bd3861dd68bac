// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#include "resfit/bc.hpp"

#include <algorithm>
#include <iostream>

#include "resfit/adam.hpp"
#include "resfit/errors.hpp"

namespace resfit {

ChunkedBasePolicy::ChunkedBasePolicy(MlpSpec spec, MlpParams params, int chunk_size,
                                     std::size_t action_dim, bool requery_every_step)
    : spec_(std::move(spec)),
      params_(std::move(params)),
      chunk_size_(chunk_size),
      action_dim_(action_dim),
      requery_(requery_every_step),
      cursor_(chunk_size) {
  if (chunk_size_ < 1) throw ValidationError("chunk_size must be >= 1");
  if (spec_.output_dim != static_cast<std::size_t>(chunk_size_) * action_dim_) {
    throw DimensionError("base policy output_dim must equal chunk_size * action_dim");
  }
}

void ChunkedBasePolicy::begin_episode() {
  cursor_ = chunk_size_;
  cached_chunk_.clear();
}

std::vector<double> ChunkedBasePolicy::act(std::span<const double> obs) {
  if (requery_) {
    ++forward_count_;
    std::vector<double> flat = mlp_forward(params_, spec_, obs);
    return {flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(action_dim_)};
  }
  if (cursor_ >= chunk_size_) {
    ++forward_count_;
    const std::vector<double> flat = mlp_forward(params_, spec_, obs);
    cached_chunk_.assign(static_cast<std::size_t>(chunk_size_), {});
    for (int i = 0; i < chunk_size_; ++i) {
      const auto begin = flat.begin() + static_cast<std::ptrdiff_t>(i * action_dim_);
      cached_chunk_[static_cast<std::size_t>(i)].assign(
          begin, begin + static_cast<std::ptrdiff_t>(action_dim_));
    }
    cursor_ = 0;
  }
  return cached_chunk_[static_cast<std::size_t>(cursor_++)];
}

std::vector<double> chunk_targets(const DemoTrajectory& demo, std::size_t t,
                                  int chunk_size) {
  if (demo.act.empty() || t >= demo.act.size()) {
    throw ValidationError("chunk_targets: step index outside demo");
  }
  const std::size_t action_dim = demo.act[0].size();
  std::vector<double> target;
  target.reserve(static_cast<std::size_t>(chunk_size) * action_dim);
  for (int i = 0; i < chunk_size; ++i) {
    const std::size_t idx = std::min(t + static_cast<std::size_t>(i),
                                     demo.act.size() - 1);  // repeat-last padding
    target.insert(target.end(), demo.act[idx].begin(), demo.act[idx].end());
  }
  return target;
}

namespace {

struct PairSet {
  Matrix inputs;
  Matrix targets;
};

PairSet build_pairs(const std::vector<DemoTrajectory>& demos, const EnvSpec& spec,
                    int chunk_size) {
  std::size_t count = 0;
  for (const auto& d : demos) {
    if (d.success) count += d.length();
  }
  if (count == 0) throw ValidationError("train_bc: empty dataset");

  PairSet pairs;
  pairs.inputs = Matrix(count, spec.obs_dim);
  pairs.targets =
      Matrix(count, static_cast<std::size_t>(chunk_size) * spec.action_dim);
  std::size_t row = 0;
  for (const auto& d : demos) {
    if (!d.success) continue;
    for (std::size_t t = 0; t < d.length(); ++t, ++row) {
      if (d.obs[t].size() != spec.obs_dim || d.act[t].size() != spec.action_dim) {
        throw DimensionError("train_bc: demo dimensions do not match env spec");
      }
      std::copy(d.obs[t].begin(), d.obs[t].end(), pairs.inputs.row(row).begin());
      const std::vector<double> target = chunk_targets(d, t, chunk_size);
      std::copy(target.begin(), target.end(), pairs.targets.row(row).begin());
    }
  }
  return pairs;
}

double dataset_mse(const MlpParams& params, const MlpSpec& spec, const PairSet& pairs) {
  const Matrix pred = mlp_forward(params, spec, pairs.inputs);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.values().size(); ++i) {
    const double d = pred.values()[i] - pairs.targets.values()[i];
    sum += d * d;
  }
  return sum / static_cast<double>(pred.values().size());
}

void run_bc_epochs(MlpParams& params, const MlpSpec& spec, const PairSet& pairs,
                   int epochs, double lr, int batch_size, Rng& rng) {
  const std::size_t n = pairs.inputs.rows();
  const std::size_t out_dim = pairs.targets.cols();
  AdamState adam = AdamState::create(spec, lr);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[rng.below(i)]);
    }
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
      const std::size_t b = std::min(static_cast<std::size_t>(batch_size), n - start);
      Matrix x(b, pairs.inputs.cols());
      Matrix t(b, out_dim);
      for (std::size_t r = 0; r < b; ++r) {
        const std::size_t src = order[start + r];
        auto xin = pairs.inputs.row(src);
        auto tin = pairs.targets.row(src);
        std::copy(xin.begin(), xin.end(), x.row(r).begin());
        std::copy(tin.begin(), tin.end(), t.row(r).begin());
      }
      MlpForwardCache cache;
      const Matrix pred = mlp_forward(params, spec, x, &cache);
      Matrix dout(b, out_dim);
      const double scale = 2.0 / static_cast<double>(b * out_dim);
      for (std::size_t i = 0; i < dout.values().size(); ++i) {
        dout.values()[i] = scale * (pred.values()[i] - t.values()[i]);
      }
      MlpParams grads = MlpParams::zeros(spec);
      mlp_backward(params, spec, cache, dout, &grads, nullptr);
      adam_step(params, grads, adam);
    }
  }
}

}  // namespace

BcResult train_bc(const std::vector<DemoTrajectory>& demos, const EnvSpec& spec,
                  const BcOptions& options) {
  const PairSet pairs = build_pairs(demos, spec, options.chunk_size);
  const MlpSpec net_spec = MlpSpec::dense(
      spec.obs_dim, options.hidden_dims,
      static_cast<std::size_t>(options.chunk_size) * spec.action_dim,
      Activation::relu, OutputActivation::tanh, options.use_layernorm);

  Rng init_rng(derive_seed(options.seed, "bc-init"));
  MlpParams params = MlpParams::init(net_spec, init_rng);
  Rng shuffle_rng(derive_seed(options.seed, "bc-shuffle"));
  run_bc_epochs(params, net_spec, pairs, options.epochs, options.learning_rate,
                options.batch_size, shuffle_rng);

  BcResult result;
  result.final_mse = dataset_mse(params, net_spec, pairs);
  result.policy = std::make_shared<ChunkedBasePolicy>(
      net_spec, std::move(params), options.chunk_size, spec.action_dim,
      options.requery_every_step);
  return result;
}

FilteredBcResult filtered_bc(const ChunkedBasePolicy& policy, const EnvSpec& spec,
                             std::vector<DemoTrajectory> dataset,
                             const FilteredBcOptions& options) {
  FilteredBcResult result;
  MlpParams params = policy.params();
  const MlpSpec& net_spec = policy.spec();
  const int k = policy.chunk_size();

  const std::vector<std::uint64_t> eval_seeds =
      eval_scene_seeds(derive_seed(options.seed, "fbc-eval"), options.eval_seeds);

  auto evaluate = [&](const MlpParams& p) {
    ChunkedBasePolicy probe(net_spec, p, k, spec.action_dim,
                            policy.requery_every_step());
    return success_rate(spec, probe, eval_seeds);
  };

  result.success_history.push_back(evaluate(params));
  result.dataset_sizes.push_back(dataset.size());

  for (int round = 0; round < options.rounds; ++round) {
    ChunkedBasePolicy actor(net_spec, params, k, spec.action_dim,
                            policy.requery_every_step());
    int added = 0;
    for (int j = 0; j < options.rollouts_per_round; ++j) {
      const std::uint64_t scene_seed = derive_seed(
          options.seed, "fbc-rollout",
          static_cast<std::uint64_t>(round) * options.rollouts_per_round + j);
      EpisodeTrace trace = run_episode(spec, actor, scene_seed);
      if (trace.outcome.succeeded()) {
        DemoTrajectory demo;
        demo.seed = scene_seed;
        demo.obs = std::move(trace.obs);
        demo.act = std::move(trace.actions);
        demo.success = true;
        dataset.push_back(std::move(demo));
        ++added;
      }
    }
    if (added == 0) {
      std::cerr << "[filtered_bc] round " << round
                << ": no successful rollouts, skipping training\n";
    } else {
      const PairSet pairs = build_pairs(dataset, spec, k);
      Rng shuffle_rng(derive_seed(options.seed, "fbc-shuffle",
                                  static_cast<std::uint64_t>(round)));
      run_bc_epochs(params, net_spec, pairs, options.epochs_per_round,
                    options.learning_rate, options.batch_size, shuffle_rng);
    }
    result.success_history.push_back(evaluate(params));
    result.dataset_sizes.push_back(dataset.size());
  }

  result.policy = std::make_shared<ChunkedBasePolicy>(
      net_spec, std::move(params), k, spec.action_dim, policy.requery_every_step());
  return result;
}

}  // namespace resfit
