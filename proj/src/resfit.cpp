// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#include "resfit/resfit.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "resfit/errors.hpp"

namespace resfit {

namespace {

Matrix stack_rows(const std::vector<NStepSample>& batch,
                  const std::vector<double> NStepSample::*field) {
  const std::size_t b = batch.size();
  const std::size_t dim = (batch[0].*field).size();
  Matrix out(b, dim);
  for (std::size_t r = 0; r < b; ++r) {
    const std::vector<double>& v = batch[r].*field;
    std::copy(v.begin(), v.end(), out.row(r).begin());
  }
  return out;
}

Matrix concat_cols(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto ra = a.row(r);
    auto rb = b.row(r);
    auto ro = out.row(r);
    std::copy(ra.begin(), ra.end(), ro.begin());
    std::copy(rb.begin(), rb.end(), ro.begin() + static_cast<std::ptrdiff_t>(a.cols()));
  }
  return out;
}

}  // namespace

ResidualActor ResidualActor::create(std::size_t obs_dim, std::size_t action_dim,
                                    const std::vector<std::size_t>& hidden_dims,
                                    bool use_layernorm, double residual_scale,
                                    Rng& rng) {
  ResidualActor a;
  a.obs_dim = obs_dim;
  a.action_dim = action_dim;
  a.residual_scale = residual_scale;
  a.spec = MlpSpec::dense(obs_dim + action_dim, hidden_dims, action_dim,
                          Activation::relu, OutputActivation::tanh, use_layernorm);
  a.params = MlpParams::init(a.spec, rng, /*zero_final_layer=*/true);
  a.target = a.params;
  return a;
}

Matrix ResidualActor::residuals(const Matrix& obs, const Matrix& base,
                                const MlpParams& which) const {
  Matrix out = mlp_forward(which, spec, concat_cols(obs, base));
  for (double& v : out.values()) v *= residual_scale;
  return out;
}

std::vector<double> ResidualActor::residual(std::span<const double> obs,
                                            std::span<const double> base) const {
  std::vector<double> in(obs.begin(), obs.end());
  in.insert(in.end(), base.begin(), base.end());
  std::vector<double> out = mlp_forward(params, spec, in);
  for (double& v : out) v *= residual_scale;
  return out;
}

CriticEnsemble CriticEnsemble::create(std::size_t obs_dim, std::size_t action_dim,
                                      const std::vector<std::size_t>& hidden_dims,
                                      bool use_layernorm, int ensemble_size,
                                      int subset_size, Rng& rng) {
  if (ensemble_size < 1 || subset_size < 1 || subset_size > ensemble_size) {
    throw ValidationError("critic ensemble requires 1 <= subset_size <= ensemble_size");
  }
  CriticEnsemble e;
  e.obs_dim = obs_dim;
  e.action_dim = action_dim;
  e.subset_size = subset_size;
  e.spec = MlpSpec::dense(obs_dim + action_dim, hidden_dims, 1, Activation::relu,
                          OutputActivation::linear, use_layernorm);
  for (int i = 0; i < ensemble_size; ++i) {
    e.members.push_back(MlpParams::init(e.spec, rng));
    e.targets.push_back(e.members.back());
  }
  return e;
}

std::vector<double> CriticEnsemble::q_values(const MlpParams& member, const Matrix& obs,
                                             const Matrix& action) const {
  const Matrix q = mlp_forward(member, spec, concat_cols(obs, action));
  return q.values();
}

namespace detail {

std::vector<int> draw_subset(int n, int m, Rng& rng) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < m; ++i) {
    const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(m));
  return idx;
}

std::vector<double> compute_td_targets_with_subset(
    const std::vector<NStepSample>& batch, const ResidualActor& actor,
    const CriticEnsemble& critics, const std::vector<int>& subset,
    const TrainConfig& config, Rng& rng) {
  const std::size_t b = batch.size();
  const double alpha = actor.residual_scale;
  const double sigma = config.rl_smoothing_sigma;
  const double clip = config.rl_smoothing_clip;

  const Matrix obs_next = stack_rows(batch, &NStepSample::lookahead_obs);
  const Matrix base_next = stack_rows(batch, &NStepSample::lookahead_base);
  Matrix res = actor.residuals(obs_next, base_next, actor.target);
  if (sigma > 0.0) {
    for (double& v : res.values()) {
      const double noise = std::clamp(rng.normal(0.0, sigma), -clip, clip);
      v = std::clamp(v + noise, -alpha, alpha);
    }
  } else {
    for (double& v : res.values()) v = std::clamp(v, -alpha, alpha);
  }
  Matrix next_action(b, actor.action_dim);
  for (std::size_t i = 0; i < next_action.values().size(); ++i) {
    next_action.values()[i] =
        std::clamp(base_next.values()[i] + res.values()[i], -1.0, 1.0);
  }

  std::vector<double> min_q;
  for (int j : subset) {
    const std::vector<double> q =
        critics.q_values(critics.targets[static_cast<std::size_t>(j)], obs_next,
                         next_action);
    if (min_q.empty()) {
      min_q = q;
    } else {
      for (std::size_t i = 0; i < q.size(); ++i) min_q[i] = std::min(min_q[i], q[i]);
    }
  }

  std::vector<double> y(b);
  for (std::size_t i = 0; i < b; ++i) {
    const NStepSample& s = batch[i];
    if (s.terminal_within) {
      y[i] = s.rn;
    } else {
      y[i] = s.rn + std::pow(config.rl_gamma, s.effective_n) * min_q[i];
    }
  }
  return y;
}

ActorUpdateStats actor_update_with(const std::vector<NStepSample>& batch,
                                   ResidualActor& actor, AdamState& optimizer,
                                   const BatchedCritic& critic) {
  const std::size_t b = batch.size();
  const Matrix obs = stack_rows(batch, &NStepSample::obs);
  const Matrix base = stack_rows(batch, &NStepSample::base_action);

  MlpForwardCache cache;
  const Matrix raw = mlp_forward(actor.params, actor.spec, concat_cols(obs, base), &cache);
  Matrix action(b, actor.action_dim);
  for (std::size_t i = 0; i < action.values().size(); ++i) {
    action.values()[i] = base.values()[i] + actor.residual_scale * raw.values()[i];
  }

  const auto [qbar, dq_da] = critic(obs, action);

  double loss = 0.0;
  for (double q : qbar) loss -= q;
  loss /= static_cast<double>(b);
  if (!std::isfinite(loss)) {
    throw DivergedError("actor loss is non-finite");
  }

  // dL/d(raw output) = -scale/B * dQbar/da.
  Matrix dout(b, actor.action_dim);
  const double coeff = -actor.residual_scale / static_cast<double>(b);
  for (std::size_t i = 0; i < dout.values().size(); ++i) {
    dout.values()[i] = coeff * dq_da.values()[i];
  }
  MlpParams grads = MlpParams::zeros(actor.spec);
  mlp_backward(actor.params, actor.spec, cache, dout, &grads, nullptr);
  adam_step(actor.params, grads, optimizer);
  return {loss};
}

}  // namespace detail

std::vector<double> compute_td_targets(const std::vector<NStepSample>& batch,
                                       const ResidualActor& actor,
                                       const CriticEnsemble& critics,
                                       const TrainConfig& config, Rng& rng) {
  if (batch.empty()) throw ValidationError("compute_td_targets: empty batch");
  const std::vector<int> subset =
      detail::draw_subset(critics.size(), critics.subset_size, rng);
  return detail::compute_td_targets_with_subset(batch, actor, critics, subset, config,
                                                rng);
}

CriticUpdateStats critic_update(const std::vector<NStepSample>& batch,
                                const std::vector<double>& targets,
                                CriticEnsemble& critics,
                                std::vector<AdamState>& optimizers) {
  const std::size_t b = batch.size();
  if (targets.size() != b) throw DimensionError("critic_update: targets size mismatch");
  if (optimizers.size() != critics.members.size()) {
    throw DimensionError("critic_update: one optimizer per critic required");
  }
  const Matrix obs = stack_rows(batch, &NStepSample::obs);
  const Matrix action = stack_rows(batch, &NStepSample::full_action);
  const Matrix x = concat_cols(obs, action);

  CriticUpdateStats stats;
  for (std::size_t m = 0; m < critics.members.size(); ++m) {
    MlpForwardCache cache;
    const Matrix q = mlp_forward(critics.members[m], critics.spec, x, &cache);
    double mse = 0.0;
    Matrix dout(b, 1);
    for (std::size_t i = 0; i < b; ++i) {
      const double diff = q.values()[i] - targets[i];
      mse += diff * diff;
      dout.values()[i] = 2.0 * diff / static_cast<double>(b);
      stats.mean_q += q.values()[i];
      stats.max_abs_q = std::max(stats.max_abs_q, std::abs(q.values()[i]));
    }
    mse /= static_cast<double>(b);
    if (!std::isfinite(mse)) {
      std::ostringstream msg;
      msg << "critic " << m << " loss is non-finite (batch size " << b
          << ", first target " << targets[0] << ")";
      throw DivergedError(msg.str(), static_cast<int>(m));
    }
    stats.msbe += mse;
    MlpParams grads = MlpParams::zeros(critics.spec);
    mlp_backward(critics.members[m], critics.spec, cache, dout, &grads, nullptr);
    adam_step(critics.members[m], grads, optimizers[m]);
  }
  const double n = static_cast<double>(critics.members.size());
  stats.msbe /= n;
  stats.mean_q /= n * static_cast<double>(b);
  return stats;
}

ActorUpdateStats actor_update(const std::vector<NStepSample>& batch,
                              ResidualActor& actor, const CriticEnsemble& critics,
                              AdamState& optimizer) {
  const detail::BatchedCritic ensemble_mean =
      [&critics](const Matrix& obs, const Matrix& action) {
        const std::size_t b = obs.rows();
        const Matrix x = concat_cols(obs, action);
        std::vector<double> qbar(b, 0.0);
        Matrix dq(b, action.cols());
        const double inv_n = 1.0 / static_cast<double>(critics.members.size());
        Matrix ones(b, 1);
        ones.fill(1.0);
        for (const MlpParams& member : critics.members) {
          MlpForwardCache cache;
          const Matrix q = mlp_forward(member, critics.spec, x, &cache);
          for (std::size_t i = 0; i < b; ++i) qbar[i] += inv_n * q.values()[i];
          Matrix dx;
          mlp_backward(member, critics.spec, cache, ones, nullptr, &dx);
          // keep only the action slice of the input gradient
          for (std::size_t r = 0; r < b; ++r) {
            for (std::size_t c = 0; c < action.cols(); ++c) {
              dq(r, c) += inv_n * dx(r, obs.cols() + c);
            }
          }
        }
        return std::make_pair(std::move(qbar), std::move(dq));
      };
  return detail::actor_update_with(batch, actor, optimizer, ensemble_mean);
}

}  // namespace resfit
