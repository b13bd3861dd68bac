// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#include "resfit/env.hpp"

#include <algorithm>
#include <cmath>

#include "resfit/errors.hpp"

namespace resfit {

namespace {

constexpr int kPointReachHorizon = 100;
constexpr double kPointReachEpsilon = 0.05;
constexpr double kPointReachDt = 0.05;
constexpr double kPointReachExpertGain = 4.0;

constexpr int kArmHorizon = 250;
constexpr double kArmEpsilon = 0.08;
constexpr double kArmDt = 0.05;
constexpr double kArmExpertGain = 3.0;
constexpr double kArmDlsDamping = 0.01;
// Object and tote are placed in disjoint polar wedges, both inside the arm's
// reach, so the object can never start inside the tote region.
constexpr double kArmPlacementRadiusMin = 0.45;
constexpr double kArmPlacementRadiusMax = 1.0;
constexpr double kArmObjectAngleMin = 0.25;
constexpr double kArmObjectAngleMax = 1.15;
constexpr double kArmToteAngleMin = -1.15;
constexpr double kArmToteAngleMax = -0.25;
constexpr double kArmRestPose[4] = {1.2, -0.8, -0.8, -0.6};

double clamp_unit(double v) { return std::clamp(v, -1.0, 1.0); }

double dist2d(double ax, double ay, double bx, double by) {
  return std::hypot(ax - bx, ay - by);
}

void check_action(const EnvSpec& spec, std::span<const double> action) {
  if (action.size() != spec.action_dim) {
    throw DimensionError("env_step: action has " + std::to_string(action.size()) +
                         " entries, env expects " + std::to_string(spec.action_dim));
  }
  for (std::size_t i = 0; i < action.size(); ++i) {
    if (!std::isfinite(action[i])) {
      throw ValidationError("env_step: non-finite action entry at index " +
                            std::to_string(i));
    }
  }
}

}  // namespace

EnvName env_name_from_string(const std::string& s) {
  if (s == "point_reach") return EnvName::point_reach;
  if (s == "arm_pick_place") return EnvName::arm_pick_place;
  throw ConfigError("unknown env name: " + s);
}

std::string to_string(EnvName name) {
  return name == EnvName::point_reach ? "point_reach" : "arm_pick_place";
}

EnvSpec EnvSpec::make(EnvName name) {
  EnvSpec spec;
  spec.name = name;
  if (name == EnvName::point_reach) {
    spec.obs_dim = 6;
    spec.action_dim = 2;
    spec.horizon = kPointReachHorizon;
    spec.success_epsilon = kPointReachEpsilon;
    spec.dt = kPointReachDt;
  } else {
    spec.obs_dim = 14;
    spec.action_dim = 5;
    spec.horizon = kArmHorizon;
    spec.success_epsilon = kArmEpsilon;
    spec.dt = kArmDt;
  }
  return spec;
}

std::pair<double, double> arm_forward_kinematics(std::span<const double> q) {
  double x = 0.0, y = 0.0, angle = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    angle += q[i];
    x += kArmLinkLengths[i] * std::cos(angle);
    y += kArmLinkLengths[i] * std::sin(angle);
  }
  return {x, y};
}

std::pair<EnvState, std::vector<double>> env_reset(const EnvSpec& spec,
                                                   std::uint64_t seed) {
  EnvState state;
  state.step_index = 0;
  state.rng_seed = seed;
  state.success_latched = false;
  Rng rng(splitmix64(seed));

  if (spec.name == EnvName::point_reach) {
    state.phys.assign(6, 0.0);
    state.phys[0] = rng.uniform(-kPointReachBoxHalf, kPointReachBoxHalf);  // px
    state.phys[1] = rng.uniform(-kPointReachBoxHalf, kPointReachBoxHalf);  // py
    state.phys[4] = rng.uniform(-kPointReachBoxHalf, kPointReachBoxHalf);  // gx
    state.phys[5] = rng.uniform(-kPointReachBoxHalf, kPointReachBoxHalf);  // gy
  } else {
    state.phys.assign(14, 0.0);
    for (std::size_t i = 0; i < 4; ++i) {
      state.phys[i] = kArmRestPose[i] + rng.uniform(-0.1, 0.1);
    }
    const double obj_r = rng.uniform(kArmPlacementRadiusMin, kArmPlacementRadiusMax);
    const double obj_a = rng.uniform(kArmObjectAngleMin, kArmObjectAngleMax);
    state.phys[8] = obj_r * std::cos(obj_a);
    state.phys[9] = obj_r * std::sin(obj_a);
    const double tote_r = rng.uniform(kArmPlacementRadiusMin, kArmPlacementRadiusMax);
    const double tote_a = rng.uniform(kArmToteAngleMin, kArmToteAngleMax);
    state.phys[10] = tote_r * std::cos(tote_a);
    state.phys[11] = tote_r * std::sin(tote_a);
  }
  return {state, observe(spec, state)};
}

bool success_predicate(const EnvSpec& spec, const EnvState& state) {
  if (spec.name == EnvName::point_reach) {
    return dist2d(state.phys[0], state.phys[1], state.phys[4], state.phys[5]) <=
           spec.success_epsilon;
  }
  const bool attached = state.phys[13] > 0.5;
  return !attached && dist2d(state.phys[8], state.phys[9], state.phys[10],
                             state.phys[11]) <= spec.success_epsilon;
}

std::vector<double> observe(const EnvSpec& spec, const EnvState& state) {
  std::vector<double> obs = state.phys;
  if (spec.observation_noise > 0.0) {
    Rng rng(derive_seed(state.rng_seed, "obs-noise",
                        static_cast<std::uint64_t>(state.step_index)));
    for (double& v : obs) {
      v += rng.uniform(-spec.observation_noise, spec.observation_noise);
    }
  }
  return obs;
}

std::pair<EnvState, StepResult> env_step(const EnvSpec& spec, const EnvState& state,
                                         std::span<const double> action) {
  check_action(spec, action);
  EnvState next = state;
  next.step_index = state.step_index + 1;

  if (spec.name == EnvName::point_reach) {
    const double vx = clamp_unit(action[0]) * kPointReachSpeedCap;
    const double vy = clamp_unit(action[1]) * kPointReachSpeedCap;
    next.phys[0] += vx * spec.dt;
    next.phys[1] += vy * spec.dt;
    next.phys[2] = vx;
    next.phys[3] = vy;
  } else {
    double q[4];
    for (std::size_t i = 0; i < 4; ++i) {
      const double qd = clamp_unit(action[i]) * kArmMaxJointVel;
      next.phys[i] = state.phys[i] + qd * spec.dt;
      next.phys[4 + i] = qd;
      q[i] = next.phys[i];
    }
    const auto [ee_x, ee_y] = arm_forward_kinematics(q);
    const double grasp = clamp_unit(action[4]);
    const bool grip_closed = grasp > 0.5;
    bool attached = state.phys[13] > 0.5;
    if (!attached && grip_closed &&
        dist2d(ee_x, ee_y, next.phys[8], next.phys[9]) <= spec.success_epsilon) {
      attached = true;
    }
    if (attached) {
      next.phys[8] = ee_x;
      next.phys[9] = ee_y;
      if (!grip_closed) attached = false;  // released; object stays put
    }
    next.phys[12] = grip_closed ? 1.0 : 0.0;
    next.phys[13] = attached ? 1.0 : 0.0;
  }

  const bool was_latched = state.success_latched;
  next.success_latched = was_latched || success_predicate(spec, next);

  StepResult result;
  result.observation = observe(spec, next);
  result.success = next.success_latched;
  result.reward = (next.success_latched && !was_latched) ? 1.0 : 0.0;
  result.done = next.success_latched || next.step_index >= spec.horizon;
  return {std::move(next), std::move(result)};
}

std::vector<double> expert_raw_action(const EnvSpec& spec, const EnvState& state) {
  if (spec.name == EnvName::point_reach) {
    return {clamp_unit(kPointReachExpertGain * (state.phys[4] - state.phys[0])),
            clamp_unit(kPointReachExpertGain * (state.phys[5] - state.phys[1]))};
  }

  const auto [ee_x, ee_y] = arm_forward_kinematics(std::span(state.phys).first(4));
  const bool attached = state.phys[13] > 0.5;
  double target_x, target_y, grasp_cmd;
  if (!attached) {
    target_x = state.phys[8];
    target_y = state.phys[9];
    grasp_cmd = dist2d(ee_x, ee_y, target_x, target_y) <= 0.8 * spec.success_epsilon
                    ? 1.0
                    : -1.0;
  } else {
    target_x = state.phys[10];
    target_y = state.phys[11];
    grasp_cmd = dist2d(ee_x, ee_y, target_x, target_y) <= 0.6 * spec.success_epsilon
                    ? -1.0
                    : 1.0;
  }

  // Damped least-squares mapping from a desired end-effector velocity to
  // joint velocities: qdot = J' (J J' + lambda I)^-1 v.
  double jac[2][4];
  double cum = 0.0;
  double px = 0.0, py = 0.0;
  double joint_x[4], joint_y[4];
  for (std::size_t i = 0; i < 4; ++i) {
    joint_x[i] = px;
    joint_y[i] = py;
    cum += state.phys[i];
    px += kArmLinkLengths[i] * std::cos(cum);
    py += kArmLinkLengths[i] * std::sin(cum);
  }
  for (std::size_t j = 0; j < 4; ++j) {
    jac[0][j] = -(ee_y - joint_y[j]);
    jac[1][j] = ee_x - joint_x[j];
  }

  const double vx = kArmExpertGain * (target_x - ee_x);
  const double vy = kArmExpertGain * (target_y - ee_y);
  double a = kArmDlsDamping, b = 0.0, c = 0.0, d = kArmDlsDamping;
  for (std::size_t j = 0; j < 4; ++j) {
    a += jac[0][j] * jac[0][j];
    b += jac[0][j] * jac[1][j];
    c += jac[1][j] * jac[0][j];
    d += jac[1][j] * jac[1][j];
  }
  const double det = a * d - b * c;
  const double ux = (d * vx - b * vy) / det;
  const double uy = (-c * vx + a * vy) / det;

  std::vector<double> action(5, 0.0);
  for (std::size_t j = 0; j < 4; ++j) {
    const double qd = jac[0][j] * ux + jac[1][j] * uy;
    action[j] = clamp_unit(qd / kArmMaxJointVel);
  }
  action[4] = grasp_cmd;
  return action;
}

std::vector<double> scripted_expert(const EnvSpec& spec, const EnvState& state,
                                    Rng& noise_rng, double noise_scale) {
  std::vector<double> action = expert_raw_action(spec, state);
  if (noise_scale > 0.0) {
    for (double& v : action) {
      v = clamp_unit(v + noise_rng.uniform(-noise_scale, noise_scale));
    }
  } else {
    for (double& v : action) v = clamp_unit(v);
  }
  return action;
}

}  // namespace resfit
