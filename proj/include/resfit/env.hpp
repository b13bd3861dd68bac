// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "resfit/rng.hpp"

namespace resfit {

enum class EnvName : std::uint8_t { point_reach = 0, arm_pick_place = 1 };

EnvName env_name_from_string(const std::string& s);
std::string to_string(EnvName name);

/// Static description of one environment.
struct EnvSpec {
  EnvName name = EnvName::point_reach;
  std::size_t obs_dim = 0;
  std::size_t action_dim = 0;
  int horizon = 0;
  double success_epsilon = 0.0;
  double dt = 0.0;
  double observation_noise = 0.0;  // uniform +/- noise added to observations

  static EnvSpec make(EnvName name);
};

/// Full simulation state. Stepping is a pure function of (spec, state,
/// action), so states can be copied, replayed and compared bitwise.
struct EnvState {
  std::vector<double> phys;  // layout documented per env below
  int step_index = 0;
  std::uint64_t rng_seed = 0;
  bool success_latched = false;
};

struct StepResult {
  std::vector<double> observation;
  double reward = 0.0;  // 1.0 exactly on the success transition, else 0.0
  bool done = false;
  bool success = false;
};

// point_reach: velocity-controlled 2D point.
//   phys = [px, py, vx, vy, goal_x, goal_y]; obs mirrors phys.
//   Start and goal are drawn uniformly over the workspace box.
constexpr double kPointReachBoxHalf = 0.8;
constexpr double kPointReachSpeedCap = 1.0;

// arm_pick_place: planar 4-link arm, velocity-controlled joints plus a grasp
// channel; the object snap-attaches to the end effector when grasped nearby.
//   phys = [q0..q3, qd0..qd3, obj_x, obj_y, tote_x, tote_y, grip_closed, attached]
//   obs mirrors phys. action = [joint velocity targets (4), grasp].
constexpr double kArmLinkLengths[4] = {0.4, 0.35, 0.3, 0.25};
constexpr double kArmMaxJointVel = 2.0;

std::pair<EnvState, std::vector<double>> env_reset(const EnvSpec& spec,
                                                   std::uint64_t seed);

std::pair<EnvState, StepResult> env_step(const EnvSpec& spec, const EnvState& state,
                                         std::span<const double> action);

std::vector<double> observe(const EnvSpec& spec, const EnvState& state);

/// The env's success predicate on a raw state (ignores the latch).
bool success_predicate(const EnvSpec& spec, const EnvState& state);

/// Proportional controller toward the current subgoal, before noise.
std::vector<double> expert_raw_action(const EnvSpec& spec, const EnvState& state);

/// expert_raw_action plus uniform noise of the given scale, clamped to [-1, 1].
std::vector<double> scripted_expert(const EnvSpec& spec, const EnvState& state,
                                    Rng& noise_rng, double noise_scale);

/// Forward kinematics of the planar arm (end-effector position).
std::pair<double, double> arm_forward_kinematics(std::span<const double> q);

}  // namespace resfit
