// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#include "resfit/demos.hpp"

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "resfit/errors.hpp"

namespace resfit {

double DemoCollection::mean_length() const {
  if (demos.empty()) return 0.0;
  double total = 0.0;
  for (const auto& d : demos) total += static_cast<double>(d.length());
  return total / static_cast<double>(demos.size());
}

DemoCollection collect_demos(const EnvSpec& spec, double expert_noise_scale,
                             int num_demos, std::uint64_t seed) {
  if (num_demos < 1) throw ValidationError("collect_demos: num_demos must be >= 1");
  DemoCollection out;
  const int max_attempts = 10 * num_demos;

  while (out.successes < num_demos) {
    if (out.attempts >= max_attempts) {
      std::ostringstream msg;
      msg << "expert success rate " << out.successes << "/" << out.attempts
          << " is below 10% at noise scale " << expert_noise_scale
          << "; cannot collect " << num_demos << " demos";
      throw CalibrationError(msg.str());
    }
    const std::uint64_t scene_seed =
        derive_seed(seed, "demo-scene", static_cast<std::uint64_t>(out.attempts));
    Rng noise_rng(derive_seed(seed, "demo-noise", static_cast<std::uint64_t>(out.attempts)));
    ++out.attempts;

    DemoTrajectory traj;
    traj.seed = scene_seed;
    auto [state, obs] = env_reset(spec, scene_seed);
    traj.obs.push_back(obs);
    bool success = false;
    for (int t = 0; t < spec.horizon; ++t) {
      const std::vector<double> action =
          scripted_expert(spec, state, noise_rng, expert_noise_scale);
      auto [next_state, result] = env_step(spec, state, action);
      traj.act.push_back(action);
      traj.obs.push_back(result.observation);
      state = std::move(next_state);
      if (result.done) {
        success = result.success;
        break;
      }
    }
    if (success) {
      traj.success = true;
      out.demos.push_back(std::move(traj));
      ++out.successes;
    }
  }
  return out;
}

void write_demo_file(const std::filesystem::path& path,
                     const std::vector<DemoTrajectory>& demos) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  for (const auto& d : demos) {
    nlohmann::json j;
    j["seed"] = d.seed;
    j["obs"] = d.obs;
    j["act"] = d.act;
    j["success"] = d.success;
    out << j.dump() << "\n";
  }
}

std::vector<DemoTrajectory> read_demo_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open demo file " + path.string());
  std::vector<DemoTrajectory> demos;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error("demo file " + path.string() + " line " + std::to_string(lineno) +
                  ": " + e.what());
    }
    DemoTrajectory d;
    d.seed = j.at("seed").get<std::uint64_t>();
    d.obs = j.at("obs").get<std::vector<std::vector<double>>>();
    d.act = j.at("act").get<std::vector<std::vector<double>>>();
    d.success = j.at("success").get<bool>();
    if (d.obs.size() != d.act.size() + 1) {
      throw Error("demo file " + path.string() + " line " + std::to_string(lineno) +
                  ": obs must hold exactly one more entry than act");
    }
    demos.push_back(std::move(d));
  }
  return demos;
}

}  // namespace resfit
