// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#include "resfit/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>

#include "resfit/checkpoint.hpp"
#include "resfit/errors.hpp"

namespace resfit {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0') {
    throw ConfigError("bad float for " + key + ": '" + v + "'");
  }
  return d;
}

long long parse_int(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const long long i = std::strtoll(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0') {
    throw ConfigError("bad integer for " + key + ": '" + v + "'");
  }
  return i;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("bad boolean for " + key + ": '" + v + "' (use true/false)");
}

std::vector<std::size_t> parse_intlist(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(static_cast<std::size_t>(parse_int(key, item)));
  }
  if (out.empty()) throw ConfigError("empty list for " + key);
  return out;
}

std::string format_double(double d) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), d);
  return std::string(buf, res.ptr);
}

std::string format_intlist(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

struct KeyBinding {
  std::string key;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

KeyBinding make_binding(const std::string& key, double TrainConfig::*f) {
  return {key,
          [key, f](TrainConfig& c, const std::string& v) { c.*f = parse_double(key, v); },
          [f](const TrainConfig& c) { return format_double(c.*f); }};
}

KeyBinding make_binding(const std::string& key, int TrainConfig::*f) {
  return {key,
          [key, f](TrainConfig& c, const std::string& v) {
            c.*f = static_cast<int>(parse_int(key, v));
          },
          [f](const TrainConfig& c) { return std::to_string(c.*f); }};
}

KeyBinding make_binding(const std::string& key, std::uint64_t TrainConfig::*f) {
  return {key,
          [key, f](TrainConfig& c, const std::string& v) {
            c.*f = static_cast<std::uint64_t>(parse_int(key, v));
          },
          [f](const TrainConfig& c) { return std::to_string(c.*f); }};
}

KeyBinding make_binding(const std::string& key, bool TrainConfig::*f) {
  return {key,
          [key, f](TrainConfig& c, const std::string& v) { c.*f = parse_bool(key, v); },
          [f](const TrainConfig& c) { return c.*f ? "true" : "false"; }};
}

KeyBinding make_binding(const std::string& key, std::string TrainConfig::*f) {
  return {key, [f](TrainConfig& c, const std::string& v) { c.*f = v; },
          [f](const TrainConfig& c) { return c.*f; }};
}

KeyBinding make_binding(const std::string& key, std::vector<std::size_t> TrainConfig::*f) {
  return {key,
          [key, f](TrainConfig& c, const std::string& v) { c.*f = parse_intlist(key, v); },
          [f](const TrainConfig& c) { return format_intlist(c.*f); }};
}

const std::vector<KeyBinding>& bindings() {
  static const std::vector<KeyBinding> table = {
      make_binding("env.name", &TrainConfig::env_name),
      make_binding("env.success_epsilon", &TrainConfig::env_success_epsilon),
      make_binding("env.observation_noise", &TrainConfig::env_observation_noise),
      make_binding("env.horizon", &TrainConfig::env_horizon),
      make_binding("run.out_dir", &TrainConfig::run_out_dir),
      make_binding("demos.count", &TrainConfig::demos_count),
      make_binding("demos.expert_noise", &TrainConfig::demos_expert_noise),
      make_binding("demos.seed", &TrainConfig::demos_seed),
      make_binding("demos.path", &TrainConfig::demos_path),
      make_binding("bc.chunk_size", &TrainConfig::bc_chunk_size),
      make_binding("bc.epochs", &TrainConfig::bc_epochs),
      make_binding("bc.lr", &TrainConfig::bc_lr),
      make_binding("bc.batch_size", &TrainConfig::bc_batch_size),
      make_binding("bc.hidden", &TrainConfig::bc_hidden),
      make_binding("bc.use_layernorm", &TrainConfig::bc_use_layernorm),
      make_binding("bc.seed", &TrainConfig::bc_seed),
      make_binding("bc.eval_seeds", &TrainConfig::bc_eval_seeds),
      make_binding("bc.checkpoint_path", &TrainConfig::bc_checkpoint_path),
      make_binding("algo", &TrainConfig::algo),
      make_binding("residual_mode", &TrainConfig::residual_mode),
      make_binding("split_mode", &TrainConfig::split_mode),
      make_binding("base_requery_every_step", &TrainConfig::base_requery_every_step),
      make_binding("rl.gamma", &TrainConfig::rl_gamma),
      make_binding("rl.n_step", &TrainConfig::rl_n_step),
      make_binding("rl.utd", &TrainConfig::rl_utd),
      make_binding("rl.batch_size", &TrainConfig::rl_batch_size),
      make_binding("rl.ensemble_size", &TrainConfig::rl_ensemble_size),
      make_binding("rl.subset_size", &TrainConfig::rl_subset_size),
      make_binding("rl.residual_scale", &TrainConfig::rl_residual_scale),
      make_binding("rl.warmup_steps", &TrainConfig::rl_warmup_steps),
      make_binding("rl.warmup_noise", &TrainConfig::rl_warmup_noise),
      make_binding("rl.actor_delay", &TrainConfig::rl_actor_delay),
      make_binding("rl.rho", &TrainConfig::rl_rho),
      make_binding("rl.smoothing_sigma", &TrainConfig::rl_smoothing_sigma),
      make_binding("rl.smoothing_clip", &TrainConfig::rl_smoothing_clip),
      make_binding("rl.explore_sigma", &TrainConfig::rl_explore_sigma),
      make_binding("rl.actor_lr", &TrainConfig::rl_actor_lr),
      make_binding("rl.critic_lr", &TrainConfig::rl_critic_lr),
      make_binding("rl.seed", &TrainConfig::rl_seed),
      make_binding("rl.total_env_steps", &TrainConfig::rl_total_env_steps),
      make_binding("rl.actor_hidden", &TrainConfig::rl_actor_hidden),
      make_binding("rl.critic_hidden", &TrainConfig::rl_critic_hidden),
      make_binding("rl.actor_use_layernorm", &TrainConfig::rl_actor_use_layernorm),
      make_binding("rl.critic_use_layernorm", &TrainConfig::rl_critic_use_layernorm),
      make_binding("rl.online_capacity", &TrainConfig::rl_online_capacity),
      make_binding("rl.demos_in_buffer", &TrainConfig::rl_demos_in_buffer),
      make_binding("rl.checkpoint_every_episodes", &TrainConfig::rl_checkpoint_every_episodes),
      make_binding("rl.eval_every_episodes", &TrainConfig::rl_eval_every_episodes),
      make_binding("rl.eval_seeds", &TrainConfig::rl_eval_seeds),
      make_binding("rl.stop_at_success", &TrainConfig::rl_stop_at_success),
      make_binding("filtered_bc.rounds", &TrainConfig::fbc_rounds),
      make_binding("filtered_bc.rollouts_per_round", &TrainConfig::fbc_rollouts_per_round),
      make_binding("filtered_bc.epochs_per_round", &TrainConfig::fbc_epochs_per_round),
      make_binding("filtered_bc.eval_seeds", &TrainConfig::fbc_eval_seeds),
      make_binding("filtered_bc.seed", &TrainConfig::fbc_seed),
      make_binding("split.lockstep", &TrainConfig::split_lockstep),
      make_binding("split.poll_ms", &TrainConfig::split_poll_ms),
      make_binding("split.learner_enabled", &TrainConfig::split_learner_enabled),
      make_binding("split.checkpoint_every_updates", &TrainConfig::split_checkpoint_every_updates),
      make_binding("eval.pairs", &TrainConfig::eval_pairs),
      make_binding("eval.seeds", &TrainConfig::eval_seeds),
      make_binding("eval.seed", &TrainConfig::eval_seed),
      make_binding("metrics.wallclock_mode", &TrainConfig::metrics_wallclock_mode),
      make_binding("ablate.seeds", &TrainConfig::ablate_seeds),
      make_binding("ablate.threshold", &TrainConfig::ablate_threshold),
  };
  return table;
}

const KeyBinding* find_binding(const std::string& key) {
  for (const auto& b : bindings()) {
    if (b.key == key) return &b;
  }
  return nullptr;
}

}  // namespace

void TrainConfig::apply(const std::string& key, const std::string& value) {
  const KeyBinding* b = find_binding(key);
  if (!b) throw ConfigError("unknown config key: '" + key + "'");
  b->set(*this, value);
}

std::string TrainConfig::get(const std::string& key) const {
  const KeyBinding* b = find_binding(key);
  if (!b) throw ConfigError("unknown config key: '" + key + "'");
  return b->get(*this);
}

std::vector<std::string> TrainConfig::known_keys() {
  std::vector<std::string> keys;
  for (const auto& b : bindings()) keys.push_back(b.key);
  return keys;
}

std::string TrainConfig::serialize() const {
  std::map<std::string, std::string> kv;
  for (const auto& b : bindings()) kv[b.key] = b.get(*this);
  std::string out;
  for (const auto& [k, v] : kv) {
    out += k;
    out += " = ";
    out += v;
    out += "\n";
  }
  return out;
}

TrainConfig TrainConfig::from_text(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        " is not 'key = value': '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    cfg.apply(key, value);
  }
  return cfg;
}

TrainConfig TrainConfig::load_file(const std::filesystem::path& path) {
  return from_text(read_file_text(path));
}

int TrainConfig::chunk_size_resolved() const {
  if (bc_chunk_size > 0) return bc_chunk_size;
  return env_name == "arm_pick_place" ? 16 : 8;
}

EnvSpec TrainConfig::env_spec() const {
  EnvSpec spec = EnvSpec::make(env_name_from_string(env_name));
  if (env_success_epsilon > 0.0) spec.success_epsilon = env_success_epsilon;
  if (env_horizon > 0) spec.horizon = env_horizon;
  spec.observation_noise = env_observation_noise;
  return spec;
}

TrainConfig TrainConfig::resolved() const {
  TrainConfig c = *this;
  const EnvSpec spec = c.env_spec();
  c.env_success_epsilon = spec.success_epsilon;
  c.env_horizon = spec.horizon;
  c.bc_chunk_size = c.chunk_size_resolved();
  const double alpha = c.rl_residual_scale;
  if (c.rl_warmup_noise < 0.0) c.rl_warmup_noise = alpha;
  if (c.rl_smoothing_sigma < 0.0) c.rl_smoothing_sigma = 0.1 * alpha;
  if (c.rl_smoothing_clip < 0.0) c.rl_smoothing_clip = 0.3 * alpha;
  if (c.rl_explore_sigma < 0.0) c.rl_explore_sigma = 0.05 * alpha;

  if (c.algo != "resfit" && c.algo != "filtered_bc") {
    throw ConfigError("algo must be resfit or filtered_bc, got '" + c.algo + "'");
  }
  if (c.residual_mode != "residual" && c.residual_mode != "full_action") {
    throw ConfigError("residual_mode must be residual or full_action");
  }
  if (c.metrics_wallclock_mode != "real" && c.metrics_wallclock_mode != "zero") {
    throw ConfigError("metrics.wallclock_mode must be real or zero");
  }
  if (c.rl_batch_size <= 0 || c.rl_batch_size % 2 != 0) {
    throw ConfigError("rl.batch_size must be positive and even");
  }
  if (c.rl_subset_size < 1 || c.rl_subset_size > c.rl_ensemble_size) {
    throw ConfigError("rl.subset_size must lie in [1, rl.ensemble_size]");
  }
  if (c.rl_n_step < 1) throw ConfigError("rl.n_step must be >= 1");
  if (c.rl_utd <= 0.0) throw ConfigError("rl.utd must be positive");
  if (c.rl_rho < 0.0 || c.rl_rho > 1.0) throw ConfigError("rl.rho must lie in [0, 1]");
  if (c.rl_actor_delay < 1) throw ConfigError("rl.actor_delay must be >= 1");
  if (c.rl_gamma <= 0.0 || c.rl_gamma > 1.0) {
    throw ConfigError("rl.gamma must lie in (0, 1]");
  }
  if (c.demos_count < 1) throw ConfigError("demos.count must be >= 1");
  return c;
}

}  // namespace resfit
