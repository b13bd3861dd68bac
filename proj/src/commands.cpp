// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#include "resfit/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "resfit/bc.hpp"
#include "resfit/checkpoint.hpp"
#include "resfit/errors.hpp"
#include "resfit/metrics.hpp"
#include "resfit/runtime.hpp"
#include "resfit/split.hpp"
#include "resfit/trainer.hpp"

namespace resfit {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path demos_path_for(const TrainConfig& cfg, const fs::path& out_dir) {
  return cfg.demos_path.empty() ? out_dir / "demos.jsonl" : fs::path(cfg.demos_path);
}

fs::path bc_checkpoint_for(const TrainConfig& cfg, const fs::path& out_dir) {
  return cfg.bc_checkpoint_path.empty() ? out_dir / "base_policy.rft"
                                        : fs::path(cfg.bc_checkpoint_path);
}

void write_run_manifest(const fs::path& out_dir, const TrainConfig& resolved,
                        const std::map<std::string, std::string>& input_hashes,
                        const std::vector<std::string>& outputs,
                        const std::vector<std::uint64_t>& seeds) {
  json j;
  j["config"] = resolved.serialize();
  j["inputs"] = input_hashes;
  j["outputs"] = outputs;
  j["seeds"] = seeds;
  atomic_write_file(out_dir / "run_manifest.json", j.dump(2) + "\n");
}

void write_resolved_config(const fs::path& out_dir, const TrainConfig& resolved) {
  atomic_write_file(out_dir / "resolved.cfg", resolved.serialize());
}

std::shared_ptr<ChunkedBasePolicy> load_base_checkpoint(const fs::path& path,
                                                        bool requery_every_step) {
  auto [params, spec] = load_params_file(path);
  const fs::path sidecar = path.string() + ".json";
  if (!fs::exists(sidecar)) {
    throw Error("missing checkpoint sidecar " + sidecar.string());
  }
  const json meta = json::parse(read_file_text(sidecar));
  if (meta.at("type").get<std::string>() != "base") {
    throw Error(path.string() + " is not a base-policy checkpoint");
  }
  const int k = meta.at("chunk_size").get<int>();
  const auto action_dim = meta.at("action_dim").get<std::size_t>();
  return std::make_shared<ChunkedBasePolicy>(spec, std::move(params), k, action_dim,
                                             requery_every_step);
}

void save_base_checkpoint(const fs::path& path, const ChunkedBasePolicy& policy,
                          const std::string& env_name) {
  save_params_file(path, policy.params(), policy.spec());
  json meta;
  meta["type"] = "base";
  meta["env"] = env_name;
  meta["chunk_size"] = policy.chunk_size();
  meta["action_dim"] = policy.action_dim();
  meta["obs_dim"] = policy.spec().input_dim;
  meta["requery_every_step"] = policy.requery_every_step();
  meta["hash"] = file_content_hash(path);
  atomic_write_file(fs::path(path.string() + ".json"), meta.dump(2) + "\n");
}

void save_residual_checkpoint(const fs::path& path, const ResidualActor& actor,
                              const TrainConfig& cfg, const fs::path& base_ckpt) {
  save_params_file(path, actor.params, actor.spec);
  json meta;
  meta["type"] = "residual";
  meta["env"] = cfg.env_name;
  meta["residual_scale"] = actor.residual_scale;
  meta["residual_mode"] = cfg.residual_mode;
  meta["obs_dim"] = actor.obs_dim;
  meta["action_dim"] = actor.action_dim;
  meta["hash"] = file_content_hash(path);
  if (cfg.residual_mode == "residual") {
    meta["base_checkpoint"] = base_ckpt.string();
    meta["base_hash"] = file_content_hash(base_ckpt);
    meta["base_requery_every_step"] = cfg.base_requery_every_step;
  }
  atomic_write_file(fs::path(path.string() + ".json"), meta.dump(2) + "\n");
}

}  // namespace

std::pair<double, double> wilson_interval(int successes, int total) {
  if (total == 0) return {0.0, 1.0};
  const double z = 1.959963984540054;  // 97.5th normal quantile
  const double n = total;
  const double p = successes / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

std::unique_ptr<RolloutPolicy> LoadedPolicy::instantiate() const {
  if (!actor) {
    // Plain base policy: copy so every instance owns its chunk cursor.
    return std::make_unique<ChunkedBasePolicy>(*base);
  }
  struct OwnedResidual : RolloutPolicy {
    std::shared_ptr<ChunkedBasePolicy> base_copy;
    ResidualActor actor_copy;
    std::unique_ptr<ResidualRolloutPolicy> impl;

    void begin_episode() override { impl->begin_episode(); }
    std::vector<double> act(std::span<const double> obs) override {
      return impl->act(obs);
    }
  };
  auto owned = std::make_unique<OwnedResidual>();
  owned->base_copy = base ? std::make_shared<ChunkedBasePolicy>(*base) : nullptr;
  owned->actor_copy = *actor;
  owned->impl = std::make_unique<ResidualRolloutPolicy>(owned->base_copy.get(),
                                                        &owned->actor_copy);
  return owned;
}

LoadedPolicy load_policy(const fs::path& checkpoint_path) {
  const fs::path sidecar = checkpoint_path.string() + ".json";
  if (!fs::exists(checkpoint_path)) {
    throw Error("checkpoint not found: " + checkpoint_path.string());
  }
  if (!fs::exists(sidecar)) {
    throw Error("missing checkpoint sidecar " + sidecar.string());
  }
  const json meta = json::parse(read_file_text(sidecar));
  LoadedPolicy loaded;
  loaded.type = meta.at("type").get<std::string>();
  loaded.env_name = meta.at("env").get<std::string>();

  if (loaded.type == "base") {
    loaded.base = load_base_checkpoint(checkpoint_path,
                                       meta.value("requery_every_step", false));
    return loaded;
  }
  if (loaded.type != "residual") {
    throw Error("unknown checkpoint type '" + loaded.type + "'");
  }

  auto [params, spec] = load_params_file(checkpoint_path);
  ResidualActor actor;
  actor.spec = spec;
  actor.params = std::move(params);
  actor.target = actor.params;
  actor.residual_scale = meta.at("residual_scale").get<double>();
  actor.obs_dim = meta.at("obs_dim").get<std::size_t>();
  actor.action_dim = meta.at("action_dim").get<std::size_t>();
  loaded.actor = std::move(actor);

  if (meta.at("residual_mode").get<std::string>() == "residual") {
    fs::path base_path = meta.at("base_checkpoint").get<std::string>();
    if (base_path.is_relative()) {
      // try as given first, then relative to the checkpoint directory
      if (!fs::exists(base_path)) {
        base_path = checkpoint_path.parent_path() / base_path.filename();
      }
    }
    loaded.base = load_base_checkpoint(base_path,
                                       meta.value("base_requery_every_step", false));
  }
  return loaded;
}

std::string cmd_demos(const TrainConfig& config, const fs::path& out_dir) {
  const TrainConfig cfg = config.resolved();
  const EnvSpec spec = cfg.env_spec();
  fs::create_directories(out_dir);

  const DemoCollection collection =
      collect_demos(spec, cfg.demos_expert_noise, cfg.demos_count, cfg.demos_seed);
  const fs::path path = demos_path_for(cfg, out_dir);
  write_demo_file(path, collection.demos);

  json summary;
  summary["command"] = "demos";
  summary["count"] = collection.demos.size();
  summary["attempts"] = collection.attempts;
  summary["expert_success_rate"] = collection.expert_success_rate();
  summary["mean_length"] = collection.mean_length();
  summary["path"] = path.string();
  summary["hash"] = file_content_hash(path);
  atomic_write_file(out_dir / "demos_summary.json", summary.dump(2) + "\n");

  write_resolved_config(out_dir, cfg);
  write_run_manifest(out_dir, cfg, {}, {path.filename().string(), "demos_summary.json"},
                     {cfg.demos_seed});
  return summary.dump(2);
}

std::string cmd_bc(const TrainConfig& config, const fs::path& out_dir) {
  const TrainConfig cfg = config.resolved();
  const EnvSpec spec = cfg.env_spec();
  fs::create_directories(out_dir);

  const fs::path demo_path = demos_path_for(cfg, out_dir);
  const std::vector<DemoTrajectory> demos = read_demo_file(demo_path);
  if (demos.empty()) throw Error("demo file " + demo_path.string() + " is empty");

  BcOptions options;
  options.chunk_size = cfg.bc_chunk_size;
  options.epochs = cfg.bc_epochs;
  options.learning_rate = cfg.bc_lr;
  options.batch_size = cfg.bc_batch_size;
  options.hidden_dims = cfg.bc_hidden;
  options.use_layernorm = cfg.bc_use_layernorm;
  options.seed = cfg.bc_seed;
  options.requery_every_step = cfg.base_requery_every_step;
  const BcResult result = train_bc(demos, spec, options);

  const std::vector<std::uint64_t> seeds =
      eval_scene_seeds(derive_seed(cfg.bc_seed, "bc-eval"), cfg.bc_eval_seeds);
  ChunkedBasePolicy probe = *result.policy;
  const double eval_rate = success_rate(spec, probe, seeds);

  const fs::path ckpt = bc_checkpoint_for(cfg, out_dir);
  save_base_checkpoint(ckpt, *result.policy, cfg.env_name);

  json report;
  report["command"] = "bc";
  report["final_mse"] = result.final_mse;
  report["eval_success_rate"] = eval_rate;
  report["eval_seeds"] = cfg.bc_eval_seeds;
  report["chunk_size"] = cfg.bc_chunk_size;
  report["demo_count"] = demos.size();
  report["checkpoint"] = ckpt.string();
  atomic_write_file(out_dir / "bc_report.json", report.dump(2) + "\n");

  write_resolved_config(out_dir, cfg);
  write_run_manifest(out_dir, cfg, {{"demos", file_content_hash(demo_path)}},
                     {ckpt.filename().string(), "bc_report.json"}, {cfg.bc_seed});
  return report.dump(2);
}

namespace {

std::string run_filtered_bc(const TrainConfig& cfg, const EnvSpec& spec,
                            const std::vector<DemoTrajectory>& demos,
                            const ChunkedBasePolicy& base, const fs::path& out_dir) {
  FilteredBcOptions options;
  options.rounds = cfg.fbc_rounds;
  options.rollouts_per_round = cfg.fbc_rollouts_per_round;
  options.epochs_per_round = cfg.fbc_epochs_per_round;
  options.learning_rate = cfg.bc_lr;
  options.batch_size = cfg.bc_batch_size;
  options.eval_seeds = cfg.fbc_eval_seeds;
  options.seed = cfg.fbc_seed;
  const FilteredBcResult result = filtered_bc(base, spec, demos, options);

  std::ofstream history(out_dir / "filtered_bc_history.csv",
                        std::ios::binary | std::ios::trunc);
  history << "round,dataset_size,eval_success_rate\n";
  for (std::size_t i = 0; i < result.success_history.size(); ++i) {
    history << (static_cast<long>(i) - 1) << ',' << result.dataset_sizes[i] << ','
            << format_double(result.success_history[i]) << "\n";
  }
  history.close();

  const fs::path ckpt = out_dir / "filtered_bc_policy.rft";
  save_base_checkpoint(ckpt, *result.policy, cfg.env_name);

  json summary;
  summary["command"] = "rl";
  summary["algo"] = "filtered_bc";
  summary["initial_success"] = result.success_history.front();
  summary["final_success"] = result.success_history.back();
  summary["history"] = result.success_history;
  summary["checkpoint"] = ckpt.string();
  atomic_write_file(out_dir / "run_summary.json", summary.dump(2) + "\n");
  return summary.dump(2);
}

}  // namespace

std::string cmd_rl(const TrainConfig& config, const fs::path& out_dir) {
  const TrainConfig cfg = config.resolved();
  const EnvSpec spec = cfg.env_spec();
  fs::create_directories(out_dir);
  write_resolved_config(out_dir, cfg);

  const fs::path demo_path = demos_path_for(cfg, out_dir);
  const std::vector<DemoTrajectory> demos = read_demo_file(demo_path);

  const bool zero_base = cfg.residual_mode == "full_action";
  std::shared_ptr<ChunkedBasePolicy> base;
  fs::path base_ckpt;
  if (!zero_base || cfg.algo == "filtered_bc") {
    base_ckpt = bc_checkpoint_for(cfg, out_dir);
    base = load_base_checkpoint(base_ckpt, cfg.base_requery_every_step);
    if (base->spec().input_dim != spec.obs_dim) {
      throw DimensionError("base checkpoint obs_dim does not match env");
    }
  }

  std::map<std::string, std::string> inputs{{"demos", file_content_hash(demo_path)}};
  if (base) inputs["base_checkpoint"] = file_content_hash(base_ckpt);

  if (cfg.algo == "filtered_bc") {
    const std::string summary = run_filtered_bc(cfg, spec, demos, *base, out_dir);
    write_run_manifest(out_dir, cfg, inputs,
                       {"filtered_bc_policy.rft", "filtered_bc_history.csv",
                        "run_summary.json"},
                       {cfg.fbc_seed});
    return summary;
  }

  json summary;
  summary["command"] = "rl";
  summary["algo"] = "resfit";
  summary["residual_mode"] = cfg.residual_mode;

  if (cfg.split_mode) {
    const SplitResult result = run_split(spec, base.get(), demos, cfg, out_dir);
    save_residual_checkpoint(out_dir / "actor.rft", result.train.actor, cfg, base_ckpt);
    summary["env_steps"] = result.collector_env_steps;
    summary["episodes"] = result.collector_episodes;
    summary["warmup_steps"] = cfg.rl_warmup_steps;
    summary["critic_updates"] = result.train.critic_updates;
    summary["actor_updates"] = result.train.actor_updates;
    summary["segments_written"] = result.segments_written;
    summary["segments_ingested"] = result.segments_ingested;
    summary["duplicate_ingests"] = result.duplicate_ingests;
    summary["integrity_failures"] = result.integrity_failures;
    summary["checkpoints_loaded"] = result.checkpoints_loaded;
    summary["max_abs_q"] = result.train.max_abs_q;
  } else {
    ReplayStore store(static_cast<std::size_t>(cfg.rl_online_capacity));
    if (zero_base) {
      store.load_offline_zero_base(demos, spec.action_dim);
    } else {
      store.load_offline(demos, *base);
    }
    const std::uint64_t offline_hash_before = store.offline_hash();
    const TrainResult result = train_resfit(spec, base.get(), store, cfg, out_dir);
    save_residual_checkpoint(out_dir / "actor.rft", result.actor, cfg, base_ckpt);
    summary["env_steps"] = result.env_steps;
    summary["episodes"] = result.episodes;
    summary["warmup_steps"] = result.warmup_steps;
    summary["critic_updates"] = result.critic_updates;
    summary["actor_updates"] = result.actor_updates;
    summary["max_abs_q"] = result.max_abs_q;
    summary["stopped_early"] = result.stopped_early;
    summary["offline_hash_constant"] = offline_hash_before == store.offline_hash();
    summary["base_hash_constant"] = result.base_hash_before == result.base_hash_after;
    if (!result.eval_history.empty()) {
      summary["final_eval_success"] = result.eval_history.back().success_rate;
    }
    json evals = json::array();
    for (const EvalPoint& p : result.eval_history) {
      evals.push_back({{"env_steps", p.env_steps}, {"success_rate", p.success_rate}});
    }
    summary["eval_history"] = evals;
  }

  atomic_write_file(out_dir / "run_summary.json", summary.dump(2) + "\n");
  write_run_manifest(out_dir, cfg, inputs,
                     {"actor.rft", "metrics.csv", "run_summary.json"}, {cfg.rl_seed});
  return summary.dump(2);
}

std::string cmd_eval(const TrainConfig& config, const fs::path& ckpt_a,
                     const std::optional<fs::path>& ckpt_b, const fs::path& out_dir) {
  const TrainConfig cfg = config.resolved();
  const EnvSpec spec = cfg.env_spec();
  fs::create_directories(out_dir);

  const LoadedPolicy a = load_policy(ckpt_a);
  const std::size_t policy_obs =
      a.actor ? a.actor->obs_dim : a.base->spec().input_dim;
  if (policy_obs != spec.obs_dim) {
    throw DimensionError("checkpoint observation dim " + std::to_string(policy_obs) +
                         " does not match env obs_dim " +
                         std::to_string(spec.obs_dim));
  }

  json summary;
  summary["command"] = "eval";

  if (!ckpt_b) {
    auto policy = a.instantiate();
    const std::vector<std::uint64_t> seeds =
        eval_scene_seeds(derive_seed(cfg.eval_seed, "eval"), cfg.eval_seeds);
    int wins = 0;
    for (std::uint64_t s : seeds) {
      if (run_episode(spec, *policy, s).outcome.succeeded()) ++wins;
    }
    const auto [lo, hi] = wilson_interval(wins, cfg.eval_seeds);
    summary["mode"] = "single";
    summary["episodes"] = cfg.eval_seeds;
    summary["successes"] = wins;
    summary["success_rate"] = static_cast<double>(wins) / cfg.eval_seeds;
    summary["ci95_low"] = lo;
    summary["ci95_high"] = hi;
  } else {
    const LoadedPolicy b = load_policy(*ckpt_b);
    auto pa = a.instantiate();
    auto pb = b.instantiate();
    const AbResult result = evaluate_ab(*pa, *pb, spec, cfg.eval_pairs, cfg.eval_seed);

    std::ofstream table(out_dir / "eval_table.csv", std::ios::binary | std::ios::trunc);
    table << "pair,scene_seed,label_of_a,outcome_a,outcome_b,length_a,length_b\n";
    for (const AbPairRow& row : result.pairs) {
      table << row.pair_index << ',' << row.scene_seed << ',' << row.label_of_first
            << ',' << to_string(row.outcome_first.label) << ','
            << to_string(row.outcome_second.label) << ',' << row.outcome_first.length
            << ',' << row.outcome_second.length << "\n";
    }
    table.close();

    summary["mode"] = "ab";
    summary["pairs"] = cfg.eval_pairs;
    summary["success_a"] = result.success_first;
    summary["success_b"] = result.success_second;
    summary["difference"] = result.difference;
    summary["wins_a"] = result.wins_first;
    summary["wins_b"] = result.wins_second;
    summary["both_succeed"] = result.both_succeed;
    summary["neither_succeed"] = result.neither_succeed;
    summary["discordant"] = result.discordant();
    summary["p_value"] = result.p_value;
  }

  atomic_write_file(out_dir / "eval_report.json", summary.dump(2) + "\n");
  return summary.dump(2);
}

namespace {

struct GridAxis {
  std::string key;  // canonical config key
  std::vector<std::string> values;
};

std::vector<GridAxis> parse_grid(const std::string& grid_spec) {
  static const std::map<std::string, std::string> shorthand = {
      {"utd", "rl.utd"},
      {"n_step", "rl.n_step"},
      {"use_layernorm", "rl.critic_use_layernorm"},
      {"demos_in_buffer", "rl.demos_in_buffer"},
      {"residual_mode", "residual_mode"},
  };
  std::vector<GridAxis> axes;
  std::stringstream ss(grid_spec);
  std::string part;
  while (std::getline(ss, part, ';')) {
    if (part.empty()) continue;
    const std::size_t eq = part.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("grid axis '" + part + "' is not key=v1,v2,...");
    }
    GridAxis axis;
    axis.key = part.substr(0, eq);
    if (auto it = shorthand.find(axis.key); it != shorthand.end()) {
      axis.key = it->second;
    }
    std::stringstream vs(part.substr(eq + 1));
    std::string v;
    while (std::getline(vs, v, ',')) {
      if (!v.empty()) axis.values.push_back(v);
    }
    if (axis.values.empty()) throw ConfigError("grid axis '" + axis.key + "' is empty");
    axes.push_back(std::move(axis));
  }
  if (axes.empty()) throw ConfigError("empty grid spec");
  return axes;
}

}  // namespace

std::string cmd_ablate(const TrainConfig& config, const std::string& grid_spec,
                       const fs::path& out_dir) {
  const TrainConfig cfg = config.resolved();
  const EnvSpec spec = cfg.env_spec();
  fs::create_directories(out_dir);
  write_resolved_config(out_dir, cfg);

  const std::vector<GridAxis> axes = parse_grid(grid_spec);
  std::vector<std::vector<std::string>> cells;  // one value per axis
  std::vector<std::string> current(axes.size());
  const std::function<void(std::size_t)> expand = [&](std::size_t depth) {
    if (depth == axes.size()) {
      cells.push_back(current);
      return;
    }
    for (const std::string& v : axes[depth].values) {
      current[depth] = v;
      expand(depth + 1);
    }
  };
  expand(0);

  const fs::path demo_path = demos_path_for(cfg, out_dir);
  const fs::path base_ckpt = bc_checkpoint_for(cfg, out_dir);

  std::ofstream aggregate(out_dir / "aggregate.csv", std::ios::binary | std::ios::trunc);
  aggregate << "cell,";
  for (const GridAxis& axis : axes) aggregate << axis.key << ',';
  aggregate << "seed,status,steps_to_threshold,final_success,max_abs_q\n";

  json summary;
  summary["command"] = "ablate";
  summary["cells"] = cells.size();
  summary["runs"] = cells.size() * cfg.ablate_seeds.size();
  int failures = 0;

  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    std::string cell_tag = "cell";
    for (std::size_t ai = 0; ai < axes.size(); ++ai) {
      std::string v = cells[ci][ai];
      std::replace(v.begin(), v.end(), '.', 'p');
      cell_tag += "_" + v;
    }
    for (std::size_t seed : cfg.ablate_seeds) {
      TrainConfig cell_cfg = cfg;
      for (std::size_t ai = 0; ai < axes.size(); ++ai) {
        cell_cfg.apply(axes[ai].key, cells[ci][ai]);
      }
      cell_cfg.apply("rl.seed", std::to_string(seed));
      const fs::path cell_dir =
          out_dir / "cells" / (cell_tag + "_seed" + std::to_string(seed));

      std::string status = "ok";
      double steps_to_threshold = static_cast<double>(cell_cfg.rl_total_env_steps);
      double final_success = 0.0;
      double max_abs_q = 0.0;
      fs::create_directories(cell_dir);
      try {
        const TrainConfig cr = cell_cfg.resolved();
        write_resolved_config(cell_dir, cr);
        const std::vector<DemoTrajectory> demos = read_demo_file(demo_path);
        const bool zero_base = cr.residual_mode == "full_action";
        std::shared_ptr<ChunkedBasePolicy> base;
        ReplayStore store(static_cast<std::size_t>(cr.rl_online_capacity));
        if (zero_base) {
          store.load_offline_zero_base(demos, spec.action_dim);
        } else {
          base = load_base_checkpoint(base_ckpt, cr.base_requery_every_step);
          store.load_offline(demos, *base);
        }
        const TrainResult result = train_resfit(spec, base.get(), store, cr, cell_dir);
        for (const EvalPoint& p : result.eval_history) {
          if (p.success_rate >= cr.ablate_threshold) {
            steps_to_threshold = static_cast<double>(p.env_steps);
            break;
          }
        }
        if (!result.eval_history.empty()) {
          final_success = result.eval_history.back().success_rate;
        }
        max_abs_q = result.max_abs_q;
      } catch (const Error& e) {
        status = "failed";
        ++failures;
        std::ofstream err(cell_dir / "error.txt", std::ios::trunc);
        err << e.what() << "\n";
      }

      aggregate << cell_tag << ',';
      for (std::size_t ai = 0; ai < axes.size(); ++ai) aggregate << cells[ci][ai] << ',';
      aggregate << seed << ',' << status << ',' << format_double(steps_to_threshold)
                << ',' << format_double(final_success) << ','
                << format_double(max_abs_q) << "\n";
      aggregate.flush();
    }
  }
  aggregate.close();

  summary["failures"] = failures;
  summary["aggregate"] = (out_dir / "aggregate.csv").string();
  atomic_write_file(out_dir / "ablate_summary.json", summary.dump(2) + "\n");
  return summary.dump(2);
}

}  // namespace resfit
