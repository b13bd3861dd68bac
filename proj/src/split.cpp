// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#include "resfit/split.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <thread>

#include <json.hpp>

#include "resfit/checkpoint.hpp"
#include "resfit/errors.hpp"

namespace resfit {

namespace {

/// flock-based guard; works across threads (separate descriptors) and
/// processes alike.
class FileLock {
 public:
  explicit FileLock(const std::filesystem::path& path) {
    fd_ = ::open(path.c_str(), O_CREAT | O_RDWR, 0644);
    if (fd_ < 0) throw Error("cannot open lock file " + path.string());
    if (::flock(fd_, LOCK_EX) != 0) {
      ::close(fd_);
      throw Error("flock failed on " + path.string());
    }
  }
  ~FileLock() {
    if (fd_ >= 0) {
      ::flock(fd_, LOCK_UN);
      ::close(fd_);
    }
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

nlohmann::json manifest_to_json(const ExchangeManifest& m) {
  nlohmann::json j;
  j["version"] = m.version;
  j["collector_done"] = m.collector_done;
  if (m.checkpoint) {
    j["checkpoint"] = {{"id", m.checkpoint->id},
                       {"path", m.checkpoint->path},
                       {"hash", m.checkpoint->hash},
                       {"critic_updates", m.checkpoint->critic_updates},
                       {"mean_msbe", m.checkpoint->mean_msbe},
                       {"mean_q", m.checkpoint->mean_q},
                       {"actor_loss", m.checkpoint->actor_loss}};
  } else {
    j["checkpoint"] = nullptr;
  }
  j["segments"] = nlohmann::json::array();
  for (const auto& s : m.segments) {
    j["segments"].push_back({{"id", s.id},
                             {"path", s.path},
                             {"hash", s.hash},
                             {"env_steps", s.env_steps}});
  }
  return j;
}

ExchangeManifest manifest_from_json(const nlohmann::json& j) {
  ExchangeManifest m;
  m.version = j.at("version").get<long>();
  m.collector_done = j.value("collector_done", false);
  if (j.contains("checkpoint") && !j.at("checkpoint").is_null()) {
    const auto& c = j.at("checkpoint");
    ExchangeCheckpointEntry e;
    e.id = c.at("id").get<long>();
    e.path = c.at("path").get<std::string>();
    e.hash = c.at("hash").get<std::string>();
    e.critic_updates = c.value("critic_updates", 0L);
    e.mean_msbe = c.value("mean_msbe", 0.0);
    e.mean_q = c.value("mean_q", 0.0);
    e.actor_loss = c.value("actor_loss", 0.0);
    m.checkpoint = e;
  }
  for (const auto& sj : j.at("segments")) {
    ExchangeSegmentEntry s;
    s.id = sj.at("id").get<long>();
    s.path = sj.at("path").get<std::string>();
    s.hash = sj.at("hash").get<std::string>();
    s.env_steps = sj.at("env_steps").get<long>();
    m.segments.push_back(std::move(s));
  }
  return m;
}

}  // namespace

Exchange::Exchange(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(segments_dir());
  std::filesystem::create_directories(checkpoints_dir());
}

ExchangeManifest Exchange::read() const {
  const std::filesystem::path manifest = root_ / "manifest.json";
  if (!std::filesystem::exists(manifest)) return {};
  try {
    return manifest_from_json(nlohmann::json::parse(read_file_text(manifest)));
  } catch (const nlohmann::json::exception&) {
    return {};  // racing writer finished a rename between exists() and read
  }
}

void Exchange::update(const std::function<void(ExchangeManifest&)>& mutate) {
  FileLock lock(root_ / "manifest.lock");
  ExchangeManifest m = read();
  mutate(m);
  m.version += 1;
  atomic_write_file(root_ / "manifest.json", manifest_to_json(m).dump(2) + "\n");
}

namespace {

/// Base + uniform warmup noise, decomposition exposed for transitions.
class WarmupStepPolicy : public SplitStepPolicy {
 public:
  WarmupStepPolicy(const EnvSpec& spec, ChunkedBasePolicy* base, double noise_scale,
                   Rng* rng)
      : spec_(spec), base_(base), noise_scale_(noise_scale), rng_(rng) {}

  void begin_episode() override {
    if (base_) base_->begin_episode();
  }

  std::vector<double> base_action(std::span<const double> obs) override {
    if (!base_) return std::vector<double>(spec_.action_dim, 0.0);
    std::vector<double> b = base_->act(obs);
    for (double& v : b) v = std::clamp(v, -1.0, 1.0);
    return b;
  }

  std::vector<double> full_action(std::span<const double>,
                                  std::span<const double> base) override {
    std::vector<double> a(base.begin(), base.end());
    for (double& v : a) {
      v = std::clamp(v + rng_->uniform(-noise_scale_, noise_scale_), -1.0, 1.0);
    }
    return a;
  }

 private:
  EnvSpec spec_;
  ChunkedBasePolicy* base_;
  double noise_scale_;
  Rng* rng_;
};

/// Base + residual actor (+ exploration noise), decomposition exposed.
class ResidualStepPolicy : public SplitStepPolicy {
 public:
  ResidualStepPolicy(const EnvSpec& spec, ChunkedBasePolicy* base,
                     const ResidualActor* actor, double explore_sigma, Rng* rng)
      : spec_(spec), base_(base), actor_(actor), explore_sigma_(explore_sigma),
        rng_(rng) {}

  void begin_episode() override {
    if (base_) base_->begin_episode();
  }

  std::vector<double> base_action(std::span<const double> obs) override {
    if (!base_) return std::vector<double>(spec_.action_dim, 0.0);
    std::vector<double> b = base_->act(obs);
    for (double& v : b) v = std::clamp(v, -1.0, 1.0);
    return b;
  }

  std::vector<double> full_action(std::span<const double> obs,
                                  std::span<const double> base) override {
    std::vector<double> res = actor_->residual(obs, base);
    const double alpha = actor_->residual_scale;
    if (explore_sigma_ > 0.0) {
      for (double& r : res) {
        r = std::clamp(r + rng_->normal(0.0, explore_sigma_), -alpha, alpha);
      }
    }
    std::vector<double> a(base.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = std::clamp(base[i] + res[i], -1.0, 1.0);
    }
    return a;
  }

 private:
  EnvSpec spec_;
  ChunkedBasePolicy* base_;
  const ResidualActor* actor_;
  double explore_sigma_;
  Rng* rng_;
};

}  // namespace

SplitCollector::SplitCollector(const EnvSpec& spec, ChunkedBasePolicy* base_policy,
                               const TrainConfig& resolved, Exchange* exchange,
                               MetricsWriter* metrics)
    : spec_(spec),
      base_(base_policy),
      cfg_(resolved),
      exchange_(exchange),
      metrics_(metrics),
      actor_(make_actor(spec, resolved)),
      warmup_rng_(derive_seed(resolved.rl_seed, "warmup-noise")),
      explore_rng_(derive_seed(resolved.rl_seed, "explore")) {
  if (cfg_.residual_mode != "full_action" && base_ == nullptr) {
    throw ValidationError("split collector: base policy required in residual mode");
  }
}

void SplitCollector::maybe_load_checkpoint() {
  const ExchangeManifest m = exchange_->read();
  if (!m.checkpoint || m.checkpoint->id <= loaded_checkpoint_id_) return;
  const std::filesystem::path path = exchange_->root() / m.checkpoint->path;
  try {
    const auto bytes = read_file_bytes(path);
    if (content_hash(bytes) != m.checkpoint->hash) {
      throw IntegrityError("checkpoint hash mismatch: " + path.string());
    }
    auto [params, spec] = deserialize_params(bytes);
    if (!(spec == actor_.spec)) {
      throw DimensionError("published checkpoint spec does not match actor");
    }
    actor_.params = std::move(params);
    loaded_checkpoint_id_ = m.checkpoint->id;
    last_stats_ = *m.checkpoint;
    ++checkpoints_loaded_;
  } catch (const Error& e) {
    std::cerr << "[collector] skipping checkpoint " << m.checkpoint->id << ": "
              << e.what() << "\n";
  }
}

bool SplitCollector::run_one_episode() {
  if (env_steps_ >= cfg_.rl_total_env_steps) {
    if (!done_marked_) {
      exchange_->update([](ExchangeManifest& m) { m.collector_done = true; });
      done_marked_ = true;
    }
    return false;
  }
  maybe_load_checkpoint();

  const bool zero_base = cfg_.residual_mode == "full_action";
  ChunkedBasePolicy* base = zero_base ? nullptr : base_;
  const bool in_warmup = env_steps_ < cfg_.rl_warmup_steps;

  EpisodeRecord record;
  if (in_warmup) {
    WarmupStepPolicy policy(spec_, base, cfg_.rl_warmup_noise, &warmup_rng_);
    const std::uint64_t seed =
        derive_seed(cfg_.rl_seed, "warmup-scene", warmup_episode_index_++);
    record = episode_lifecycle(spec_, policy, seed);
  } else {
    ResidualStepPolicy policy(spec_, base, &actor_, cfg_.rl_explore_sigma,
                              &explore_rng_);
    const std::uint64_t seed = derive_seed(cfg_.rl_seed, "scene", episode_index_++);
    record = episode_lifecycle(spec_, policy, seed);
  }

  env_steps_ += record.outcome.length;
  ++episodes_;

  const long segment_id = segments_written_++;
  char name[32];
  std::snprintf(name, sizeof(name), "seg_%08ld.rfs", segment_id);
  const std::filesystem::path seg_path = exchange_->segments_dir() / name;
  write_segment_file(seg_path, record.transitions);
  const std::string hash = file_content_hash(seg_path);
  const long steps = record.outcome.length;
  exchange_->update([&](ExchangeManifest& m) {
    ExchangeSegmentEntry e;
    e.id = segment_id;
    e.path = "segments/" + std::string(name);
    e.hash = hash;
    e.env_steps = steps;
    m.segments.push_back(std::move(e));
  });

  if (metrics_) {
    const double wall =
        cfg_.metrics_wallclock_mode == "zero"
            ? 0.0
            : std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_)
                  .count();
    metrics_->write_row(env_steps_, episodes_, record.outcome.episode_return,
                        record.outcome.length, record.outcome.succeeded(),
                        last_stats_.mean_msbe, last_stats_.mean_q,
                        last_stats_.actor_loss, wall);
  }

  if (env_steps_ >= cfg_.rl_total_env_steps && !done_marked_) {
    exchange_->update([](ExchangeManifest& m) { m.collector_done = true; });
    done_marked_ = true;
  }
  return !done_marked_;
}

SplitLearner::SplitLearner(const EnvSpec& spec, const std::vector<DemoTrajectory>& demos,
                           const ChunkedBasePolicy* base_policy,
                           const TrainConfig& resolved, Exchange* exchange)
    : spec_(spec),
      cfg_(resolved),
      exchange_(exchange),
      store_(static_cast<std::size_t>(resolved.rl_online_capacity)),
      engine_(resolved, make_actor(spec, resolved), make_critics(spec, resolved),
              resolved.rl_seed) {
  if (cfg_.residual_mode == "full_action") {
    store_.load_offline_zero_base(demos, spec.action_dim);
  } else {
    if (!base_policy) {
      throw ValidationError("split learner: base policy required in residual mode");
    }
    store_.load_offline(demos, *base_policy);
  }
}

long SplitLearner::update_target() const {
  const long beyond = ingested_steps_ - cfg_.rl_warmup_steps;
  if (beyond <= 0) return 0;
  return static_cast<long>(std::floor(static_cast<double>(beyond) * cfg_.rl_utd));
}

void SplitLearner::publish_checkpoint() {
  if (engine_.critic_updates() == last_published_updates_) return;
  last_published_updates_ = engine_.critic_updates();
  const long id = ++checkpoint_id_;
  char name[32];
  std::snprintf(name, sizeof(name), "ckpt_%08ld.rft", id);
  const std::filesystem::path path = exchange_->checkpoints_dir() / name;
  const auto bytes = serialize_params(engine_.actor().params, engine_.actor().spec);
  atomic_write_file(path, bytes.data(), bytes.size());
  const std::string hash = content_hash(bytes);
  const auto stats = const_cast<UpdateEngine&>(engine_).take_interval_stats();
  exchange_->update([&](ExchangeManifest& m) {
    ExchangeCheckpointEntry e;
    e.id = id;
    e.path = "checkpoints/" + std::string(name);
    e.hash = hash;
    e.critic_updates = engine_.critic_updates();
    e.mean_msbe = stats.mean_msbe;
    e.mean_q = stats.mean_q;
    e.actor_loss = stats.actor_loss;
    m.checkpoint = std::move(e);
  });
}

void SplitLearner::poll_once() {
  if (finished_) return;
  const ExchangeManifest m = exchange_->read();

  // Ingest new segments in id order. Entries at or below last_ingested_id_
  // were already processed; re-listing them is normal (the manifest is
  // cumulative) but re-ingesting would be a bug, counted below.
  std::vector<const ExchangeSegmentEntry*> fresh;
  for (const auto& s : m.segments) {
    if (s.id > last_ingested_id_) fresh.push_back(&s);
  }
  std::sort(fresh.begin(), fresh.end(),
            [](const auto* a, const auto* b) { return a->id < b->id; });
  for (const auto* s : fresh) {
    if (s->id <= last_ingested_id_) {
      ++duplicate_ingests_;
      continue;
    }
    const std::filesystem::path path = exchange_->root() / s->path;
    try {
      const auto bytes = read_file_bytes(path);
      if (content_hash(bytes) != s->hash) {
        throw IntegrityError("segment hash mismatch: " + path.string());
      }
      const std::vector<Transition> transitions =
          parse_segment_bytes(bytes, path.string());
      for (const Transition& t : transitions) store_.online().push(t);
      ingested_steps_ += static_cast<long>(transitions.size());
      ++segments_ingested_;
    } catch (const Error& e) {
      std::cerr << "[learner] skipping segment " << s->id << ": " << e.what() << "\n";
      ++integrity_failures_;
    }
    last_ingested_id_ = s->id;
  }

  // Drain the accrued UTD budget.
  const long target = update_target();
  bool stalled = false;
  while (engine_.critic_updates() < target) {
    if (!engine_.try_update_cycle(store_)) {
      stalled = true;
      break;
    }
  }

  const bool drained = stalled || engine_.critic_updates() >= target;
  if (engine_.critic_updates() - last_published_updates_ >=
      cfg_.split_checkpoint_every_updates) {
    publish_checkpoint();
  }

  const bool all_ingested = m.collector_done && (m.segments.empty() ||
                                                 m.segments.back().id <= last_ingested_id_);
  if (all_ingested && drained) {
    publish_checkpoint();
    finished_ = true;
  }
}

SplitResult run_split(const EnvSpec& spec, ChunkedBasePolicy* base_policy,
                      const std::vector<DemoTrajectory>& demos,
                      const TrainConfig& cfg, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  Exchange exchange(out_dir / "exchange");
  MetricsWriter metrics(out_dir / "metrics.csv");

  SplitCollector collector(spec, base_policy, cfg, &exchange, &metrics);
  std::optional<SplitLearner> learner;
  if (cfg.split_learner_enabled) {
    // The learner gets a private base-policy copy; only parameter values are
    // shared, never cursor state.
    learner.emplace(spec, demos, base_policy, cfg, &exchange);
  }

  if (cfg.split_lockstep || !learner) {
    // Single-context alternation: the learner fully drains between episodes.
    while (collector.run_one_episode()) {
      if (learner) learner->poll_once();
    }
    while (learner && !learner->finished()) learner->poll_once();
  } else {
    std::thread learner_thread([&]() {
      while (!learner->finished()) {
        learner->poll_once();
        std::this_thread::sleep_for(std::chrono::milliseconds(cfg.split_poll_ms));
      }
    });
    while (collector.run_one_episode()) {
    }
    learner_thread.join();
  }

  SplitResult result;
  result.collector_env_steps = collector.env_steps();
  result.collector_episodes = collector.episodes();
  result.segments_written = collector.segments_written();
  result.checkpoints_loaded = collector.checkpoints_loaded();
  if (learner) {
    result.segments_ingested = learner->segments_ingested();
    result.duplicate_ingests = learner->duplicate_ingests();
    result.integrity_failures = learner->integrity_failures();
    result.learner_ingested_steps = learner->ingested_steps();
    result.train.actor = learner->engine().actor();
    result.train.critics = learner->engine().critics();
    result.train.critic_updates = learner->engine().critic_updates();
    result.train.actor_updates = learner->engine().actor_updates();
    result.train.max_abs_q = learner->engine().max_abs_q();
  } else {
    result.train.actor = make_actor(spec, cfg);
    result.train.critics = make_critics(spec, cfg);
  }
  result.train.env_steps = collector.env_steps();
  result.train.episodes = collector.episodes();
  result.train.warmup_steps = cfg.rl_warmup_steps;
  if (!out_dir.empty()) {
    save_params_file(out_dir / "actor.rft", result.train.actor.params,
                     result.train.actor.spec);
  }
  return result;
}

}  // namespace resfit
