// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "resfit/runtime.hpp"
#include "resfit/trainer.hpp"

namespace resfit {

struct ExchangeCheckpointEntry {
  long id = 0;
  std::string path;  // relative to the exchange root
  std::string hash;
  long critic_updates = 0;
  double mean_msbe = 0.0;
  double mean_q = 0.0;
  double actor_loss = 0.0;
};

struct ExchangeSegmentEntry {
  long id = 0;
  std::string path;  // relative to the exchange root
  std::string hash;
  long env_steps = 0;
};

/// The single JSON contract between collector and learner: versions strictly
/// increase, referenced files are immutable once listed.
struct ExchangeManifest {
  long version = 0;
  std::optional<ExchangeCheckpointEntry> checkpoint;
  std::vector<ExchangeSegmentEntry> segments;
  bool collector_done = false;
};

/// Filesystem exchange: atomic-rename manifest updates guarded by a file
/// lock, so the two contexts share no mutable memory.
class Exchange {
 public:
  explicit Exchange(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path segments_dir() const { return root_ / "segments"; }
  std::filesystem::path checkpoints_dir() const { return root_ / "checkpoints"; }

  /// Current manifest; empty manifest when none has been written yet.
  ExchangeManifest read() const;

  /// Locked read-modify-write; bumps the version and renames into place.
  void update(const std::function<void(ExchangeManifest&)>& mutate);

 private:
  std::filesystem::path root_;
};

/// Collector context: runs episodes with the latest published actor
/// checkpoint (warmup noise first), seals one segment per episode and lists
/// it in the manifest. Never blocks on the learner.
class SplitCollector {
 public:
  SplitCollector(const EnvSpec& spec, ChunkedBasePolicy* base_policy,
                 const TrainConfig& resolved, Exchange* exchange,
                 MetricsWriter* metrics);

  /// Runs one episode and seals its segment. Returns false once the step
  /// budget is reached (after marking the manifest collector_done).
  bool run_one_episode();

  long env_steps() const { return env_steps_; }
  long episodes() const { return episodes_; }
  long segments_written() const { return segments_written_; }
  long checkpoints_loaded() const { return checkpoints_loaded_; }

 private:
  void maybe_load_checkpoint();

  EnvSpec spec_;
  ChunkedBasePolicy* base_;
  TrainConfig cfg_;
  Exchange* exchange_;
  MetricsWriter* metrics_;
  ResidualActor actor_;
  Rng warmup_rng_;
  Rng explore_rng_;
  long env_steps_ = 0;
  long episodes_ = 0;
  long segments_written_ = 0;
  long checkpoints_loaded_ = 0;
  long loaded_checkpoint_id_ = -1;
  ExchangeCheckpointEntry last_stats_;
  std::uint64_t warmup_episode_index_ = 0;
  std::uint64_t episode_index_ = 0;
  bool done_marked_ = false;
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

/// Learner context: ingests sealed segments exactly once (hash-checked) into
/// its own replay store, drains the accrued UTD budget, and publishes actor
/// checkpoints atomically.
class SplitLearner {
 public:
  SplitLearner(const EnvSpec& spec, const std::vector<DemoTrajectory>& demos,
               const ChunkedBasePolicy* base_policy, const TrainConfig& resolved,
               Exchange* exchange);

  /// Ingest whatever is new, drain the update budget, maybe publish.
  void poll_once();

  bool finished() const { return finished_; }
  void publish_checkpoint();

  const UpdateEngine& engine() const { return engine_; }
  long ingested_steps() const { return ingested_steps_; }
  long segments_ingested() const { return segments_ingested_; }
  long duplicate_ingests() const { return duplicate_ingests_; }
  long integrity_failures() const { return integrity_failures_; }

 private:
  long update_target() const;

  EnvSpec spec_;
  TrainConfig cfg_;
  Exchange* exchange_;
  ReplayStore store_;
  UpdateEngine engine_;
  long ingested_steps_ = 0;
  long segments_ingested_ = 0;
  long duplicate_ingests_ = 0;
  long integrity_failures_ = 0;
  long last_ingested_id_ = -1;
  long last_published_updates_ = -1;
  long checkpoint_id_ = 0;
  bool finished_ = false;
};

struct SplitResult {
  TrainResult train;
  long collector_env_steps = 0;
  long collector_episodes = 0;
  long segments_written = 0;
  long segments_ingested = 0;
  long duplicate_ingests = 0;
  long integrity_failures = 0;
  long learner_ingested_steps = 0;
  long checkpoints_loaded = 0;
};

/// Actor/learner split run. Lockstep mode alternates the two roles in one
/// context (the learner fully drains between episodes); otherwise the two
/// roles run in concurrent contexts communicating only through the exchange
/// directory. Outputs mirror train_resfit.
SplitResult run_split(const EnvSpec& spec, ChunkedBasePolicy* base_policy,
                      const std::vector<DemoTrajectory>& demos,
                      const TrainConfig& resolved,
                      const std::filesystem::path& out_dir);

}  // namespace resfit
