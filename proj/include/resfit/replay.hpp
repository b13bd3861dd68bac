// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "resfit/bc.hpp"
#include "resfit/demos.hpp"
#include "resfit/rng.hpp"

namespace resfit {

/// One environment step as stored in replay: the base action, the executed
/// full action, and the base action at the next state (needed by TD targets).
struct Transition {
  std::vector<double> obs;
  std::vector<double> base_action;
  std::vector<double> full_action;
  std::vector<double> next_obs;
  std::vector<double> next_base_action;
  double reward = 0.0;  // sparse: 0 or 1
  bool done = false;
  std::uint64_t episode_id = 0;
  int step_index = 0;
};

/// n-step view anchored at one head transition. rn sums the discounted
/// rewards of the first effective_n steps; when the episode terminates within
/// the window the bootstrap term is dropped.
struct NStepSample {
  std::vector<double> obs;
  std::vector<double> base_action;
  std::vector<double> full_action;
  double reward = 0.0;
  bool done = false;
  double rn = 0.0;
  std::vector<double> lookahead_obs;
  std::vector<double> lookahead_base;
  int effective_n = 0;
  bool terminal_within = false;
};

/// Append-only (offline) or ring (online) transition storage with n-step head
/// resolution. Heads whose lookahead does not yet exist (the tail of the
/// episode currently being written) or can never exist (episodes cut short by
/// a collection stop) are unsampleable.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 0);  // 0 = unbounded

  /// Appends a transition, evicting the oldest at capacity. A new episode id
  /// is assigned after a done flag or when step_index restarts at 0.
  void push(Transition t);

  std::size_t size() const { return slots_.size(); }
  bool empty() const { return slots_.empty(); }
  std::uint64_t begin_index() const { return begin_; }
  std::uint64_t end_index() const { return end_; }
  const Transition& at(std::uint64_t global_index) const;

  /// Number of heads currently sampleable for the given n.
  std::size_t sampleable_count(int n) const;

  /// (effective_n, terminal_within) for a head, or nullopt when unsampleable.
  std::optional<std::pair<int, bool>> resolve(std::uint64_t head, int n) const;

  /// Uniform draw over sampleable heads.
  std::optional<std::uint64_t> sample_head(int n, Rng& rng) const;

  NStepSample make_sample(std::uint64_t head, int n, double gamma) const;

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  /// Content hash over all stored transitions, for freeze/immutability checks.
  std::uint64_t content_hash() const;

 private:
  std::deque<Transition> slots_;
  std::size_t capacity_ = 0;
  std::uint64_t begin_ = 0;
  std::uint64_t end_ = 0;
  std::uint64_t next_episode_id_ = 0;
  bool last_done_ = true;
  std::uint64_t open_episode_start_ = 0;
  // Episodes that ended without a done flag; their final n-1 heads are dead.
  std::deque<std::pair<std::uint64_t, std::uint64_t>> broken_extents_;
  bool frozen_ = false;
};

/// Paired offline (frozen demos) and online buffers.
class ReplayStore {
 public:
  explicit ReplayStore(std::size_t online_capacity = 200000)
      : online_(online_capacity) {}

  ReplayBuffer& offline() { return offline_; }
  const ReplayBuffer& offline() const { return offline_; }
  ReplayBuffer& online() { return online_; }
  const ReplayBuffer& online() const { return online_; }

  /// Converts successful demos into transitions. full_action is the demo
  /// action; base_action fields replay the frozen base policy's chunk
  /// schedule over the demo's observations. The terminal step of each demo
  /// carries reward 1 and done. Freezes the offline buffer afterwards.
  void load_offline(const std::vector<DemoTrajectory>& demos,
                    const ChunkedBasePolicy& base_policy);

  /// Variant for full_action mode: base-action fields are all zero.
  void load_offline_zero_base(const std::vector<DemoTrajectory>& demos,
                              std::size_t action_dim);

  std::uint64_t offline_hash() const { return offline_.content_hash(); }

 private:
  ReplayBuffer offline_;
  ReplayBuffer online_;
};

/// Draws exactly batch_size/2 n-step samples from each buffer, uniform over
/// sampleable heads (offline draws first). Returns nullopt when either buffer
/// has fewer than batch_size/2 sampleable heads; the caller waits.
std::optional<std::vector<NStepSample>> sample_symmetric(const ReplayStore& store,
                                                         int batch_size, int n,
                                                         double gamma, Rng& rng);

/// Uniform n-step batch from a single buffer (the demos-off ablation path).
std::optional<std::vector<NStepSample>> sample_uniform(const ReplayBuffer& buffer,
                                                       int count, int n, double gamma,
                                                       Rng& rng);

/// Binary segment files for online-buffer persistence (magic RFS1,
/// little-endian doubles, same float encoding as checkpoints).
void write_segment_file(const std::filesystem::path& path,
                        std::span<const Transition> transitions);
std::vector<Transition> parse_segment_bytes(const std::vector<std::uint8_t>& bytes,
                                            const std::string& context);
std::vector<Transition> read_segment_file(const std::filesystem::path& path);

}  // namespace resfit
