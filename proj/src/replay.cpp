// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#include "resfit/replay.hpp"

#include <cmath>
#include <cstring>

#include "resfit/checkpoint.hpp"
#include "resfit/errors.hpp"

namespace resfit {

void ReplayBuffer::push(Transition t) {
  if (frozen_) throw Error("replay buffer is frozen");
  if (t.reward != 0.0 && t.reward != 1.0) {
    throw ValidationError("transition reward must be 0 or 1");
  }
  if (!slots_.empty()) {
    const Transition& last = slots_.back();
    if (t.obs.size() != last.obs.size() ||
        t.full_action.size() != last.full_action.size()) {
      throw DimensionError("transition dimensions do not match buffer contents");
    }
  }

  const bool new_episode = slots_.empty() || last_done_ || t.step_index == 0;
  if (new_episode) {
    if (!slots_.empty() && !last_done_) {
      // Previous episode was cut short; its trailing heads can never resolve.
      broken_extents_.emplace_back(open_episode_start_, end_ - 1);
    }
    open_episode_start_ = end_;
    t.episode_id = next_episode_id_++;
  } else {
    t.episode_id = slots_.back().episode_id;
    if (t.obs != slots_.back().next_obs) {
      throw ValidationError("transition obs does not stitch to previous next_obs");
    }
  }
  last_done_ = t.done;
  slots_.push_back(std::move(t));
  ++end_;

  if (capacity_ > 0 && slots_.size() > capacity_) {
    slots_.pop_front();
    ++begin_;
    while (!broken_extents_.empty() && broken_extents_.front().second < begin_) {
      broken_extents_.pop_front();
    }
  }
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}

const Transition& ReplayBuffer::at(std::uint64_t global_index) const {
  if (global_index < begin_ || global_index >= end_) {
    throw Error("replay index out of range");
  }
  return slots_[static_cast<std::size_t>(global_index - begin_)];
}

std::optional<std::pair<int, bool>> ReplayBuffer::resolve(std::uint64_t head,
                                                          int n) const {
  if (head < begin_ || head >= end_) return std::nullopt;
  const std::uint64_t ep = at(head).episode_id;
  for (int i = 0; i < n; ++i) {
    const std::uint64_t g = head + static_cast<std::uint64_t>(i);
    if (g >= end_) return std::nullopt;  // lookahead not written yet (or never)
    const Transition& t = at(g);
    if (t.episode_id != ep) return std::nullopt;  // episode was cut short
    if (t.done) return std::make_pair(i + 1, true);
  }
  return std::make_pair(n, false);
}

std::size_t ReplayBuffer::sampleable_count(int n) const {
  std::size_t dead = 0;
  const auto tail_dead = [&](std::uint64_t first, std::uint64_t last_plus_one) {
    const std::uint64_t lo = std::max(first, begin_);
    if (last_plus_one <= lo) return std::size_t{0};
    const std::size_t len = static_cast<std::size_t>(last_plus_one - lo);
    return std::min(len, static_cast<std::size_t>(n - 1));
  };
  for (const auto& [first, last] : broken_extents_) dead += tail_dead(first, last + 1);
  if (!slots_.empty() && !last_done_) dead += tail_dead(open_episode_start_, end_);
  return slots_.size() - dead;
}

std::optional<std::uint64_t> ReplayBuffer::sample_head(int n, Rng& rng) const {
  if (sampleable_count(n) == 0) return std::nullopt;
  for (int attempt = 0; attempt < 1000000; ++attempt) {
    const std::uint64_t g = begin_ + rng.below(end_ - begin_);
    if (resolve(g, n)) return g;
  }
  throw Error("replay sampling failed to find a sampleable head");
}

NStepSample ReplayBuffer::make_sample(std::uint64_t head, int n, double gamma) const {
  const auto resolved = resolve(head, n);
  if (!resolved) throw Error("make_sample on unsampleable head");
  const auto [m, terminal_within] = *resolved;

  const Transition& h = at(head);
  NStepSample s;
  s.obs = h.obs;
  s.base_action = h.base_action;
  s.full_action = h.full_action;
  s.reward = h.reward;
  s.done = h.done;
  s.effective_n = m;
  s.terminal_within = terminal_within;
  double discount = 1.0;
  double rn = 0.0;
  for (int i = 0; i < m; ++i) {
    rn += discount * at(head + static_cast<std::uint64_t>(i)).reward;
    discount *= gamma;
  }
  s.rn = rn;
  const Transition& tail = at(head + static_cast<std::uint64_t>(m - 1));
  s.lookahead_obs = tail.next_obs;
  s.lookahead_base = tail.next_base_action;
  return s;
}

std::uint64_t ReplayBuffer::content_hash() const {
  std::uint64_t h = 14695981039346656037ull;
  const auto mix_vec = [&h](const std::vector<double>& v) {
    const std::size_t n = v.size();
    h = fnv1a64(&n, sizeof(n), h);
    h = fnv1a64(v.data(), v.size() * sizeof(double), h);
  };
  for (const Transition& t : slots_) {
    mix_vec(t.obs);
    mix_vec(t.base_action);
    mix_vec(t.full_action);
    mix_vec(t.next_obs);
    mix_vec(t.next_base_action);
    h = fnv1a64(&t.reward, sizeof(t.reward), h);
    const std::uint8_t d = t.done ? 1 : 0;
    h = fnv1a64(&d, 1, h);
  }
  return h;
}

namespace {

void push_demo_transitions(ReplayBuffer& buffer, const DemoTrajectory& demo,
                           const std::vector<std::vector<double>>& base_actions) {
  const std::size_t len = demo.length();
  for (std::size_t t = 0; t < len; ++t) {
    Transition tr;
    tr.obs = demo.obs[t];
    tr.base_action = base_actions[t];
    tr.full_action = demo.act[t];
    tr.next_obs = demo.obs[t + 1];
    tr.next_base_action = base_actions[t + 1];
    tr.reward = t + 1 == len ? 1.0 : 0.0;
    tr.done = t + 1 == len;
    tr.step_index = static_cast<int>(t);
    buffer.push(std::move(tr));
  }
}

}  // namespace

void ReplayStore::load_offline(const std::vector<DemoTrajectory>& demos,
                               const ChunkedBasePolicy& base_policy) {
  ChunkedBasePolicy schedule = base_policy;  // private cursor; params shared value
  for (const auto& demo : demos) {
    if (!demo.success || demo.length() == 0) continue;
    const std::size_t len = demo.length();
    schedule.begin_episode();
    std::vector<std::vector<double>> base_actions(len + 1);
    for (std::size_t t = 0; t <= len; ++t) {
      base_actions[t] = schedule.act(demo.obs[t]);
    }
    push_demo_transitions(offline_, demo, base_actions);
  }
  offline_.freeze();
}

void ReplayStore::load_offline_zero_base(const std::vector<DemoTrajectory>& demos,
                                         std::size_t action_dim) {
  for (const auto& demo : demos) {
    if (!demo.success || demo.length() == 0) continue;
    const std::vector<std::vector<double>> base_actions(
        demo.length() + 1, std::vector<double>(action_dim, 0.0));
    push_demo_transitions(offline_, demo, base_actions);
  }
  offline_.freeze();
}

std::optional<std::vector<NStepSample>> sample_symmetric(const ReplayStore& store,
                                                         int batch_size, int n,
                                                         double gamma, Rng& rng) {
  if (batch_size < 2 || batch_size % 2 != 0) {
    throw ValidationError("sample_symmetric: batch_size must be even and >= 2");
  }
  const std::size_t half = static_cast<std::size_t>(batch_size) / 2;
  if (store.offline().sampleable_count(n) < half ||
      store.online().sampleable_count(n) < half) {
    return std::nullopt;
  }
  std::vector<NStepSample> batch;
  batch.reserve(static_cast<std::size_t>(batch_size));
  for (const ReplayBuffer* buffer : {&store.offline(), &store.online()}) {
    for (std::size_t i = 0; i < half; ++i) {
      const auto head = buffer->sample_head(n, rng);
      if (!head) return std::nullopt;
      batch.push_back(buffer->make_sample(*head, n, gamma));
    }
  }
  return batch;
}

std::optional<std::vector<NStepSample>> sample_uniform(const ReplayBuffer& buffer,
                                                       int count, int n, double gamma,
                                                       Rng& rng) {
  if (buffer.sampleable_count(n) < static_cast<std::size_t>(count)) {
    return std::nullopt;
  }
  std::vector<NStepSample> batch;
  batch.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const auto head = buffer.sample_head(n, rng);
    if (!head) return std::nullopt;
    batch.push_back(buffer.make_sample(*head, n, gamma));
  }
  return batch;
}

namespace {

constexpr char kSegmentMagic[4] = {'R', 'F', 'S', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  put_u64(out, v);
}

void put_vec(std::vector<std::uint8_t>& out, const std::vector<double>& v) {
  for (double d : v) put_f64(out, d);
}

struct SegmentReader {
  const std::vector<std::uint8_t>& bytes;
  std::size_t pos = 0;

  void need(std::size_t n) {
    if (pos + n > bytes.size()) {
      throw TruncatedStreamError("segment file truncated");
    }
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes[pos++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(bytes[pos++]) << (8 * i);
    return v;
  }
  double f64() {
    const std::uint64_t v = u64();
    double d;
    std::memcpy(&d, &v, 8);
    return d;
  }
  std::uint8_t u8() {
    need(1);
    return bytes[pos++];
  }
  std::vector<double> vec(std::size_t n) {
    std::vector<double> v(n);
    for (double& d : v) d = f64();
    return v;
  }
};

}  // namespace

void write_segment_file(const std::filesystem::path& path,
                        std::span<const Transition> transitions) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kSegmentMagic, kSegmentMagic + 4);
  const std::uint32_t obs_dim =
      transitions.empty() ? 0 : static_cast<std::uint32_t>(transitions[0].obs.size());
  const std::uint32_t act_dim =
      transitions.empty() ? 0
                          : static_cast<std::uint32_t>(transitions[0].full_action.size());
  put_u32(out, obs_dim);
  put_u32(out, act_dim);
  put_u64(out, transitions.size());
  for (const Transition& t : transitions) {
    put_vec(out, t.obs);
    put_vec(out, t.base_action);
    put_vec(out, t.full_action);
    put_vec(out, t.next_obs);
    put_vec(out, t.next_base_action);
    put_f64(out, t.reward);
    out.push_back(t.done ? 1 : 0);
    put_u64(out, t.episode_id);
    put_u32(out, static_cast<std::uint32_t>(t.step_index));
  }
  atomic_write_file(path, out.data(), out.size());
}

std::vector<Transition> read_segment_file(const std::filesystem::path& path) {
  return parse_segment_bytes(read_file_bytes(path), path.string());
}

std::vector<Transition> parse_segment_bytes(const std::vector<std::uint8_t>& bytes,
                                            const std::string& context) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kSegmentMagic, 4) != 0) {
    throw VersionMismatchError("segment magic is not RFS1: " + context);
  }
  SegmentReader r{bytes, 4};
  const std::uint32_t obs_dim = r.u32();
  const std::uint32_t act_dim = r.u32();
  const std::uint64_t count = r.u64();
  std::vector<Transition> out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    Transition t;
    t.obs = r.vec(obs_dim);
    t.base_action = r.vec(act_dim);
    t.full_action = r.vec(act_dim);
    t.next_obs = r.vec(obs_dim);
    t.next_base_action = r.vec(act_dim);
    t.reward = r.f64();
    t.done = r.u8() != 0;
    t.episode_id = r.u64();
    t.step_index = static_cast<int>(r.u32());
    out.push_back(std::move(t));
  }
  if (r.pos != bytes.size()) {
    throw IntegrityError("segment file has trailing bytes: " + context);
  }
  return out;
}

}  // namespace resfit
