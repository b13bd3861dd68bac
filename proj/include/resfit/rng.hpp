// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace resfit {

/// Deterministic random stream. Wraps std::mt19937_64 but implements the
/// uniform/normal transforms by hand so draws are identical across standard
/// library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller. Consumes exactly two engine draws.
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  double normal(double mu, double sigma) { return mu + sigma * normal(); }

  /// Unbiased integer in [0, n) via rejection.
  std::uint64_t below(std::uint64_t n);

  std::string save_state() const;
  void load_state(const std::string& text);

 private:
  std::mt19937_64 engine_;
};

/// Seed derivation for named streams. All randomness in a run descends from a
/// single root seed through these, so any component can be replayed alone.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream_name);
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream_name,
                          std::uint64_t index);

/// splitmix64 mixing step, also used as a cheap hash finalizer.
std::uint64_t splitmix64(std::uint64_t x);

/// FNV-1a over a byte range; the content hash used for sealed artifacts.
std::uint64_t fnv1a64(const void* data, std::size_t len,
                      std::uint64_t seed = 14695981039346656037ull);

}  // namespace resfit
