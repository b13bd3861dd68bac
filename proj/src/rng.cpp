// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#include "resfit/rng.hpp"

#include <cmath>
#include <sstream>

namespace resfit {

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) return 0;
  const std::uint64_t bound = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v = next_u64();
  while (v >= bound) v = next_u64();
  return v % n;
}

std::string Rng::save_state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::load_state(const std::string& text) {
  std::istringstream is(text);
  is >> engine_;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view stream_name) {
  const std::uint64_t name_hash = fnv1a64(stream_name.data(), stream_name.size());
  return splitmix64(root ^ name_hash);
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view stream_name,
                          std::uint64_t index) {
  return splitmix64(derive_seed(root, stream_name) + index);
}

}  // namespace resfit
