// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <string>

namespace resfit {

/// Shortest round-trip decimal rendering of a double (also used by config and
/// CSV output so identical runs produce identical bytes).
std::string format_double(double v);

/// Per-episode training metrics CSV. Columns are fixed:
/// env_steps,episodes,episode_return,episode_length,success,mean_msbe,mean_q,
/// actor_loss,wallclock_s
class MetricsWriter {
 public:
  MetricsWriter() = default;
  explicit MetricsWriter(const std::filesystem::path& path);

  void write_row(long env_steps, long episodes, double episode_return,
                 int episode_length, bool success, double mean_msbe, double mean_q,
                 double actor_loss, double wallclock_s);

  void flush();
  bool open() const { return out_.is_open(); }

  static const char* header();

 private:
  std::ofstream out_;
};

}  // namespace resfit
