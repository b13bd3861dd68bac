// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#include "resfit/metrics.hpp"

#include <charconv>

#include "resfit/errors.hpp"

namespace resfit {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw Error("cannot open metrics file " + path.string());
  out_ << header() << "\n";
}

const char* MetricsWriter::header() {
  return "env_steps,episodes,episode_return,episode_length,success,mean_msbe,mean_q,"
         "actor_loss,wallclock_s";
}

void MetricsWriter::write_row(long env_steps, long episodes, double episode_return,
                              int episode_length, bool success, double mean_msbe,
                              double mean_q, double actor_loss, double wallclock_s) {
  if (!out_.is_open()) return;
  out_ << env_steps << ',' << episodes << ',' << format_double(episode_return) << ','
       << episode_length << ',' << (success ? 1 : 0) << ',' << format_double(mean_msbe)
       << ',' << format_double(mean_q) << ',' << format_double(actor_loss) << ','
       << format_double(wallclock_s) << "\n";
}

void MetricsWriter::flush() {
  if (out_.is_open()) out_.flush();
}

}  // namespace resfit
