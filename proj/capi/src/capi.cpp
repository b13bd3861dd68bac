// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#include "resfit_c.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "resfit/commands.hpp"
#include "resfit/config.hpp"
#include "resfit/errors.hpp"

namespace {

thread_local std::string g_last_error;

resfit::TrainConfig* unwrap(resfit_config* c) {
  return reinterpret_cast<resfit::TrainConfig*>(c);
}

const resfit::TrainConfig* unwrap(const resfit_config* c) {
  return reinterpret_cast<const resfit::TrainConfig*>(c);
}

resfit_config* wrap(resfit::TrainConfig* c) {
  return reinterpret_cast<resfit_config*>(c);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

/// Runs fn, translating exceptions into status codes + the thread-local
/// message. fn returns the summary JSON (possibly empty).
template <typename Fn>
resfit_status guarded(char** summary_json, Fn&& fn) {
  g_last_error.clear();
  try {
    const std::string summary = fn();
    if (summary_json) *summary_json = dup_string(summary);
    return RESFIT_OK;
  } catch (const resfit::CalibrationError& e) {
    g_last_error = e.what();
    return RESFIT_ERR_CALIBRATION;
  } catch (const resfit::DivergedError& e) {
    g_last_error = e.what();
    return RESFIT_ERR_DIVERGED;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return RESFIT_ERR_USAGE;
  }
}

resfit_status require(bool ok, const char* message) {
  if (!ok) {
    g_last_error = message;
    return RESFIT_ERR_USAGE;
  }
  return RESFIT_OK;
}

}  // namespace

extern "C" {

resfit_status resfit_config_create(resfit_config** out) {
  if (require(out != nullptr, "out is NULL") != RESFIT_OK) return RESFIT_ERR_USAGE;
  return guarded(nullptr, [&]() {
    *out = wrap(new resfit::TrainConfig(resfit::TrainConfig::defaults()));
    return std::string();
  });
}

resfit_status resfit_config_load(const char* path, resfit_config** out) {
  if (require(path && out, "path or out is NULL") != RESFIT_OK) {
    return RESFIT_ERR_USAGE;
  }
  return guarded(nullptr, [&]() {
    *out = wrap(new resfit::TrainConfig(resfit::TrainConfig::load_file(path)));
    return std::string();
  });
}

resfit_status resfit_config_set(resfit_config* config, const char* key,
                                const char* value) {
  if (require(config && key && value, "config, key or value is NULL") != RESFIT_OK) {
    return RESFIT_ERR_USAGE;
  }
  return guarded(nullptr, [&]() {
    unwrap(config)->apply(key, value);
    return std::string();
  });
}

resfit_status resfit_config_get(const resfit_config* config, const char* key,
                                char* buf, size_t buf_len) {
  if (require(config && key && buf && buf_len > 0, "bad arguments") != RESFIT_OK) {
    return RESFIT_ERR_USAGE;
  }
  return guarded(nullptr, [&]() {
    const std::string value = unwrap(config)->get(key);
    std::strncpy(buf, value.c_str(), buf_len - 1);
    buf[buf_len - 1] = '\0';
    return std::string();
  });
}

void resfit_config_free(resfit_config* config) { delete unwrap(config); }

resfit_status resfit_run_demos(const resfit_config* config, const char* out_dir,
                               char** summary_json) {
  if (require(config && out_dir, "config or out_dir is NULL") != RESFIT_OK) {
    return RESFIT_ERR_USAGE;
  }
  return guarded(summary_json,
                 [&]() { return resfit::cmd_demos(*unwrap(config), out_dir); });
}

resfit_status resfit_run_bc(const resfit_config* config, const char* out_dir,
                            char** summary_json) {
  if (require(config && out_dir, "config or out_dir is NULL") != RESFIT_OK) {
    return RESFIT_ERR_USAGE;
  }
  return guarded(summary_json,
                 [&]() { return resfit::cmd_bc(*unwrap(config), out_dir); });
}

resfit_status resfit_run_rl(const resfit_config* config, const char* out_dir,
                            char** summary_json) {
  if (require(config && out_dir, "config or out_dir is NULL") != RESFIT_OK) {
    return RESFIT_ERR_USAGE;
  }
  return guarded(summary_json,
                 [&]() { return resfit::cmd_rl(*unwrap(config), out_dir); });
}

resfit_status resfit_run_eval(const resfit_config* config, const char* checkpoint_a,
                              const char* checkpoint_b, const char* out_dir,
                              char** summary_json) {
  if (require(config && checkpoint_a && out_dir, "bad arguments") != RESFIT_OK) {
    return RESFIT_ERR_USAGE;
  }
  return guarded(summary_json, [&]() {
    std::optional<std::filesystem::path> b;
    if (checkpoint_b && checkpoint_b[0] != '\0') b = checkpoint_b;
    return resfit::cmd_eval(*unwrap(config), checkpoint_a, b, out_dir);
  });
}

resfit_status resfit_run_ablate(const resfit_config* config, const char* grid_spec,
                                const char* out_dir, char** summary_json) {
  if (require(config && grid_spec && out_dir, "bad arguments") != RESFIT_OK) {
    return RESFIT_ERR_USAGE;
  }
  return guarded(summary_json, [&]() {
    return resfit::cmd_ablate(*unwrap(config), grid_spec, out_dir);
  });
}

const char* resfit_last_error(void) { return g_last_error.c_str(); }

void resfit_string_free(char* s) { std::free(s); }

const char* resfit_version(void) { return "0.1.0"; }

}  // extern "C"
