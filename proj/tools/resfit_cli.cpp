// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0
//
// resfit command-line interface. Talks to the core exclusively through the
// shared-library C API.

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "resfit_c.h"

namespace {

struct ConfigHandle {
  resfit_config* ptr = nullptr;
  ~ConfigHandle() {
    if (ptr) resfit_config_free(ptr);
  }
};

int fail(resfit_status status) {
  const char* msg = resfit_last_error();
  if (msg && msg[0]) std::fprintf(stderr, "error: %s\n", msg);
  return static_cast<int>(status);
}

int load_config(const std::string& path, const std::vector<std::string>& overrides,
                ConfigHandle& handle) {
  resfit_status status;
  if (path.empty()) {
    status = resfit_config_create(&handle.ptr);
  } else {
    status = resfit_config_load(path.c_str(), &handle.ptr);
  }
  if (status != RESFIT_OK) return fail(status);
  for (const std::string& kv : overrides) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
      return 1;
    }
    std::string key = kv.substr(0, eq);
    std::string value = kv.substr(eq + 1);
    while (!key.empty() && key.back() == ' ') key.pop_back();
    while (!value.empty() && value.front() == ' ') value.erase(value.begin());
    status = resfit_config_set(handle.ptr, key.c_str(), value.c_str());
    if (status != RESFIT_OK) return fail(status);
  }
  return 0;
}

int print_summary(char* summary) {
  if (summary) {
    std::printf("%s\n", summary);
    resfit_string_free(summary);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"resfit: residual off-policy fine-tuning of chunked BC policies"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(resfit_version()));

  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir = "runs/default";

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "config file (key = value lines)");
    cmd->add_option("--set", overrides, "override, repeatable: --set key=value");
    cmd->add_option("--out", out_dir, "output directory");
  };

  CLI::App* demos = app.add_subcommand("demos", "collect scripted-expert demos");
  add_common(demos);

  CLI::App* bc = app.add_subcommand("bc", "train the chunked base policy");
  add_common(bc);

  CLI::App* rl = app.add_subcommand("rl", "residual RL fine-tuning (or baselines)");
  add_common(rl);

  CLI::App* eval = app.add_subcommand("eval", "evaluate one checkpoint or A/B two");
  add_common(eval);
  std::string ckpt_a, ckpt_b;
  eval->add_option("--ckpt", ckpt_a, "checkpoint to evaluate")->required();
  eval->add_option("--ckpt-b", ckpt_b, "second checkpoint for paired A/B");

  CLI::App* ablate = app.add_subcommand("ablate", "grid sweep over config keys");
  add_common(ablate);
  std::string grid;
  ablate->add_option("--grid", grid, "grid spec: key=v1,v2;key2=v3,...")->required();

  CLI11_PARSE(app, argc, argv);

  ConfigHandle config;
  if (int rc = load_config(config_path, overrides, config); rc != 0) return rc;

  char* summary = nullptr;
  resfit_status status = RESFIT_OK;
  if (demos->parsed()) {
    status = resfit_run_demos(config.ptr, out_dir.c_str(), &summary);
  } else if (bc->parsed()) {
    status = resfit_run_bc(config.ptr, out_dir.c_str(), &summary);
  } else if (rl->parsed()) {
    status = resfit_run_rl(config.ptr, out_dir.c_str(), &summary);
  } else if (eval->parsed()) {
    status = resfit_run_eval(config.ptr, ckpt_a.c_str(),
                             ckpt_b.empty() ? nullptr : ckpt_b.c_str(),
                             out_dir.c_str(), &summary);
  } else if (ablate->parsed()) {
    status = resfit_run_ablate(config.ptr, grid.c_str(), out_dir.c_str(), &summary);
  }

  if (status != RESFIT_OK) {
    if (summary) resfit_string_free(summary);
    return fail(status);
  }
  return print_summary(summary);
}
