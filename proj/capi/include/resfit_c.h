/*
 * SPDX-FileCopyrightText: 2026 resfit contributors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the resfit library: residual off-policy fine-tuning of
 * action-chunked behavior-cloned policies. Handles are opaque; every function
 * returns a status code and the per-thread message from resfit_last_error()
 * describes the most recent failure.
 */

#ifndef RESFIT_C_H
#define RESFIT_C_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum resfit_status {
  RESFIT_OK = 0,
  RESFIT_ERR_USAGE = 1,       /* bad arguments, config or input files */
  RESFIT_ERR_CALIBRATION = 2, /* scripted expert cannot produce demos */
  RESFIT_ERR_DIVERGED = 3     /* training produced non-finite values */
} resfit_status;

typedef struct resfit_config resfit_config;

/* Configuration ----------------------------------------------------------- */

/* Creates a config holding the library defaults. */
resfit_status resfit_config_create(resfit_config** out);

/* Loads a flat `key = value` config file ('#' comments). */
resfit_status resfit_config_load(const char* path, resfit_config** out);

/* Applies one override; unknown keys are rejected. */
resfit_status resfit_config_set(resfit_config* config, const char* key,
                                const char* value);

/* Reads one key's current value into buf (NUL-terminated, truncating). */
resfit_status resfit_config_get(const resfit_config* config, const char* key,
                                char* buf, size_t buf_len);

void resfit_config_free(resfit_config* config);

/* Commands ----------------------------------------------------------------
 * Each command writes its artifacts under out_dir and, when summary_json is
 * non-NULL, stores a malloc'd JSON summary there (free with
 * resfit_string_free). */

resfit_status resfit_run_demos(const resfit_config* config, const char* out_dir,
                               char** summary_json);

resfit_status resfit_run_bc(const resfit_config* config, const char* out_dir,
                            char** summary_json);

resfit_status resfit_run_rl(const resfit_config* config, const char* out_dir,
                            char** summary_json);

/* checkpoint_b may be NULL for a single-policy evaluation. */
resfit_status resfit_run_eval(const resfit_config* config, const char* checkpoint_a,
                              const char* checkpoint_b, const char* out_dir,
                              char** summary_json);

/* grid_spec: "key=v1,v2;key2=v3,..." over utd, n_step, use_layernorm,
 * demos_in_buffer, residual_mode (or any full config key). */
resfit_status resfit_run_ablate(const resfit_config* config, const char* grid_spec,
                                const char* out_dir, char** summary_json);

/* Diagnostics -------------------------------------------------------------- */

/* Message describing this thread's most recent error ("" when none). */
const char* resfit_last_error(void);

void resfit_string_free(char* s);

const char* resfit_version(void);

#ifdef __cplusplus
}
#endif

#endif /* RESFIT_C_H */
