/* Copyright 2026 The fsadv Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/


/* C interface to fsadv. All objects are opaque and owned by the caller, who
 * releases them with the matching *_free function. Functions return an
 * fsadv_status; on failure fsadv_last_error() describes the problem for the
 * calling thread. Strings returned through const char** stay valid until the
 * owning handle is freed or the same function is called again on it. */

#ifndef FSADV_FSADV_H_
#define FSADV_FSADV_H_

#include <stddef.h>

#if defined(_WIN32)
#define FSADV_API __declspec(dllexport)
#else
#define FSADV_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fsadv_status {
  FSADV_OK = 0,
  FSADV_ERR_CONFIG = 1,
  FSADV_ERR_VALIDATION = 2,
  FSADV_ERR_DEGENERATE = 3,
  FSADV_ERR_UNSUPPORTED = 4,
  FSADV_ERR_LOOKUP = 5,
  FSADV_ERR_NUMERIC = 6,
  FSADV_ERR_NOT_FOUND = 7,
  FSADV_ERR_INTEGRITY = 8,
  FSADV_ERR_NETWORK = 9,
  FSADV_ERR_IO = 10,
  FSADV_ERR_MIGRATION = 11,
  FSADV_ERR_BUILD = 12,
  FSADV_ERR_INTERNAL = 13,
  FSADV_ERR_ARGUMENT = 14
} fsadv_status;

typedef struct fsadv_config fsadv_config;
typedef struct fsadv_report fsadv_report;

FSADV_API const char* fsadv_version(void);
FSADV_API const char* fsadv_status_name(fsadv_status status);
/* Message of the last failure on this thread, or "" after success. */
FSADV_API const char* fsadv_last_error(void);
/* Module that raised the last failure on this thread. */
FSADV_API const char* fsadv_last_error_module(void);
/* Process exit code for a status: 0 success, 1 configuration or
 * validation, 2 runtime. Partial campaigns map to 3 through
 * fsadv_report_partial. */
FSADV_API int fsadv_exit_code(fsadv_status status);

/* path may be NULL for the built-in defaults. */
FSADV_API fsadv_status fsadv_config_load(const char* path, fsadv_config** out);
/* "key=value"; the configuration is revalidated after every override. */
FSADV_API fsadv_status fsadv_config_set(fsadv_config* config, const char* assignment);
FSADV_API fsadv_status fsadv_config_digest(fsadv_config* config, const char** out);
FSADV_API fsadv_status fsadv_config_snapshot(fsadv_config* config, const char** out);
FSADV_API fsadv_status fsadv_config_get(fsadv_config* config, const char* key, const char** out);
FSADV_API void fsadv_config_free(fsadv_config* config);

/* Number of documented keys, and the i-th key with its description and the
 * space separated commands that read it. */
FSADV_API size_t fsadv_config_key_count(void);
FSADV_API fsadv_status fsadv_config_key_info(size_t index, const char** key,
                                             const char** description, const char** commands);

/* Writes the toy dataset to campaign.output_dir. */
FSADV_API fsadv_status fsadv_toy_export(const fsadv_config* config);
/* Fetches model_id into the cache and returns the cache directory. */
FSADV_API fsadv_status fsadv_model_fetch(fsadv_config* config, const char* model_id,
                                         const char** out_dir);

/* Runs the campaign in campaign.mode. workers <= 0 uses every core. When
 * grid_dir is non-NULL adversarial image grids are written there. */
FSADV_API fsadv_status fsadv_run_campaign(const fsadv_config* config, int workers,
                                          const char* grid_dir, fsadv_report** out);
/* Epsilon sweep over sweep.epsilons; the result is written to dir. */
FSADV_API fsadv_status fsadv_run_sweep(const fsadv_config* config, int workers,
                                       const char* dir, const char** out_summary);

FSADV_API fsadv_status fsadv_report_write(const fsadv_report* report, const char* dir);
FSADV_API fsadv_status fsadv_report_read(const char* dir, fsadv_report** out);
/* Histogram panels under dir; out_count receives the number of files. */
FSADV_API fsadv_status fsadv_report_render(const fsadv_report* report, const char* dir,
                                           const fsadv_config* style, size_t* out_count);
/* Human-readable metric summary. */
FSADV_API fsadv_status fsadv_report_summary(fsadv_report* report, const char** out);
/* Looks up a metric value; model_id "avg" with scope "blackbox_avg" gives the
 * blackbox average. whitebox may be NULL to take the first match. */
FSADV_API fsadv_status fsadv_report_metric(const fsadv_report* report, const char* metric,
                                           const char* scope, const char* model_id,
                                           const char* whitebox, double* out);
FSADV_API int fsadv_report_partial(const fsadv_report* report);
FSADV_API fsadv_status fsadv_report_digest(fsadv_report* report, const char** out);
FSADV_API void fsadv_report_free(fsadv_report* report);

#ifdef __cplusplus
}
#endif

#endif /* FSADV_FSADV_H_ */
