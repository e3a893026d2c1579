// Copyright 2026 The PEAD Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PEAD_PEAD_H_
#define PEAD_PEAD_H_

/* C interface to the PEAD library. All functions return a pead_status; on
 * failure pead_last_error() describes the problem for the calling thread.
 * Strings returned through char** must be released with pead_string_free. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define PEAD_API __declspec(dllexport)
#else
#define PEAD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pead_status {
  PEAD_OK = 0,
  PEAD_ERR_INVALID_ARGUMENT = 1,
  PEAD_ERR_SHAPE = 2,
  PEAD_ERR_NUMERICAL = 3,
  PEAD_ERR_STATE = 4,
  PEAD_ERR_IO = 5,
  PEAD_ERR_CONFIG = 6,
  PEAD_ERR_INTERNAL = 7
} pead_status;

typedef struct pead_config pead_config;
typedef struct pead_agent pead_agent;
typedef struct pead_eval_report pead_eval_report;

PEAD_API const char* pead_version(void);
PEAD_API const char* pead_last_error(void);
PEAD_API const char* pead_status_name(pead_status status);
PEAD_API void pead_string_free(char* s);

/* Mapping between the reduced [dp, dz, do] and full six-gain action spaces. */
PEAD_API pead_status pead_project(const double* full6, double* reduced3);
PEAD_API pead_status pead_lift(const double* reduced3, double* full6);

/* Experiment configuration. algorithm is "ddpg" or "ppo". */
PEAD_API pead_status pead_config_default(const char* algorithm, pead_config** out);
PEAD_API pead_status pead_config_from_string(const char* text, pead_config** out);
PEAD_API pead_status pead_config_from_file(const char* path, pead_config** out);
PEAD_API pead_status pead_config_clone(const pead_config* cfg, pead_config** out);
/* key is dotted, e.g. "harness.episodes"; value is JSON or a bare string.
 * The whole configuration is re-validated on every call and left unchanged on
 * failure, so coupled fields must be set in an order that stays valid
 * (lower harness.extension_scale before harness.episodes). */
PEAD_API pead_status pead_config_set(pead_config* cfg, const char* key, const char* value);
PEAD_API pead_status pead_config_to_string(const pead_config* cfg, char** out);
PEAD_API void pead_config_free(pead_config* cfg);

typedef struct pead_episode_record {
  const char* run_id;
  const char* algorithm;
  const char* mode;
  uint64_t seed;
  int episode;
  double reward;
  int steps;
  const char* outcome;
  double opt_ms;
  int extended;
} pead_episode_record;

typedef void (*pead_progress_fn)(const pead_episode_record* record, void* user);

/* Runs every seed and writes the output directory. summary may be NULL. */
PEAD_API pead_status pead_train(const pead_config* cfg, pead_progress_fn progress, void* user,
                                char** summary);

PEAD_API pead_status pead_agent_load(const char* path, pead_agent** out);
PEAD_API pead_status pead_agent_save(const pead_agent* agent, const char* path);
PEAD_API pead_status pead_agent_info(const pead_agent* agent, const char** algorithm,
                                     int* state_dim, int* action_dim, int* extended);
/* Greedy action for one observation; action must hold action_dim values. */
PEAD_API pead_status pead_agent_act(pead_agent* agent, const double* state, size_t state_len,
                                    double* action, size_t action_len);
PEAD_API void pead_agent_free(pead_agent* agent);

typedef struct pead_eval_stats {
  int episodes;
  double success_rate;
  double mean_steps;
  double mean_cumulative_force;
  double mean_cumulative_moment;
} pead_eval_stats;

/* Trained agent vs fixed-compliance baseline on paired seeds at both corners
 * of the configured error range. trajectory_dir and csv_path may be NULL. */
PEAD_API pead_status pead_evaluate(pead_agent* agent, const pead_config* cfg,
                                   const char* trajectory_dir, const char* csv_path,
                                   pead_eval_report** out);
/* policy: "trained" or "baseline"; tag: "nominal" or "robustness". */
PEAD_API pead_status pead_eval_report_stats(const pead_eval_report* report, const char* policy,
                                            const char* tag, pead_eval_stats* out);
PEAD_API pead_status pead_eval_report_text(const pead_eval_report* report, char** out);
PEAD_API void pead_eval_report_free(pead_eval_report* report);

/* Summary tables for every per_episode.csv under dir. */
PEAD_API pead_status pead_report(const char* dir, char** text);

#ifdef __cplusplus
}
#endif

#endif  // PEAD_PEAD_H_
