// Copyright 2026 The advsim authors
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

// C interface to the advsim engine. Every fallible call returns a status
// code; on failure, advsim_last_error() carries a human-readable message for
// the calling thread. Objects come back as opaque handles released with the
// matching _free function; strings returned through char** out parameters
// are released with advsim_string_free.

#ifndef ADVSIM_ADVSIM_C_H_
#define ADVSIM_ADVSIM_C_H_

#include <stdint.h>

#if defined(_WIN32)
#define ADVSIM_API __declspec(dllexport)
#else
#define ADVSIM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum advsim_status {
  ADVSIM_OK = 0,
  ADVSIM_ERR_IO = 1,         /* file missing or unreadable */
  ADVSIM_ERR_PARSE = 2,      /* malformed input text */
  ADVSIM_ERR_SCHEMA = 3,     /* well formed but wrong shape */
  ADVSIM_ERR_INVARIANT = 4,  /* shape fine, semantics broken */
  ADVSIM_ERR_ARGUMENT = 5,   /* unusable argument, including null handles */
  ADVSIM_ERR_STATE = 6,      /* call not legal in the current object state */
  ADVSIM_ERR_INTERNAL = 7
} advsim_status;

ADVSIM_API const char * advsim_version(void);

/* Message of the last failure on this thread; empty string when none. The
   pointer stays valid until the next failing call on the same thread. */
ADVSIM_API const char * advsim_last_error(void);

ADVSIM_API void advsim_string_free(char * s);

/* ---------- scenarios ---------- */

typedef struct advsim_scenario advsim_scenario;

ADVSIM_API advsim_status advsim_scenario_load(const char * path, advsim_scenario ** out);
ADVSIM_API advsim_status advsim_scenario_from_json(const char * json_text, advsim_scenario ** out);
ADVSIM_API advsim_status advsim_scenario_save(const advsim_scenario * s, const char * path);
ADVSIM_API advsim_status advsim_scenario_to_json(const advsim_scenario * s, char ** out_json);
ADVSIM_API void advsim_scenario_free(advsim_scenario * s);

/* Synthesizes one scenario. Templates: straight_multilane, curve,
   t_junction, four_way_intersection, merge. n_background is clamped
   to [0, 6]. */
ADVSIM_API advsim_status advsim_forge_scenario(
  const char * template_name, uint64_t seed, int n_background, advsim_scenario ** out);

/* Synthesizes `count` scenarios cycling the templates and writes them under
   `dir` as one JSON file each plus manifest.json with the train/test split. */
ADVSIM_API advsim_status advsim_forge_corpus(
  int count, double train_fraction, uint64_t seed, const char * dir);

/* ---------- prediction and adversarial generation ---------- */

/* Samples m feasible futures for one vehicle (null vehicle_id means the
   scenario's adversary) and writes the candidate set document to out_path. */
ADVSIM_API advsim_status advsim_predict(
  const advsim_scenario * s, const char * vehicle_id, int m, uint64_t seed,
  const char * out_path);

/* Resamples the adversary into a safety-critical variant against a fixed
   agent. options_json:
     {"agent": {"kind": "replay"|"idm"|"policy", "policy_path": "..."},
      "n_buffer": 1, "m": 32, "alpha": 0.99, "seed": 0,
      "selector": "posterior"|"prior_argmax"}
   All keys optional; the defaults are the values shown (agent defaults to
   replay). On success *out is the adversarial scenario and, when info_json
   is non-null, *info_json summarizes
     {"selected": i, "posterior": p, "prior": q, "gen_time_ms": t}. */
ADVSIM_API advsim_status advsim_attack_scene(
  const advsim_scenario * s, const char * options_json, advsim_scenario ** out,
  char ** info_json);

/* ---------- simulation ---------- */

typedef struct advsim_simulator advsim_simulator;

typedef struct advsim_step {
  double reward;
  int done;
  int crashed;
  int out_of_road;
  int arrived;
  int truncated;
  int crashed_with; /* track index hit, -1 when none */
  int frame;        /* frame index just reached */
  double progress;  /* route arc gained this step, meters */
} advsim_step;

ADVSIM_API int advsim_observation_dim(void);

/* ego_mode: "policy" (actions drive the kinematics) or "replay" (the ego
   retraces its log and actions are ignored). Null means "policy". */
ADVSIM_API advsim_status advsim_simulator_create(
  const advsim_scenario * s, const char * ego_mode, advsim_simulator ** out);

/* Fills obs[0..obs_len) with the initial observation; obs_len must be
   advsim_observation_dim(). */
ADVSIM_API advsim_status advsim_simulator_reset(
  advsim_simulator * sim, double * obs, int obs_len);

/* Advances one step with steer and accel in [-1, 1]. Requires a prior
   reset; stepping a finished episode is a state error. */
ADVSIM_API advsim_status advsim_simulator_step(
  advsim_simulator * sim, double steer, double accel, double * obs, int obs_len,
  advsim_step * info);

ADVSIM_API void advsim_simulator_free(advsim_simulator * sim);

/* ---------- policies ---------- */

typedef struct advsim_policy advsim_policy;

ADVSIM_API advsim_status advsim_policy_load(const char * path, advsim_policy ** out);
ADVSIM_API advsim_status advsim_policy_zeros(advsim_policy ** out);
ADVSIM_API advsim_status advsim_policy_save(const advsim_policy * p, const char * path);
ADVSIM_API void advsim_policy_free(advsim_policy * p);

/* Deterministic action: tanh of the network means. */
ADVSIM_API advsim_status advsim_policy_act(
  const advsim_policy * p, const double * obs, int obs_len, double * steer,
  double * accel);

/* ---------- rollouts, training, evaluation, rendering ---------- */

/* Runs one episode and returns the full trace document (scenario plus every
   frame of every vehicle). options_json:
     {"agent": {"kind": ..., "policy_path": ...}, "ego_mode": "policy"|"replay"}
   ego_mode defaults to replay for the replay agent and policy otherwise.
   When summary_json is non-null it receives
     {"route_completion", "crashed", "out_of_road", "arrived", "steps",
      "episode_return", "crash_step", "crash_partner"}. */
ADVSIM_API advsim_status advsim_rollout(
  const advsim_scenario * s, const char * options_json, char ** trace_json,
  char ** summary_json);

/* Runs a training job described by config_json:
     {"pool_dir": dir | "pool": [paths...], "mode": "no_adv"|"rule_based"|
      "open_loop"|"closed_loop", "generations": N, "seed": S, "out_dir": dir,
      "checkpoint_every": K, "resume_from": checkpoint_path,
      "m": 32, "n": 5, "alpha": 0.99, "scenes_per_gen": 4,
      "population": 32, "elite_fraction": 0.25, "noise_init": 0.5,
      "noise_decay": 0.995, "noise_floor": 0.001,
      "policy_stddev": [0.3, 0.3]}
   Only the pool source and out_dir are required. Writes metrics.csv,
   checkpoint_gen<k>.json every K generations, checkpoint_final.json and
   policy.json under out_dir. summary_json (optional) reports the final
   generation, metrics, and skipped scenario count. */
ADVSIM_API advsim_status advsim_train(const char * config_json, char ** summary_json);

/* Attack evaluation over a scene set. config_json:
     {"agent": {...}, "scenes_dir": dir | "scenes": [paths...],
      "split": "train"|"test"|"all", "n_buffer": 1, "m": 32, "alpha": 0.99,
      "generate": true, "selector": "posterior", "seed": 0}
   Returns the report document. */
ADVSIM_API advsim_status advsim_eval_attack(const char * config_json, char ** report_json);

/* Policy evaluation. config_json:
     {"policy_path": path, "scenes_dir": dir | "scenes": [paths...],
      "split": "train"|"test"|"all", "traffic": "log_replay"|"safety_critical",
      "seeds": [0,1,2], "m": 32, "alpha": 0.99} */
ADVSIM_API advsim_status advsim_eval_policy(const char * config_json, char ** report_json);

/* Renders the trace document from advsim_rollout as a standalone SVG. */
ADVSIM_API advsim_status advsim_render(const char * trace_json, char ** svg);

#ifdef __cplusplus
}
#endif

#endif /* ADVSIM_ADVSIM_C_H_ */
