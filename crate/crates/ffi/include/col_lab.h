/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef COL_LAB_H
#define COL_LAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define COL_OBS_DIM 8

#define COL_ACTION_DIM 2

typedef enum ColReason {
  COL_REASON_RUNNING = 0,
  COL_REASON_LANDED = 1,
  COL_REASON_CRASHED = 2,
  COL_REASON_OUT_OF_BOUNDS = 3,
  COL_REASON_TIME_LIMIT = 4,
} ColReason;

typedef enum ColStatus {
  COL_STATUS_OK = 0,
  COL_STATUS_NULL_POINTER = 1,
  COL_STATUS_INVALID_ARGUMENT = 2,
  COL_STATUS_CONFIG = 3,
  COL_STATUS_SHAPE = 4,
  COL_STATUS_NUMERIC = 5,
  COL_STATUS_USAGE = 6,
  COL_STATUS_EMPTY = 7,
  COL_STATUS_PARSE = 8,
  COL_STATUS_VALIDATION = 9,
  COL_STATUS_ALIGNMENT = 10,
  COL_STATUS_IO = 11,
  COL_STATUS_SESSION = 12,
  COL_STATUS_OUT_OF_RANGE = 13,
  COL_STATUS_PANIC = 14,
} ColStatus;

// Validated trajectories from a demonstration file, flattened.
typedef struct ColDemos ColDemos;

// An environment plus the generator that draws its start states.
typedef struct ColEnv ColEnv;

// A deterministic actor network.
typedef struct ColPolicy ColPolicy;

// Result of one environment step.
typedef struct ColStep {
  double obs[COL_OBS_DIM];
  double reward;
  bool done;
  enum ColReason reason;
} ColStep;

typedef struct ColEvalResult {
  double mean;
  double stderr;
  size_t episodes;
} ColEvalResult;

typedef struct ColTransition {
  double state[COL_OBS_DIM];
  double action[COL_ACTION_DIM];
  double reward;
  double next_state[COL_OBS_DIM];
  bool done;
  // The episode hit the time limit rather than a terminal state.
  bool truncated;
  // True for demonstrator transitions.
  bool expert;
} ColTransition;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (always
// NUL-terminated when `len > 0`) and returns the length the full
// message needs, including the terminator.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t col_last_error(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *col_version(void);

// Creates an environment (`"lander-dense"` or `"lander-sparse"`) whose
// start states are drawn from a generator seeded with `seed`.
//
// # Safety
// `kind` must be a NUL-terminated string; `out` must be writable.
enum ColStatus col_env_new(const char *kind, uint64_t seed, struct ColEnv **out);

// # Safety
// `env` must come from [`col_env_new`] and not be used afterwards.
void col_env_free(struct ColEnv *env);

// Starts a new episode and writes the first observation.
//
// # Safety
// `env` must be a live handle; `obs_out` must point to 8 doubles.
enum ColStatus col_env_reset(struct ColEnv *env, double *obs_out);

// Applies `action` (2 doubles, clamped to [-1, 1]).
//
// # Safety
// `env` must be a live handle; `action` must point to 2 doubles and
// `out` be writable.
enum ColStatus col_env_step(struct ColEnv *env, const double *action, struct ColStep *out);

// The scripted pilot's action for an observation.
//
// # Safety
// `obs` must point to 8 doubles and `action_out` to 2 writable doubles.
enum ColStatus col_scripted_action(const double *obs, double *action_out);

// Loads an actor from a network file or a checkpoint directory.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum ColStatus col_policy_load(const char *path, struct ColPolicy **out);

// # Safety
// `policy` must come from [`col_policy_load`] and not be used afterwards.
void col_policy_free(struct ColPolicy *policy);

// Deterministic action for one observation, clamped to [-1, 1].
//
// # Safety
// `policy` must be live; `obs` must point to 8 doubles and
// `action_out` to 2 writable doubles.
enum ColStatus col_policy_act(const struct ColPolicy *policy,
                              const double *obs,
                              double *action_out);

// Noise-free evaluation over `episodes` episodes.
//
// # Safety
// `policy` must be live, `env_kind` NUL-terminated and `out` writable.
enum ColStatus col_policy_evaluate(const struct ColPolicy *policy,
                                   const char *env_kind_name,
                                   size_t episodes,
                                   uint64_t seed,
                                   struct ColEvalResult *out);

// Records scripted-pilot episodes to a demonstration file. The number of
// transitions written goes to `transitions_out` when it is non-null.
//
// # Safety
// String arguments must be NUL-terminated; `transitions_out` must be
// null or writable.
enum ColStatus col_collect_demos(const char *path,
                                 const char *env_kind_name,
                                 size_t episodes,
                                 uint64_t seed,
                                 size_t *transitions_out);

// Loads and validates a demonstration file.
//
// # Safety
// `path` must be NUL-terminated; `out` must be writable.
enum ColStatus col_demos_load(const char *path, struct ColDemos **out);

// # Safety
// `demos` must come from [`col_demos_load`] and not be used afterwards.
void col_demos_free(struct ColDemos *demos);

// Number of accepted transitions; 0 for a null handle.
//
// # Safety
// `demos` must be null or live.
size_t col_demos_len(const struct ColDemos *demos);

// Number of accepted trajectories; 0 for a null handle.
//
// # Safety
// `demos` must be null or live.
size_t col_demos_trajectories(const struct ColDemos *demos);

// Number of trajectories rejected by validation; 0 for a null handle.
//
// # Safety
// `demos` must be null or live.
size_t col_demos_rejected(const struct ColDemos *demos);

// Copies transition `index` into `out`.
//
// # Safety
// `demos` must be live and `out` writable.
enum ColStatus col_demos_get(const struct ColDemos *demos, size_t index, struct ColTransition *out);

// Runs a seed sweep. `config_path` may be null for defaults; each of the
// `n_overrides` strings is a `key=value` override applied in order.
//
// # Safety
// `config_path` must be null or NUL-terminated; `overrides` must point to
// `n_overrides` NUL-terminated strings (or be null when it is 0).
enum ColStatus col_train(const char *config_path, const char *const *overrides, size_t n_overrides);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COL_LAB_H */
