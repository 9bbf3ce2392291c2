/* gcrl: goal-conditioned RL laboratory, C API.
 *
 * All functions return gcrl_status; on any non-OK status gcrl_last_error()
 * holds a thread-local message. Override tokens use the CLI grammar:
 * `key=value` replaces an existing config key, `++key=value` adds a new one.
 */
#ifndef GCRL_H
#define GCRL_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gcrl_status {
    GCRL_OK = 0,
    GCRL_ERR_RUNTIME = 1,
    GCRL_ERR_CONFIG = 2,
    GCRL_ERR_NUMERIC = 3,
    GCRL_ERR_IO = 4,
    GCRL_ERR_USAGE = 5,
    GCRL_TEST_FAILED = 6
} gcrl_status;

/* Message for the most recent error on this thread; empty string if none. */
const char* gcrl_last_error(void);

/* ------------------------------------------------------------------------ */
/* Workflow commands                                                        */

/* One tracked training run. Writes metrics/params/artifacts under
 * track_root; *final_success_rate (optional) receives the last evaluation. */
gcrl_status gcrl_run(const char* conf_dir, const char* track_root,
                     int n_overrides, const char* const* overrides,
                     double* final_success_rate);

/* Hyperparameter study defined by a study file (conf/sweep/<name>.yaml).
 * The report table is printed to stdout; journal and report files land under
 * <track_root>/sweeps/<study_name>/. */
gcrl_status gcrl_sweep(const char* conf_dir, const char* track_root,
                       const char* study_file, int n_overrides,
                       const char* const* overrides);

/* Replay a recorded NDJSON frame stream in the terminal. metrics_csv selects
 * panels ("a,b,c"); NULL or "" shows all. interactive enables pause/seek
 * (space pause, n/p step, q quit) when stdin is a terminal. */
gcrl_status gcrl_view_replay(const char* stream_file, const char* metrics_csv,
                             double speed_hz, int interactive);

/* Live-tail the stream of a run directory (its artifacts/stream.ndjson).
 * Runs until SIGINT. */
gcrl_status gcrl_view_follow(const char* run_dir, const char* metrics_csv,
                             double refresh_hz);

/* Smoke protocol over every algorithm x environment combination. Returns
 * GCRL_TEST_FAILED when any combination fails; report lines go to stdout. */
gcrl_status gcrl_test_smoke(const char* conf_dir, const char* track_root);

/* Performance gate on the pinned perf config (median over pinned seeds). */
gcrl_status gcrl_test_perf(const char* conf_dir, const char* track_root,
                           int n_overrides, const char* const* overrides);

/* ------------------------------------------------------------------------ */
/* Opaque environment handle (the sense-act interface)                      */

typedef struct gcrl_env gcrl_env;

/* NULL on unknown name (see gcrl_last_error for the valid choices). */
gcrl_env* gcrl_env_create(const char* name);
void gcrl_env_destroy(gcrl_env* env);

gcrl_status gcrl_env_spec(const gcrl_env* env, size_t* obs_dim, size_t* goal_dim,
                          size_t* action_dim, size_t* max_episode_steps,
                          double* success_threshold);

/* Buffers must hold obs_dim / goal_dim doubles. use_seed=0 continues the
 * current RNG stream. */
gcrl_status gcrl_env_reset(gcrl_env* env, uint64_t seed, int use_seed,
                           double* observation, double* achieved_goal,
                           double* desired_goal);

gcrl_status gcrl_env_step(gcrl_env* env, const double* action,
                          double* observation, double* achieved_goal,
                          double* desired_goal, double* reward, int* done,
                          int* is_success);

/* Sparse goal reward of this environment, usable for relabeling. */
gcrl_status gcrl_env_compute_reward(const gcrl_env* env, const double* achieved,
                                    const double* desired, double* reward);

#ifdef __cplusplus
}
#endif

#endif /* GCRL_H */
