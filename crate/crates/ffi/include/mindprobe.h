#ifndef MINDPROBE_H
#define MINDPROBE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every entry point.
 */
typedef enum MmStatus {
  MmStatus_Ok = 0,
  MmStatus_NullPointer = 1,
  MmStatus_InvalidArgument = 2,
  MmStatus_Io = 3,
  MmStatus_Format = 4,
  MmStatus_Simulation = 5,
  MmStatus_Backend = 6,
  /**
   * The run finished without error but some queries failed or it stopped early.
   */
  MmStatus_Incomplete = 7,
  MmStatus_Panic = 99,
} MmStatus;

/**
 * Opaque dataset handle.
 */
typedef struct MmDataset MmDataset;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next failing call on the same thread.
 */
const char *mm_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mm_version(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void mm_string_free(char *s);

/**
 * Simulates `n_episodes` episodes of a built-in task with its scripted
 * controller. `max_steps == 0` keeps the task's own limit.
 *
 * # Safety
 * `task` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MmStatus mm_dataset_collect(const char *task,
                                 size_t n_episodes,
                                 uint64_t seed,
                                 size_t max_steps,
                                 struct MmDataset **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MmStatus mm_dataset_load(const char *path, struct MmDataset **out);

/**
 * # Safety
 * `ds` must be a live handle and `path` a NUL-terminated string.
 */
enum MmStatus mm_dataset_save(const struct MmDataset *ds, const char *path);

/**
 * Releases a dataset handle. Null is ignored.
 *
 * # Safety
 * `ds` must come from this library and not have been freed already.
 */
void mm_dataset_free(struct MmDataset *ds);

/**
 * Number of episodes, or 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live handle.
 */
size_t mm_dataset_n_episodes(const struct MmDataset *ds);

/**
 * # Safety
 * `ds` must be a live handle and `out_len` a valid pointer.
 */
enum MmStatus mm_dataset_episode_len(const struct MmDataset *ds, size_t episode, size_t *out_len);

/**
 * Hex content hash of the dataset body. Free with [`mm_string_free`].
 *
 * # Safety
 * `ds` must be a live handle and `out` a valid pointer.
 */
enum MmStatus mm_dataset_content_hash(const struct MmDataset *ds, char **out);

/**
 * Equal-width bin index of `value` over `[low, high]`.
 *
 * # Safety
 * `out_bin` must be a valid pointer.
 */
enum MmStatus mm_quantize(double value, double low, double high, size_t n_bins, size_t *out_bin);

/**
 * One transition of a built-in task. Discrete actions are passed as a
 * single integral value. `out_state` must hold at least `state_len`
 * values.
 *
 * # Safety
 * Array arguments must point to at least the stated number of values and
 * every out-pointer must be valid.
 */
enum MmStatus mm_env_step(const char *task,
                          const double *state,
                          size_t state_len,
                          const double *action,
                          size_t action_len,
                          double *out_state,
                          double *out_reward,
                          bool *out_terminated);

/**
 * Runs (or resumes) the plan at `plan_path`. On `Ok` or `Incomplete`,
 * `out_summary` receives a JSON summary to free with [`mm_string_free`].
 * `output_dir` may be null to keep the plan's own directory.
 *
 * # Safety
 * String arguments must be NUL-terminated (or null where allowed) and
 * `out_summary` a valid pointer.
 */
enum MmStatus mm_run_plan(const char *plan_path, const char *output_dir, char **out_summary);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MINDPROBE_H */
