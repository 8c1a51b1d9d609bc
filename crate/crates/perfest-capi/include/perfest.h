#ifndef PERFEST_H
#define PERFEST_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of a C API call.
 */
typedef enum PerfestStatus {
  PERFEST_STATUS_OK = 0,
  /**
   * A pointer argument was null or otherwise unusable.
   */
  PERFEST_STATUS_INVALID_ARGUMENT = 1,
  /**
   * The configuration failed validation.
   */
  PERFEST_STATUS_INVALID_CONFIG = 2,
  /**
   * Reading or writing a file failed.
   */
  PERFEST_STATUS_IO = 3,
  /**
   * A JSON document failed to parse.
   */
  PERFEST_STATUS_PARSE = 4,
  /**
   * The experiment or analysis itself failed.
   */
  PERFEST_STATUS_FAILED = 5,
} PerfestStatus;

/**
 * Opaque experiment-results handle.
 */
typedef struct PerfestResults PerfestResults;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *perfest_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *perfest_version(void);

/**
 * Runs the experiment described by a JSON config file.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum PerfestStatus perfest_run_config_file(const char *path, struct PerfestResults **out);

/**
 * Runs the experiment described by a JSON config document. Relative CSV
 * paths resolve against the current working directory.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum PerfestStatus perfest_run_config_json(const char *json, struct PerfestResults **out);

/**
 * Loads a results file written by this library.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum PerfestStatus perfest_results_load(const char *path, struct PerfestResults **out);

/**
 * Parses a results JSON document.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum PerfestStatus perfest_results_from_json(const char *json, struct PerfestResults **out);

/**
 * Writes a results handle to a file in the versioned JSON format.
 *
 * # Safety
 * `handle` must come from this library; `path` must be a valid string.
 */
enum PerfestStatus perfest_results_save(const struct PerfestResults *handle, const char *path);

/**
 * Serializes a results handle to JSON.
 *
 * # Safety
 * `handle` must come from this library; `out` must be a valid pointer.
 */
enum PerfestStatus perfest_results_to_json(const struct PerfestResults *handle, char **out);

/**
 * Number of predictive tasks in the results.
 *
 * # Safety
 * `handle` must come from this library (null yields 0).
 */
uintptr_t perfest_results_task_count(const struct PerfestResults *handle);

/**
 * Number of workflows in the results.
 *
 * # Safety
 * `handle` must come from this library (null yields 0).
 */
uintptr_t perfest_results_workflow_count(const struct PerfestResults *handle);

/**
 * Summary statistics (per task, workflow and metric) as a JSON document.
 *
 * # Safety
 * `handle` must come from this library; `out` must be a valid pointer.
 */
enum PerfestStatus perfest_results_summary_json(const struct PerfestResults *handle, char **out);

/**
 * Full paired-comparison report (rank matrices, Friedman, Nemenyi,
 * Bonferroni-Dunn, Wilcoxon and paired t) as a JSON document.
 *
 * `baseline` may be null for the default (best average rank); `alpha`
 * values at or below 0 fall back to 0.05.
 *
 * # Safety
 * `handle` must come from this library; `out` must be a valid pointer;
 * `baseline` must be null or a valid NUL-terminated string.
 */
enum PerfestStatus perfest_paired_comparisons_json(const struct PerfestResults *handle,
                                                   const char *baseline,
                                                   double alpha,
                                                   char **out);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be a pointer produced by this library (null is a no-op), and
 * must not be used afterwards.
 */
void perfest_string_free(char *s);

/**
 * Releases a results handle.
 *
 * # Safety
 * `handle` must be a pointer produced by this library (null is a no-op),
 * and must not be used afterwards.
 */
void perfest_results_free(struct PerfestResults *handle);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PERFEST_H */
