#ifndef SWARMZONES_H
#define SWARMZONES_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Export format for [`sz_run_write`].
 */
typedef enum SzFormat {
  SZ_FORMAT_CSV = 0,
  SZ_FORMAT_JSON = 1,
} SzFormat;

/**
 * Result of every fallible call.
 */
typedef enum SzStatus {
  SZ_STATUS_OK = 0,
  /**
   * a required pointer was null or a string was not UTF-8
   */
  SZ_STATUS_NULL_OR_INVALID_ARGUMENT = 1,
  SZ_STATUS_INVALID_SCENARIO = 2,
  SZ_STATUS_UNKNOWN_SCENARIO = 3,
  SZ_STATUS_IO = 4,
  /**
   * an argument was outside its domain
   */
  SZ_STATUS_OUT_OF_RANGE = 5,
  SZ_STATUS_INTERNAL = 6,
} SzStatus;

/**
 * The complete output of one run.
 */
typedef struct SzRun SzRun;

/**
 * A validated scenario.
 */
typedef struct SzScenario SzScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static string.
 */
const char *sz_version(void);

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into the library from the same thread.
 */
const char *sz_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void sz_string_free(char *s);

/**
 * Parses and validates scenario JSON.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SzStatus sz_scenario_from_json(const char *json, struct SzScenario **out);

/**
 * Loads one of the scenarios shipped with the library by name.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SzStatus sz_scenario_bundled(const char *name, struct SzScenario **out);

/**
 * # Safety
 * `s` must be a live scenario handle.
 */
enum SzStatus sz_scenario_set_seed(struct SzScenario *s, uint64_t seed);

/**
 * # Safety
 * `s` must be a live scenario handle and `out` a valid pointer.
 */
enum SzStatus sz_scenario_seed(const struct SzScenario *s, uint64_t *out);

/**
 * Releases a scenario. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void sz_scenario_free(struct SzScenario *s);

/**
 * Runs a scenario to completion. The scenario handle stays usable.
 *
 * # Safety
 * `s` must be a live scenario handle and `out` a valid pointer.
 */
enum SzStatus sz_run(const struct SzScenario *s, struct SzRun **out);

/**
 * Number of events in the run's log.
 *
 * # Safety
 * `r` must be a live run handle and `out` a valid pointer.
 */
enum SzStatus sz_run_event_count(const struct SzRun *r, uint64_t *out);

/**
 * Mean link throughput of the run in bits per second.
 *
 * # Safety
 * `r` must be a live run handle and `out` a valid pointer.
 */
enum SzStatus sz_run_mean_throughput(const struct SzRun *r, double *out);

/**
 * Run summary as a JSON object. Free the result with [`sz_string_free`].
 *
 * # Safety
 * `r` must be a live run handle and `out` a valid pointer.
 */
enum SzStatus sz_run_summary_json(const struct SzRun *r, char **out);

/**
 * Writes the run's manifest and exports into `dir`, creating it if needed.
 *
 * # Safety
 * `r` must be a live run handle and `dir` a NUL-terminated string.
 */
enum SzStatus sz_run_write(const struct SzRun *r, const char *dir, enum SzFormat format);

/**
 * Releases a run. Null is ignored.
 *
 * # Safety
 * `r` must come from this library and not have been freed already.
 */
void sz_run_free(struct SzRun *r);

/**
 * Diagonal ordinal of cell `(a, b)` on an `n × n` grid.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum SzStatus sz_zone_value(size_t a, size_t b, size_t n, size_t *out);

/**
 * Bits per second delivered by `packets` packets at bit error ratio `ber`
 * over `seconds`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum SzStatus sz_throughput(uint64_t packets, double ber, double seconds, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SWARMZONES_H */
