#ifndef PERFLOOP_H
#define PERFLOOP_H

/* Generated by cbindgen from perfloop-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by fallible calls.
 */
typedef enum PlStatus {
  PL_STATUS_OK = 0,
  PL_STATUS_NULL_ARGUMENT = 1,
  PL_STATUS_INVALID_UTF8 = 2,
  PL_STATUS_INVALID_CONFIG = 3,
  PL_STATUS_RUNTIME_ERROR = 4,
  PL_STATUS_PANIC = 5,
} PlStatus;

/**
 * World selector for scenario-1 accessors.
 */
typedef enum PlWorld {
  PL_WORLD_PERFORMANCE_IDEAL = 0,
  PL_WORLD_ADAPTATION = 1,
  PL_WORLD_UNBIASED_BASELINE = 2,
} PlWorld;

/**
 * Perceived (noisy validation) vs real (true-label test) metrics.
 */
typedef enum PlView {
  PL_VIEW_PERCEIVED = 0,
  PL_VIEW_REAL = 1,
} PlView;

/**
 * Group selector for per-group metrics.
 */
typedef enum PlGroup {
  PL_GROUP_GROUP_A = 0,
  PL_GROUP_GROUP_B = 1,
  PL_GROUP_GLOBAL = 2,
} PlGroup;

/**
 * Opaque experiment configuration.
 */
typedef struct PlConfig PlConfig;

/**
 * Opaque scenario-1 report.
 */
typedef struct PlScenario1Report PlScenario1Report;

/**
 * Opaque scenario-2 report.
 */
typedef struct PlScenario2Report PlScenario2Report;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string; do not free.
 */
const char *pl_version(void);

/**
 * Returns the last error message on this thread as a newly allocated
 * string, or null when no error has occurred. Free with
 * [`pl_string_free`].
 */
char *pl_last_error_message(void);

/**
 * Frees a string returned by this library.
 *
 * # Safety
 * `s` must be null or a pointer previously returned by this library's
 * string-returning functions, not yet freed.
 */
void pl_string_free(char *s);

/**
 * A configuration with every field at its desk-scale default.
 */
struct PlConfig *pl_config_default(void);

/**
 * Parses a TOML config; returns null and sets the error on failure.
 *
 * # Safety
 * `text` must be a valid NUL-terminated string.
 */
struct PlConfig *pl_config_from_toml(const char *text);

/**
 * # Safety
 * `cfg` must be null or an unfreed pointer from a config constructor.
 */
void pl_config_free(struct PlConfig *cfg);

/**
 * Overrides the trial count.
 *
 * # Safety
 * `cfg` must be a valid config handle.
 */
enum PlStatus pl_config_set_trials(struct PlConfig *cfg, uint32_t trials);

/**
 * Sets the threshold policy: "global" or "groupwise".
 *
 * # Safety
 * `cfg` must be a valid config handle and `policy` a NUL-terminated
 * string.
 */
enum PlStatus pl_config_set_policy(struct PlConfig *cfg, const char *policy);

/**
 * Toggles dropping the oldest training month each iteration.
 *
 * # Safety
 * `cfg` must be a valid config handle.
 */
enum PlStatus pl_config_set_drop_old(struct PlConfig *cfg, bool drop_old);

/**
 * Generates one biased dataset and writes it as CSV.
 *
 * # Safety
 * `cfg` must be a valid config handle and `path` a NUL-terminated path.
 */
enum PlStatus pl_generate_dataset_csv(const struct PlConfig *cfg, uint64_t seed, const char *path);

/**
 * Runs the adaptive-evasion experiment for one seed.
 *
 * # Safety
 * `cfg` must be a valid config handle.
 */
struct PlScenario1Report *pl_run_scenario1(const struct PlConfig *cfg, uint64_t seed);

/**
 * # Safety
 * `report` must be null or an unfreed scenario-1 handle.
 */
void pl_scenario1_free(struct PlScenario1Report *report);

/**
 * Number of trials evaluated in each world.
 *
 * # Safety
 * `report` must be a valid scenario-1 handle.
 */
uint32_t pl_scenario1_trials(const struct PlScenario1Report *report);

/**
 * Test-set TPR of one trial in one world; NaN when out of range.
 *
 * # Safety
 * `report` must be a valid scenario-1 handle.
 */
double pl_scenario1_tpr(const struct PlScenario1Report *report, enum PlWorld world, uint32_t trial);

/**
 * log2 FPR ratio (A over B) of one trial; NaN when undefined.
 *
 * # Safety
 * `report` must be a valid scenario-1 handle.
 */
double pl_scenario1_log2_fpr_ratio(const struct PlScenario1Report *report,
                                   enum PlWorld world,
                                   uint32_t trial);

/**
 * Config id of the rank-th best model in a world (rank 0..5); -1 when
 * out of range.
 *
 * # Safety
 * `report` must be a valid scenario-1 handle.
 */
int64_t pl_scenario1_top5(const struct PlScenario1Report *report,
                          enum PlWorld world,
                          uint32_t rank);

/**
 * Runs the selective-label experiment for one seed.
 *
 * # Safety
 * `cfg` must be a valid config handle.
 */
struct PlScenario2Report *pl_run_scenario2(const struct PlConfig *cfg, uint64_t seed);

/**
 * # Safety
 * `report` must be null or an unfreed scenario-2 handle.
 */
void pl_scenario2_free(struct PlScenario2Report *report);

/**
 * Number of sliding-window iterations in the report.
 *
 * # Safety
 * `report` must be a valid scenario-2 handle.
 */
uint32_t pl_scenario2_iterations(const struct PlScenario2Report *report);

/**
 * FPR for one iteration, view, and group; NaN when undefined.
 *
 * # Safety
 * `report` must be a valid scenario-2 handle.
 */
double pl_scenario2_fpr(const struct PlScenario2Report *report,
                        uint32_t iteration,
                        enum PlView view,
                        enum PlGroup group);

/**
 * Global TPR for one iteration and view; NaN when undefined.
 *
 * # Safety
 * `report` must be a valid scenario-2 handle.
 */
double pl_scenario2_tpr(const struct PlScenario2Report *report,
                        uint32_t iteration,
                        enum PlView view);

/**
 * log2 FPR ratio (A over B) for one iteration and view; NaN when
 * undefined.
 *
 * # Safety
 * `report` must be a valid scenario-2 handle.
 */
double pl_scenario2_log2_fpr_ratio(const struct PlScenario2Report *report,
                                   uint32_t iteration,
                                   enum PlView view);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PERFLOOP_H */
