#ifndef SBT_H
#define SBT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum SbtStatus {
  SBT_STATUS_OK = 0,
  SBT_STATUS_NULL_POINTER = 1,
  SBT_STATUS_INVALID_ARGUMENT = 2,
  SBT_STATUS_CONFIG = 3,
  SBT_STATUS_UNKNOWN_EXPERIMENT = 4,
  SBT_STATUS_SIMULATION = 5,
  SBT_STATUS_IO = 6,
  SBT_STATUS_OUT_OF_RANGE = 7,
  SBT_STATUS_PANIC = 8,
} SbtStatus;

typedef struct SbtRegistry SbtRegistry;

typedef struct SbtRun SbtRun;

// Outcome of one built-in simulation.
typedef struct SbtEvaluation {
  // Clearance at closest approach in m; 0 on collision.
  double min_distance;
  // Ego speed at closest approach in m/s.
  double velocity_at_min_distance;
  // Smallest time to collision in s (1e9 if the actors never close in).
  double min_ttc;
  bool collision;
  // Collision time in s, NaN without collision.
  double collision_time;
  bool critical;
  // Number of recorded time steps.
  size_t steps;
} SbtEvaluation;

// Overrides applied on top of the experiment definition. Zero (or a
// negative time budget) keeps the configured value.
typedef struct SbtRunOptions {
  size_t population_size;
  size_t max_generations;
  // Wall-clock budget in seconds; <= 0 keeps the configured budget.
  double time_budget_secs;
  uint64_t seed;
  bool override_seed;
  size_t workers;
} SbtRunOptions;

// Message of the last failure on this thread, or null. Valid until the next
// failing call on the same thread.
const char *sbt_last_error_message(void);

// Library version as a static string.
const char *sbt_version(void);

// Simulates the built-in pedestrian-crossing world for one scenario
// instance and scores it.
//
// # Safety
// `out` must be null or point to writable memory for one `SbtEvaluation`.
enum SbtStatus sbt_builtin_evaluate(double ped_speed,
                                    double ego_speed,
                                    double ped_dist,
                                    struct SbtEvaluation *out);

// Opens the bundled experiment registry.
//
// # Safety
// `out` must be a valid pointer to a handle slot.
enum SbtStatus sbt_registry_builtin(struct SbtRegistry **out);

// Loads an experiment registry file (TOML).
//
// # Safety
// `path` must be a nul-terminated string; `out` a valid pointer to a handle slot.
enum SbtStatus sbt_registry_load(const char *path, struct SbtRegistry **out);

// Number of experiments; 0 for a null handle.
//
// # Safety
// `registry` must be null or a live handle.
size_t sbt_registry_len(const struct SbtRegistry *registry);

// Name of experiment `index` (0-based), or null if out of range.
//
// # Safety
// `registry` must be null or a live handle.
const char *sbt_registry_name(const struct SbtRegistry *registry, size_t index);

// # Safety
// `registry` must be null or a handle not yet freed.
void sbt_registry_free(struct SbtRegistry *registry);

// Runs experiment `name` (name or 1-based index) and writes its results
// under `results_root/<experiment>/<run_id>`. `run_id` and `options` may be
// null.
//
// # Safety
// Pointers must be valid as described; `out` must point to a handle slot.
enum SbtStatus sbt_run_experiment(const struct SbtRegistry *registry,
                                  const char *name,
                                  const char *results_root,
                                  const char *run_id,
                                  const struct SbtRunOptions *options,
                                  struct SbtRun **out);

// Results directory of the run.
//
// # Safety
// `run` must be null or a live handle.
const char *sbt_run_result_dir(const struct SbtRun *run);

// Algorithm name, `NSGA2` or `NSGA2DT`.
//
// # Safety
// `run` must be null or a live handle.
const char *sbt_run_algorithm(const struct SbtRun *run);

// Number of archived evaluations.
//
// # Safety
// `run` must be null or a live handle.
size_t sbt_run_evaluations(const struct SbtRun *run);

// Number of critical evaluations.
//
// # Safety
// `run` must be null or a live handle.
size_t sbt_run_critical_count(const struct SbtRun *run);

// Number of Pareto-optimal evaluations.
//
// # Safety
// `run` must be null or a live handle.
size_t sbt_run_pareto_count(const struct SbtRun *run);

// Archive index of the `i`-th Pareto-optimal evaluation.
//
// # Safety
// `run` must be null or a live handle; `out` must be writable.
enum SbtStatus sbt_run_pareto_index(const struct SbtRun *run, size_t i, size_t *out);

// Copies evaluation `index`: search variables into `inputs` (capacity
// `inputs_len`), objectives into `objectives` (capacity `objectives_len`),
// and the criticality flag into `critical`. Any output pointer may be null
// to skip it; a capacity smaller than required is an error.
//
// # Safety
// Non-null buffers must hold at least the given number of elements.
enum SbtStatus sbt_run_record(const struct SbtRun *run,
                              size_t index,
                              double *inputs,
                              size_t inputs_len,
                              double *objectives,
                              size_t objectives_len,
                              bool *critical);

// Number of critical regions extracted from the archive.
//
// # Safety
// `run` must be null or a live handle.
size_t sbt_run_region_count(const struct SbtRun *run);

// Human-readable condition of region `i`, or null if out of range.
//
// # Safety
// `run` must be null or a live handle.
const char *sbt_run_region_condition(const struct SbtRun *run, size_t i);

// # Safety
// `run` must be null or a handle not yet freed.
void sbt_run_free(struct SbtRun *run);

#endif  /* SBT_H */
