#ifndef ICND2D_H
#define ICND2D_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum Icnd2dSolver {
  ICND2D_SOLVER_EXACT = 0,
  ICND2D_SOLVER_ADMM = 1,
  ICND2D_SOLVER_NO_CACHING = 2,
  ICND2D_SOLVER_NO_D2D = 3,
} Icnd2dSolver;

typedef enum Icnd2dStatus {
  ICND2D_STATUS_OK = 0,
  ICND2D_STATUS_NULL_POINTER = 1,
  ICND2D_STATUS_INVALID_ARGUMENT = 2,
  ICND2D_STATUS_INFEASIBLE = 3,
  ICND2D_STATUS_PARSE = 4,
  ICND2D_STATUS_IO = 5,
  ICND2D_STATUS_INTERNAL = 6,
} Icnd2dStatus;

/**
 * A generated instance: scenario, caches, demands and the allocation problem.
 */
typedef struct Icnd2dInstance Icnd2dInstance;

/**
 * A solved allocation with its objective and feasibility verdict.
 */
typedef struct Icnd2dSolution Icnd2dSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failed call on this thread; empty after a
 * successful call. Valid until the next call on the same thread.
 */
const char *icnd2d_last_error_message(void);

/**
 * Generates a seeded instance. `config_json` may be null for the default
 * configuration.
 *
 * # Safety
 * `config_json` must be null or a NUL-terminated string; `out` must be a
 * valid pointer to writable storage.
 */
enum Icnd2dStatus icnd2d_instance_generate(const char *config_json,
                                           uint64_t seed,
                                           struct Icnd2dInstance **out);

/**
 * Parses an instance previously produced by [`icnd2d_instance_to_json`] or the CLI.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` valid writable storage.
 */
enum Icnd2dStatus icnd2d_instance_from_json(const char *json, struct Icnd2dInstance **out);

/**
 * Serializes an instance; free the string with [`icnd2d_string_free`].
 *
 * # Safety
 * `instance` must be a live handle and `out` valid writable storage.
 */
enum Icnd2dStatus icnd2d_instance_to_json(const struct Icnd2dInstance *instance, char **out);

/**
 * Number of requesters and candidate links in the instance's problem.
 *
 * # Safety
 * `instance` must be a live handle; the out pointers must be valid.
 */
enum Icnd2dStatus icnd2d_instance_size(const struct Icnd2dInstance *instance,
                                       size_t *num_requesters,
                                       size_t *num_links);

/**
 * Solves the instance. `rho` is the ADMM penalty (ignored by the exact
 * solver); `max_nodes` caps the exact search, 0 selecting the default.
 *
 * # Safety
 * `instance` must be a live handle and `out` valid writable storage.
 */
enum Icnd2dStatus icnd2d_solve(const struct Icnd2dInstance *instance,
                               enum Icnd2dSolver solver,
                               double rho,
                               uint64_t max_nodes,
                               struct Icnd2dSolution **out);

/**
 * # Safety
 * `solution` must be a live handle and `out` valid writable storage.
 */
enum Icnd2dStatus icnd2d_solution_objective(const struct Icnd2dSolution *solution, double *out);

/**
 * # Safety
 * `solution` must be a live handle and `out` valid writable storage.
 */
enum Icnd2dStatus icnd2d_solution_is_feasible(const struct Icnd2dSolution *solution, bool *out);

/**
 * Serializes the solution; free the string with [`icnd2d_string_free`].
 *
 * # Safety
 * `solution` must be a live handle and `out` valid writable storage.
 */
enum Icnd2dStatus icnd2d_solution_to_json(const struct Icnd2dSolution *solution, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void icnd2d_string_free(char *s);

/**
 * # Safety
 * `instance` must be null or a handle returned by this library, not yet freed.
 */
void icnd2d_instance_free(struct Icnd2dInstance *instance);

/**
 * # Safety
 * `solution` must be null or a handle returned by this library, not yet freed.
 */
void icnd2d_solution_free(struct Icnd2dSolution *solution);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ICND2D_H */
