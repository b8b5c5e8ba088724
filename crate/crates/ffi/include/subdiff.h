#ifndef SUBDIFF_H
#define SUBDIFF_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SubdiffStatus {
  SUBDIFF_STATUS_OK = 0,
  SUBDIFF_STATUS_NULL_POINTER = 1,
  SUBDIFF_STATUS_INVALID_UTF8 = 2,
  SUBDIFF_STATUS_INVALID_ARGUMENT = 3,
  SUBDIFF_STATUS_CONFIG = 4,
  SUBDIFF_STATUS_IO = 5,
  SUBDIFF_STATUS_NUMERICAL = 6,
  SUBDIFF_STATUS_PANIC = 7,
} SubdiffStatus;

/**
 * A catalog integrand.
 */
typedef struct SubdiffIntegrand SubdiffIntegrand;

/**
 * The JSON report of a scenario run.
 */
typedef struct SubdiffReport SubdiffReport;

/**
 * A discretized measure space.
 */
typedef struct SubdiffSpace SubdiffSpace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *subdiff_version(void);

/**
 * Message of the last failed call on this thread, or NULL after a success.
 * The pointer stays valid until the next call into this library on the
 * same thread.
 */
const char *subdiff_last_error(void);

/**
 * Space with atoms `t0, t1, ...` carrying `weights[0..n]`.
 *
 * # Safety
 * `weights` must point to `n` readable doubles; `out` must be writable.
 */
enum SubdiffStatus subdiff_space_from_weights(const double *weights,
                                              uintptr_t n,
                                              struct SubdiffSpace **out);

/**
 * Geometric grid of `]0, 1]` with `cells` cells shrinking by `ratio` toward 0.
 *
 * # Safety
 * `out` must be writable.
 */
enum SubdiffStatus subdiff_space_geometric_grid(uintptr_t cells,
                                                double ratio,
                                                struct SubdiffSpace **out);

/**
 * Uniform midpoint grid of `]0, 1]`.
 *
 * # Safety
 * `out` must be writable.
 */
enum SubdiffStatus subdiff_space_uniform_grid(uintptr_t cells, struct SubdiffSpace **out);

/**
 * Number of atoms; 0 for NULL.
 *
 * # Safety
 * `space` must be NULL or a live handle.
 */
uintptr_t subdiff_space_len(const struct SubdiffSpace *space);

/**
 * Sum of the atom weights; NaN for NULL.
 *
 * # Safety
 * `space` must be NULL or a live handle.
 */
double subdiff_space_total_mass(const struct SubdiffSpace *space);

/**
 * # Safety
 * `space` must be NULL or a handle not yet freed.
 */
void subdiff_space_free(struct SubdiffSpace *space);

/**
 * Catalog integrand `name` with JSON object `params` (NULL for defaults).
 *
 * # Safety
 * `name` and `params` must be NUL-terminated strings (`params` may be NULL);
 * `out` must be writable.
 */
enum SubdiffStatus subdiff_integrand_new(const char *name,
                                         const char *params,
                                         struct SubdiffIntegrand **out);

/**
 * Dimension of the decision variable; 0 for NULL.
 *
 * # Safety
 * `f` must be NULL or a live handle.
 */
uintptr_t subdiff_integrand_dim(const struct SubdiffIntegrand *f);

/**
 * # Safety
 * `f` must be NULL or a handle not yet freed.
 */
void subdiff_integrand_free(struct SubdiffIntegrand *f);

/**
 * `E_f(x)`, written to `out`; `+inf` when some positive-weight atom is infinite.
 *
 * # Safety
 * Handles must be live, `x` must point to `dim` doubles and `out` must be writable.
 */
enum SubdiffStatus subdiff_integral_value(const struct SubdiffSpace *space,
                                          const struct SubdiffIntegrand *f,
                                          const double *x,
                                          uintptr_t dim,
                                          double *out);

/**
 * `Σ weight·∇f(t, x)` written to `grad[0..dim]`.
 *
 * # Safety
 * Handles must be live; `x` and `grad` must point to `dim` doubles.
 */
enum SubdiffStatus subdiff_integrated_gradient(const struct SubdiffSpace *space,
                                               const struct SubdiffIntegrand *f,
                                               const double *x,
                                               uintptr_t dim,
                                               double *grad);

/**
 * Parses and runs a scenario given as JSON text. Nothing is written to disk.
 * When `override_seed` is false the scenario's own seed is used.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string; `out` must be writable.
 */
enum SubdiffStatus subdiff_run_scenario(const char *config_json,
                                        uint64_t seed,
                                        bool override_seed,
                                        struct SubdiffReport **out);

/**
 * Report JSON, owned by the report; NULL for NULL.
 *
 * # Safety
 * `report` must be NULL or a live handle.
 */
const char *subdiff_report_json(const struct SubdiffReport *report);

/**
 * True when every expectation held.
 *
 * # Safety
 * `report` must be NULL or a live handle.
 */
bool subdiff_report_pass(const struct SubdiffReport *report);

/**
 * # Safety
 * `report` must be NULL or a live handle.
 */
uintptr_t subdiff_report_failed_expectations(const struct SubdiffReport *report);

/**
 * # Safety
 * `report` must be NULL or a handle not yet freed.
 */
void subdiff_report_free(struct SubdiffReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUBDIFF_H */
