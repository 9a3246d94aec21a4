#ifndef RTGROWTH_H
#define RTGROWTH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RtStatus {
  RT_STATUS_OK = 0,
  RT_STATUS_NULL_POINTER = 1,
  RT_STATUS_INVALID_UTF8 = 2,
  RT_STATUS_INVALID_JSON = 3,
  RT_STATUS_INVALID_PARAMETERS = 4,
  RT_STATUS_SOLVER_ERROR = 5,
  /**
   * the requested value does not exist (e.g. growth rate of a stable result)
   */
  RT_STATUS_NOT_AVAILABLE = 6,
  RT_STATUS_PANIC = 7,
} RtStatus;

typedef enum RtVerdict {
  RT_VERDICT_UNSTABLE = 0,
  RT_VERDICT_STABLE = 1,
  RT_VERDICT_NEUTRAL = 2,
} RtVerdict;

/**
 * Result of a growth-rate solve.
 */
typedef struct RtGrowth RtGrowth;

/**
 * Validated physical parameters.
 */
typedef struct RtParams RtParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parse parameters from a JSON object with every field of the parameter set.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string; `out` must be writable.
 */
enum RtStatus rt_params_from_json(const char *json, struct RtParams **out);

/**
 * # Safety
 * `p` must come from [`rt_params_from_json`] and not be used afterwards.
 */
void rt_params_free(struct RtParams *p);

/**
 * Largest growth rate on the half disk `|k| <= k_max`.
 *
 * # Safety
 * `p` must be a live handle; `out` must be writable.
 */
enum RtStatus rt_growth_solve(const struct RtParams *p,
                              uint32_t degree,
                              uint32_t k_max,
                              double tol,
                              struct RtGrowth **out);

/**
 * # Safety
 * `g` must be a live handle; `out` must be writable.
 */
enum RtStatus rt_growth_verdict(const struct RtGrowth *g, enum RtVerdict *out);

/**
 * Growth rate; `NotAvailable` for a stable result.
 *
 * # Safety
 * `g` must be a live handle; `out` must be writable.
 */
enum RtStatus rt_growth_lambda(const struct RtGrowth *g, double *out);

/**
 * Lattice indices of the critical wavevector.
 *
 * # Safety
 * `g` must be a live handle; `k1`, `k2` must be writable.
 */
enum RtStatus rt_growth_wavevector(const struct RtGrowth *g, int64_t *k1, int64_t *k2);

/**
 * # Safety
 * `g` must come from [`rt_growth_solve`] and not be used afterwards.
 */
void rt_growth_free(struct RtGrowth *g);

/**
 * Stability discriminant; `out_dis` is `INFINITY` when unbounded.
 *
 * # Safety
 * `p` must be a live handle; outputs must be writable.
 */
enum RtStatus rt_discriminant(const struct RtParams *p,
                              uint32_t degree,
                              uint32_t k_max,
                              double *out_dis,
                              enum RtVerdict *out_verdict);

/**
 * # Safety
 * `out` must be writable.
 */
enum RtStatus rt_poincare_constant(double l, double tau, double *out);

/**
 * # Safety
 * `out` must be writable.
 */
enum RtStatus rt_surface_tension_threshold(double g,
                                           double rho_jump,
                                           double l1,
                                           double l2,
                                           double *out);

/**
 * # Safety
 * `out` must be writable.
 */
enum RtStatus rt_vertical_field_threshold(double g,
                                          double rho_jump,
                                          double lambda,
                                          double l,
                                          double tau,
                                          double *out);

/**
 * Smallest `1 <= n <= big_n` with `|n alpha - m| < 1/big_n`.
 *
 * # Safety
 * `out_n`, `out_m` must be writable.
 */
enum RtStatus rt_dirichlet_approximation(double alpha,
                                         uint64_t big_n,
                                         uint64_t *out_n,
                                         int64_t *out_m);

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into the library on the same thread.
 */
const char *rt_last_error_message(void);

/**
 * Engine version as a static NUL-terminated string.
 */
const char *rt_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RTGROWTH_H */
