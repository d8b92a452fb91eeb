#ifndef CORRCOX_H
#define CORRCOX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes; the nonzero values match the command-line exit codes.
 */
typedef enum CorrcoxStatus {
  CORRCOX_STATUS_OK = 0,
  /**
   * Spec, schema, argument or domain error.
   */
  CORRCOX_STATUS_INVALID_INPUT = 2,
  /**
   * Component count beyond the supported subset-table size.
   */
  CORRCOX_STATUS_CAPACITY = 3,
  /**
   * Quadrature failure or another numerical error.
   */
  CORRCOX_STATUS_NUMERICAL = 4,
  /**
   * Operation not defined for this model family.
   */
  CORRCOX_STATUS_UNSUPPORTED = 5,
  /**
   * A required pointer argument was null.
   */
  CORRCOX_STATUS_NULL_POINTER = 6,
  /**
   * The engine panicked; this is a bug.
   */
  CORRCOX_STATUS_INTERNAL = 7,
} CorrcoxStatus;

/**
 * Opaque model handle.
 */
typedef struct CorrcoxModel CorrcoxModel;

/**
 * A Monte Carlo mean and its standard error.
 */
typedef struct CorrcoxMcEstimate {
  double value;
  double stderr;
  uint64_t paths;
  uint64_t seed;
} CorrcoxMcEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses a NUL-terminated UTF-8 JSON spec into a new model handle written to `*out`.
 * `strict` rejects unknown keys.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum CorrcoxStatus corrcox_model_from_json(const char *json,
                                           bool strict,
                                           struct CorrcoxModel **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `model` must come from [`corrcox_model_from_json`] and not be used afterwards.
 */
void corrcox_model_free(struct CorrcoxModel *model);

/**
 * Number of components `n`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum CorrcoxStatus corrcox_model_components(const struct CorrcoxModel *model, size_t *out);

/**
 * Hex SHA-256 of the canonicalized spec; the string lives as long as the handle.
 *
 * # Safety
 * `model` must be a valid handle or null (which returns null).
 */
const char *corrcox_model_hash(const struct CorrcoxModel *model);

/**
 * Joint survival `P(tau^1 > t_1, ..., tau^n > t_n)` by the nested-set formula.
 *
 * # Safety
 * `horizons` must point to `len` doubles; other pointers must be valid.
 */
enum CorrcoxStatus corrcox_joint_survival(const struct CorrcoxModel *model,
                                          const double *horizons,
                                          size_t len,
                                          double *out);

/**
 * Joint survival from the Möbius (Marshall–Olkin style) subset decomposition.
 *
 * # Safety
 * As [`corrcox_joint_survival`].
 */
enum CorrcoxStatus corrcox_joint_survival_mobius(const struct CorrcoxModel *model,
                                                 const double *horizons,
                                                 size_t len,
                                                 double *out);

/**
 * Marshall–Olkin rates indexed by subset bitmask (bit `i` = component `i + 1`);
 * `out` must hold `2^n` doubles and `out[0]` is set to 0. Negative rates of an explicit
 * compensator table are reported as they are.
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
enum CorrcoxStatus corrcox_mo_rates(const struct CorrcoxModel *model, double *out, size_t len);

/**
 * Monte Carlo joint survival; writes the Rao-Blackwell and indicator estimates.
 * `threads == 0` uses the `CORRCOX_THREADS` default. Results do not depend on `threads`.
 *
 * # Safety
 * `horizons` must point to `len` doubles; output pointers must be valid.
 */
enum CorrcoxStatus corrcox_mc_joint_survival(const struct CorrcoxModel *model,
                                             const double *horizons,
                                             size_t len,
                                             uint64_t paths,
                                             uint64_t seed,
                                             size_t threads,
                                             struct CorrcoxMcEstimate *rao_blackwell,
                                             struct CorrcoxMcEstimate *indicator);

/**
 * Message for the last failed call on this thread (empty after a success). Valid until
 * the next corrcox call on the same thread.
 */
const char *corrcox_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CORRCOX_H */
