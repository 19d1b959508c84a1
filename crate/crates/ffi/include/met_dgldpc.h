#ifndef MET_DGLDPC_H
#define MET_DGLDPC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call.
 */
typedef enum MetStatus {
  MET_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  MET_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  MET_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed ensemble or out-of-range argument.
   */
  MET_STATUS_VALIDATION = 3,
  /**
   * The request exceeds compiled-in size limits.
   */
  MET_STATUS_CAPACITY = 4,
  /**
   * The analysis does not apply to this ensemble.
   */
  MET_STATUS_HYPOTHESIS = 5,
  /**
   * Internal consistency check failed.
   */
  MET_STATUS_INTERNAL = 6,
  /**
   * A caller buffer was too small. Nothing was written.
   */
  MET_STATUS_BUFFER_TOO_SMALL = 7,
  /**
   * A panic was caught at the boundary.
   */
  MET_STATUS_PANIC = 8,
} MetStatus;

/**
 * Opaque ensemble handle.
 */
typedef struct MetEnsemble MetEnsemble;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *met_version(void);

/**
 * Copies the calling thread's most recent error message into `buf`.
 *
 * The message is empty after a successful call. Returns the number of bytes
 * required including the terminating NUL. Writes nothing when `buf` is null
 * or `len` is smaller than that.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t met_last_error_message(char *buf, size_t len);

/**
 * Parses and validates a JSON ensemble. On success `*out_handle` owns a new
 * handle; on failure it is set to null.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out_handle` a valid pointer.
 */
enum MetStatus met_ensemble_from_json(const char *json, struct MetEnsemble **out_handle);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `h` must be null or a handle from [`met_ensemble_from_json`] not yet freed.
 */
void met_ensemble_free(struct MetEnsemble *h);

/**
 * Number of edge types.
 *
 * # Safety
 * `h` must be a live handle and `n` a valid pointer.
 */
enum MetStatus met_ensemble_num_edge_types(const struct MetEnsemble *h, size_t *n);

/**
 * Transmitted length and design dimension of the ensemble at its stated counts.
 *
 * # Safety
 * `h` must be a live handle; `length` and `dimension` valid pointers.
 */
enum MetStatus met_ensemble_size(const struct MetEnsemble *h, uint64_t *length, int64_t *dimension);

/**
 * Hex SHA-256 digest of the canonical ensemble, NUL-terminated (65 bytes).
 *
 * # Safety
 * `h` must be a live handle, `buf` null or `len` writable bytes, `needed`
 * null or a valid pointer.
 */
enum MetStatus met_ensemble_digest(const struct MetEnsemble *h,
                                   char *buf,
                                   size_t len,
                                   size_t *needed);

/**
 * One application of the EXIT map: `y = f(x, epsilon)`. Both arrays hold
 * `n` entries and `n` must equal the number of edge types.
 *
 * # Safety
 * `x` must point to `n` readable doubles and `y` to `n` writable ones.
 */
enum MetStatus met_exit_map(const struct MetEnsemble *h,
                            const double *x,
                            size_t n,
                            double epsilon,
                            double *y);

/**
 * BP threshold by bisection to half-width `tol_eps`; 0 selects the default.
 *
 * # Safety
 * `h` must be a live handle and `threshold` a valid pointer.
 */
enum MetStatus met_threshold(const struct MetEnsemble *h, double tol_eps, double *threshold);

/**
 * Spectral radius of `P(epsilon)·C`. Returns `MET_STATUS_HYPOTHESIS` for
 * ensembles outside the scope of the stability analysis.
 *
 * # Safety
 * `h` must be a live handle and `sigma` a valid pointer.
 */
enum MetStatus met_stability_sigma(const struct MetEnsemble *h, double epsilon, double *sigma);

/**
 * Largest channel parameter at which the erasure-free fixed point is
 * stable, to within `tol_eps` (0 selects the default). When the bound is
 * not reached inside `[0, 1]`, `*unbounded` is set and `*bound` is 1.
 *
 * # Safety
 * `h` must be a live handle; `bound` and `unbounded` valid pointers.
 */
enum MetStatus met_stability_bound(const struct MetEnsemble *h,
                                   double tol_eps,
                                   double *bound,
                                   bool *unbounded);

/**
 * Monte Carlo peeling-decoder estimate at one channel parameter.
 *
 * Each of `trials` codes is sampled at lifting factor `scale` from `seed`.
 * Outputs are the failure count and the bit erasure rate over transmitted
 * bits. Results depend only on the arguments, not on the thread count.
 *
 * # Safety
 * `h` must be a live handle; `failures` and `ber` valid pointers.
 */
enum MetStatus met_simulate_point(const struct MetEnsemble *h,
                                  double epsilon,
                                  uint64_t scale,
                                  uint64_t trials,
                                  uint64_t seed,
                                  uint64_t *failures,
                                  double *ber);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MET_DGLDPC_H */
