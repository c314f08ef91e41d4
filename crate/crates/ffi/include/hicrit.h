#ifndef HICRIT_H
#define HICRIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum HicritStatus {
  HICRIT_STATUS_OK = 0,
  HICRIT_STATUS_NULL_POINTER = 1,
  /**
   * Argument outside the mathematical domain.
   */
  HICRIT_STATUS_DOMAIN = 2,
  /**
   * Malformed input data.
   */
  HICRIT_STATUS_INPUT = 3,
  /**
   * Problem too large for the requested method.
   */
  HICRIT_STATUS_SIZE = 4,
  /**
   * Root finding or integration failed.
   */
  HICRIT_STATUS_NUMERIC = 5,
  /**
   * Internal panic caught at the boundary.
   */
  HICRIT_STATUS_PANIC = 6,
} HicritStatus;

typedef enum HicritKind {
  HICRIT_KIND_HC = 0,
  HICRIT_KIND_MHC = 1,
  HICRIT_KIND_BJ = 2,
  HICRIT_KIND_MBJ = 3,
  HICRIT_KIND_JW = 4,
} HicritKind;

/**
 * `N x T` matrix of sequences for the interval scan.
 */
typedef struct HicritDataset HicritDataset;

/**
 * Boundary-crossing rejection rule for a fixed `(kind, n, b, k0, k1)`.
 */
typedef struct HicritRule HicritRule;

/**
 * Sorted p-value sample.
 */
typedef struct HicritSample HicritSample;

/**
 * Detections of one scan.
 */
typedef struct HicritScanResult HicritScanResult;

/**
 * One detected interval; `start` is 0-based.
 */
typedef struct HicritDetection {
  size_t start;
  size_t len;
  double value;
} HicritDetection;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread (empty after success).
 * The pointer stays valid until the next call on the same thread.
 */
const char *hicrit_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hicrit_version(void);

/**
 * Copies `n` p-values into a new sample.
 *
 * # Safety
 * `p` must point to `n` readable doubles; `out` must be writable.
 */
enum HicritStatus hicrit_sample_new(const double *p, size_t n, struct HicritSample **out_sample);

/**
 * # Safety
 * `sample` must come from [`hicrit_sample_new`] and not be used afterwards.
 */
void hicrit_sample_free(struct HicritSample *sample);

/**
 * Number of p-values, 0 for a null handle.
 *
 * # Safety
 * `sample` must be null or a live handle.
 */
size_t hicrit_sample_len(const struct HicritSample *sample);

/**
 * Statistic value over `k0..=k1`. `argmax` receives the 1-based maximizing
 * index, or 0 when no term is admissible.
 *
 * # Safety
 * `sample` must be a live handle; out-pointers must be writable
 * (`argmax` may be null).
 */
enum HicritStatus hicrit_evaluate(const struct HicritSample *sample,
                                  enum HicritKind kind,
                                  size_t k0,
                                  size_t k1,
                                  double *value,
                                  size_t *argmax);

/**
 * Analytic null tail probability `P{T >= b}`.
 *
 * # Safety
 * `p_value` must be writable.
 */
enum HicritStatus hicrit_tail_pvalue(enum HicritKind kind,
                                     size_t n,
                                     double b,
                                     size_t k0,
                                     size_t k1,
                                     double *p_value);

/**
 * Threshold with analytic tail probability `alpha`.
 *
 * # Safety
 * `b` must be writable.
 */
enum HicritStatus hicrit_threshold(enum HicritKind kind,
                                   size_t n,
                                   double alpha,
                                   size_t k0,
                                   size_t k1,
                                   double *b);

/**
 * Exact null crossing probability of the boundary for threshold `b`
 * (not available for `HICRIT_KIND_MHC`).
 *
 * # Safety
 * `p_value` must be writable.
 */
enum HicritStatus hicrit_exact_pvalue(enum HicritKind kind,
                                      size_t n,
                                      double b,
                                      size_t k0,
                                      size_t k1,
                                      double *p_value);

/**
 * # Safety
 * `out_rule` must be writable.
 */
enum HicritStatus hicrit_rule_new(enum HicritKind kind,
                                  size_t n,
                                  double b,
                                  size_t k0,
                                  size_t k1,
                                  struct HicritRule **out_rule);

/**
 * # Safety
 * `rule` must come from [`hicrit_rule_new`] and not be used afterwards.
 */
void hicrit_rule_free(struct HicritRule *rule);

/**
 * Whether the rule rejects `sample`, whose size must match the rule's `n`.
 *
 * # Safety
 * Handles must be live; `rejects` must be writable.
 */
enum HicritStatus hicrit_rule_rejects(const struct HicritRule *rule,
                                      const struct HicritSample *sample,
                                      bool *rejects);

/**
 * Analytic power for one-sided p-values with signal fraction `p` and fixed
 * mean `delta`.
 *
 * # Safety
 * `power` must be writable.
 */
enum HicritStatus hicrit_analytic_power(enum HicritKind kind,
                                        size_t n,
                                        double b,
                                        size_t k0,
                                        size_t k1,
                                        double p,
                                        double delta,
                                        double *power);

/**
 * Simulated power; signal means are `N(mu, delta_sd^2)`.
 *
 * # Safety
 * `power` must be writable; `se` may be null.
 */
enum HicritStatus hicrit_mc_power(enum HicritKind kind,
                                  size_t n,
                                  double b,
                                  size_t k0,
                                  size_t k1,
                                  double p,
                                  double mu,
                                  double delta_sd,
                                  bool two_sided,
                                  uint64_t replicates,
                                  uint64_t seed,
                                  double *power,
                                  double *se);

/**
 * Lower confidence bound for the fraction of false nulls. `kind` must be
 * `HICRIT_KIND_MBJ` or `HICRIT_KIND_MHC`.
 *
 * # Safety
 * `sample` must be live; `lambda_hat` must be writable.
 */
enum HicritStatus hicrit_lower_bound(const struct HicritSample *sample,
                                     enum HicritKind kind,
                                     double alpha,
                                     double *lambda_hat);

/**
 * Copies an `n_seq x t_len` row-major matrix. `sigma` holds one noise scale
 * per sequence, or is null for unit scales.
 *
 * # Safety
 * `y` must point to `n_seq * t_len` doubles, `sigma` to `n_seq` doubles or
 * be null; `out_dataset` must be writable.
 */
enum HicritStatus hicrit_dataset_new(const double *y,
                                     size_t n_seq,
                                     size_t t_len,
                                     const double *sigma,
                                     struct HicritDataset **out_dataset);

/**
 * # Safety
 * `dataset` must come from [`hicrit_dataset_new`] and not be used afterwards.
 */
void hicrit_dataset_free(struct HicritDataset *dataset);

/**
 * Sorted p-values of the standardized sums over `[start, start + len)`.
 *
 * # Safety
 * `dataset` must be live; `out_sample` must be writable.
 */
enum HicritStatus hicrit_interval_pvalues(const struct HicritDataset *dataset,
                                          size_t start,
                                          size_t len,
                                          struct HicritSample **out_sample);

/**
 * Scans all intervals of length `1..=max_len` at global level `alpha`
 * with default indices (`k0 = 4` for HC, else 1; `k1 = N / 2`).
 *
 * # Safety
 * `dataset` must be live; `out_result` must be writable.
 */
enum HicritStatus hicrit_scan(const struct HicritDataset *dataset,
                              enum HicritKind kind,
                              size_t max_len,
                              double alpha,
                              struct HicritScanResult **out_result);

/**
 * # Safety
 * `result` must come from [`hicrit_scan`] and not be used afterwards.
 */
void hicrit_scan_result_free(struct HicritScanResult *result);

/**
 * Number of detections, 0 for a null handle.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t hicrit_scan_result_len(const struct HicritScanResult *result);

/**
 * Per-interval threshold used by the scan, NaN for a null handle.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
double hicrit_scan_result_threshold(const struct HicritScanResult *result);

/**
 * Detection `index` in order of position.
 *
 * # Safety
 * `result` must be live; `detection` must be writable.
 */
enum HicritStatus hicrit_scan_result_get(const struct HicritScanResult *result,
                                         size_t index,
                                         struct HicritDetection *detection);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HICRIT_H */
