#ifndef CERTIVERIFY_H
#define CERTIVERIFY_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CvStatus {
  CV_OK = 0,
  CV_NULL_POINTER = 1,
  CV_INVALID_INPUT = 2,
  CV_PARSE_ERROR = 3,
  CV_INFEASIBLE = 4,
  CV_UNBOUNDED = 5,
  CV_CORRECTION_FAILURE = 6,
  CV_CONFIG_ERROR = 7,
  CV_IO_ERROR = 8,
  CV_PANIC = 9,
} CvStatus;

/**
 * A certification scheme bound to `eps` and `delta`.
 */
typedef struct CvCertifier CvCertifier;

/**
 * A dataset together with its ground-truth validity mask.
 */
typedef struct CvDataset CvDataset;

typedef struct CvCertifyResult {
  /**
   * 1 when certified, 0 when invalid records were found.
   */
  int32_t certified;
  /**
   * 1 when `f` is zero and the guarantee is vacuous.
   */
  int32_t vacuous;
  /**
   * The certified value; NaN when invalid records were found.
   */
  double value;
  uint64_t invalid_count;
  /**
   * Smallest invalid id found, or -1.
   */
  int64_t first_invalid_id;
  uint64_t verifications;
} CvCertifyResult;

typedef struct CvCorrectResult {
  double value;
  uint64_t verifications;
  uint64_t rounds;
  uint64_t catches;
  uint64_t removed_count;
} CvCorrectResult;

typedef struct CvTrialStats {
  uint64_t trials;
  uint64_t failures;
  uint64_t correction_failures;
  double failure_rate;
  double mean_verifications;
  uint64_t max_verifications;
  double mean_invalid_found;
  double mean_rounds;
  uint64_t budget_violations;
} CvTrialStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty if none. The
 * pointer stays valid until the next failing call on this thread.
 */
const char *cv_last_error_message(void);

/**
 * Builds a scalar dataset with ids `0..n`; ids in `invalid_ids` are invalid.
 *
 * # Safety
 * `values` must point to `n` doubles and `invalid_ids` to `n_invalid`
 * sizes (either may be null when its length is 0). `out` must be writable.
 */
enum CvStatus cv_dataset_from_scalars(const double *values,
                                      size_t n,
                                      const size_t *invalid_ids,
                                      size_t n_invalid,
                                      struct CvDataset **out);

/**
 * Loads a JSON dataset document.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum CvStatus cv_dataset_load(const char *path, struct CvDataset **out);

/**
 * Number of records, or 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live handle.
 */
size_t cv_dataset_len(const struct CvDataset *ds);

/**
 * Number of invalid records in the ground truth.
 *
 * # Safety
 * `ds` must be null or a live handle.
 */
size_t cv_dataset_invalid_count(const struct CvDataset *ds);

/**
 * # Safety
 * `ds` must be null or a handle not yet freed.
 */
void cv_dataset_free(struct CvDataset *ds);

/**
 * Creates a certifier by scheme name (`sum`, `max`, `max-of-sums`,
 * `average`, `packing`, `covering`, `general-lp`, `lipschitz-tsp`,
 * `lipschitz-steiner`).
 *
 * # Safety
 * `scheme` must be a NUL-terminated string and `out` writable.
 */
enum CvStatus cv_certifier_new(const char *scheme,
                               double eps,
                               double delta,
                               struct CvCertifier **out);

/**
 * # Safety
 * `cert` must be null or a handle not yet freed.
 */
void cv_certifier_free(struct CvCertifier *cert);

/**
 * `f` on all records of the dataset.
 *
 * # Safety
 * `cert` and `ds` must be live handles and `out` writable.
 */
enum CvStatus cv_evaluate(const struct CvCertifier *cert, const struct CvDataset *ds, double *out);

/**
 * One certification run against the dataset's ground truth, charged under
 * the weak budget.
 *
 * # Safety
 * `cert` and `ds` must be live handles and `out` writable.
 */
enum CvStatus cv_certify(const struct CvCertifier *cert,
                         const struct CvDataset *ds,
                         uint64_t seed,
                         struct CvCertifyResult *out);

/**
 * Runs a correction scheme (`weak`, `weak-general`, `strong-sum`,
 * `strong-max`). `scheme` names the certifier for weak modes and may be
 * null for the default (sum, or max for strong-max).
 *
 * # Safety
 * `mode` must be a NUL-terminated string, `scheme` null or one, `ds` a live
 * handle and `out` writable.
 */
enum CvStatus cv_correct(const char *mode,
                         const char *scheme,
                         const struct CvDataset *ds,
                         double eps,
                         double delta,
                         uint64_t seed,
                         struct CvCorrectResult *out);

/**
 * Runs a seeded experiment. `mode` null means certification with
 * `scheme`; otherwise a correction. `params` is a comma-separated
 * `KEY=VALUE` list or null. `ds` may be null for generative adversaries.
 *
 * # Safety
 * String arguments must be NUL-terminated (or null where allowed), `ds`
 * null or a live handle, and `out` writable.
 */
enum CvStatus cv_run_trials(const char *scheme,
                            const char *mode,
                            const char *adversary,
                            const char *params,
                            const struct CvDataset *ds,
                            double eps,
                            double delta,
                            uint64_t trials,
                            uint64_t seed,
                            struct CvTrialStats *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CERTIVERIFY_H */
