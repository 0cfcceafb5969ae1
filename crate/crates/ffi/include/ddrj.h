#ifndef DDRJ_H
#define DDRJ_H

#include <stddef.h>
#include <stdint.h>

// Result codes.
typedef enum DdrjStatus {
  DDRJ_STATUS_OK = 0,
  DDRJ_STATUS_NULL_POINTER = 1,
  DDRJ_STATUS_INVALID_ARGUMENT = 2,
  DDRJ_STATUS_CONFIG = 3,
  DDRJ_STATUS_DATA = 4,
  DDRJ_STATUS_NUMERICAL = 5,
  DDRJ_STATUS_IO = 6,
  DDRJ_STATUS_PANIC = 7,
} DdrjStatus;

// Proposal modes.
typedef enum DdrjMode {
  DDRJ_MODE_DATA_DRIVEN = 0,
  DDRJ_MODE_UNIFORM = 1,
} DdrjMode;

// Model-space priors.
typedef enum DdrjModelPrior {
  DDRJ_MODEL_PRIOR_UNIFORM_SIZE = 0,
  DDRJ_MODEL_PRIOR_UNIFORM_SUBSET = 1,
} DdrjModelPrior;

// Opaque dataset handle.
typedef struct DdrjDataset DdrjDataset;

// Opaque fitted-model handle.
typedef struct DdrjFit DdrjFit;

// Run settings. Optional real-valued settings are disabled with NaN.
typedef struct DdrjRunConfig {
  size_t iterations;
  size_t burn_in;
  size_t thin;
  uint64_t seed;
  size_t chains;
  enum DdrjMode mode;
  double var_beta;
  double var_alpha;
  double var_delta;
  enum DdrjModelPrior model_prior;
  double preselect_threshold;
  double subsample_fraction;
  double space_prob_override;
} DdrjRunConfig;

// Cross-validated metrics; the spreads are standard deviations across folds.
typedef struct DdrjCvMetrics {
  double mce_mean;
  double mce_sd;
  double auc_mean;
  double auc_sd;
} DdrjCvMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer
// stays valid until the next call on the same thread.
const char *ddrj_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *ddrj_version(void);

// Builds a dataset from column-major arrays. `x` is n×g, `z` is n×m with
// entries in {-1, 0, 1}; columns are labelled `roi_1..` and `snp_1..`.
//
// # Safety
// Pointers must reference arrays of the stated sizes; `out` must be writable.
enum DdrjStatus ddrj_dataset_new(size_t n,
                                 const uint8_t *y,
                                 size_t g,
                                 const double *x,
                                 size_t m,
                                 const int8_t *z,
                                 struct DdrjDataset **out);

// Reads a dataset CSV (`y`, `roi_*`, `snp_*` columns).
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum DdrjStatus ddrj_dataset_read_csv(const char *path, struct DdrjDataset **out);

// Simulates a built-in scenario; `seed` replaces the scenario seed unless 0.
//
// # Safety
// `name` must be a NUL-terminated string; `out` must be writable.
enum DdrjStatus ddrj_dataset_simulate(const char *name, uint64_t seed, struct DdrjDataset **out);

// # Safety
// `data` must be null or a handle from a `ddrj_dataset_*` constructor.
void ddrj_dataset_free(struct DdrjDataset *data);

// # Safety
// `data` must be a live handle; output pointers must be writable.
enum DdrjStatus ddrj_dataset_dims(const struct DdrjDataset *data, size_t *n, size_t *g, size_t *m);

// Default settings: 35000 iterations, burn-in 5000, thinning 10, one
// data-driven chain, prior variances 25.
struct DdrjRunConfig ddrj_run_config_default(void);

// Standardizes the ROI columns, runs the chains and keeps the posterior
// summary and model average.
//
// # Safety
// `data` must be a live handle, `config` readable and `out` writable.
enum DdrjStatus ddrj_fit(const struct DdrjDataset *data,
                         const struct DdrjRunConfig *config,
                         struct DdrjFit **out);

// # Safety
// `fit` must be null or a handle from [`ddrj_fit`].
void ddrj_fit_free(struct DdrjFit *fit);

// Copies inclusion probabilities into `roi_mppi[g]` and `snp_mppi[m]`.
//
// # Safety
// `fit` must be live; the arrays must hold `g` and `m` doubles.
enum DdrjStatus ddrj_fit_mppi(const struct DdrjFit *fit,
                              double *roi_mppi,
                              size_t g,
                              double *snp_mppi,
                              size_t m);

// Number of distinct visited models.
//
// # Safety
// `fit` must be live and `count` writable.
enum DdrjStatus ddrj_fit_model_count(const struct DdrjFit *fit, size_t *count);

// Probability and sizes of the model at `rank` (0 = most visited). Active
// indices (0-based) are written to `rois`/`snps` when non-null; those
// buffers must hold at least `*n_rois` / `*n_snps` entries, which can be
// obtained by a first call with null buffers.
//
// # Safety
// `fit` must be live; output pointers writable; buffers large enough.
enum DdrjStatus ddrj_fit_model(const struct DdrjFit *fit,
                               size_t rank,
                               double *probability,
                               size_t *n_rois,
                               size_t *rois,
                               size_t *n_snps,
                               size_t *snps);

// Model-averaged success probabilities for the rows of `data`, whose
// columns are matched to the training columns by label.
//
// # Safety
// Handles must be live; `probabilities` must hold `n` doubles.
enum DdrjStatus ddrj_fit_predict(const struct DdrjFit *fit,
                                 const struct DdrjDataset *data,
                                 double *probabilities,
                                 size_t n);

// Area under the ROC curve of `scores` against 0/1 `classes`.
//
// # Safety
// Both arrays must hold `n` entries; `out` must be writable.
enum DdrjStatus ddrj_auc(const double *scores, const uint8_t *classes, size_t n, double *out);

// Fraction of positions where `predicted` and `actual` differ.
//
// # Safety
// Both arrays must hold `n` entries; `out` must be writable.
enum DdrjStatus ddrj_mce(const uint8_t *predicted, const uint8_t *actual, size_t n, double *out);

// Stratified `k`-fold cross-validation.
//
// # Safety
// `data` must be live, `config` readable and `out` writable.
enum DdrjStatus ddrj_cross_validate(const struct DdrjDataset *data,
                                    const struct DdrjRunConfig *config,
                                    size_t k,
                                    struct DdrjCvMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DDRJ_H */
