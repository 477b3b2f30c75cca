#ifndef WINDPOST_H
#define WINDPOST_H

#include <stddef.h>
#include <stdint.h>

// Result code of every call.
typedef enum WpStatus {
  WP_STATUS_OK = 0,
  WP_STATUS_NULL_POINTER = 1,
  WP_STATUS_INVALID_ARGUMENT = 2,
  WP_STATUS_CONFIG = 3,
  WP_STATUS_DATA = 4,
  WP_STATUS_NUMERICAL = 5,
  WP_STATUS_IO = 6,
  WP_STATUS_BUFFER_TOO_SMALL = 7,
  WP_STATUS_PANIC = 99,
} WpStatus;

// Forecast cases loaded from a case CSV file.
typedef struct WpDataset WpDataset;

// A predictive distribution: truncated normal, GEV or raw ensemble.
typedef struct WpDist WpDist;

// Result of a rolling verification run.
typedef struct WpRun WpRun;

// Pooled (ensemble mean, variance, median, observation) training pairs.
typedef struct WpTrainingSet WpTrainingSet;

// Outcome of a coefficient fit.
typedef struct WpFitInfo {
  // Objective at the returned coefficients: mean CRPS for the truncated
  // normal fit, mean negative log likelihood for the GEV fit.
  double objective;
  uint64_t evaluations;
  // 0 if the optimizer ran out of evaluations.
  int32_t converged;
} WpFitInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null after a
// successful call. The pointer stays valid until the next call on the
// same thread.
const char *wp_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *wp_version(void);

// Zero-truncated normal with location `mu` and scale `sigma`.
//
// # Safety
// `out` must be a valid pointer to writable storage for one pointer.
enum WpStatus wp_dist_tn_new(double mu, double sigma, struct WpDist **out);

// GEV law with location `mu`, scale `sigma` and shape `xi`.
//
// # Safety
// `out` must be a valid pointer to writable storage for one pointer.
enum WpStatus wp_dist_gev_new(double mu, double sigma, double xi, struct WpDist **out);

// Empirical law of `k` ensemble members.
//
// # Safety
// `members` must point to `k` readable doubles; `out` must be writable.
enum WpStatus wp_dist_ensemble_new(const double *members, size_t k, struct WpDist **out);

// # Safety
// `dist` must be null or a pointer returned by a `wp_dist_*_new` call
// that has not been freed.
void wp_dist_free(struct WpDist *dist);

// # Safety
// `dist` must be a live distribution handle and `out` writable.
enum WpStatus wp_dist_cdf(const struct WpDist *dist, double z, double *out);

// # Safety
// `dist` must be a live distribution handle and `out` writable.
enum WpStatus wp_dist_quantile(const struct WpDist *dist, double p, double *out);

// # Safety
// `dist` must be a live distribution handle and `out` writable.
enum WpStatus wp_crps(const struct WpDist *dist, double y, double *out);

// Threshold-weighted CRPS with weight 1{z ≥ r}.
//
// # Safety
// `dist` must be a live distribution handle and `out` writable.
enum WpStatus wp_twcrps_indicator(const struct WpDist *dist, double y, double r, double *out);

// Threshold-weighted CRPS with weight Φ((z − mu)/sigma).
//
// # Safety
// `dist` must be a live distribution handle and `out` writable.
enum WpStatus wp_twcrps_gaussian(const struct WpDist *dist,
                                 double y,
                                 double mu,
                                 double sigma,
                                 double *out);

// Logarithmic score; `+inf` when the density vanishes at `y`. Not
// defined for ensembles.
//
// # Safety
// `dist` must be a live distribution handle and `out` writable.
enum WpStatus wp_log_score(const struct WpDist *dist, double y, double *out);

// Probability integral transform. Not defined for ensembles.
//
// # Safety
// `dist` must be a live distribution handle and `out` writable.
enum WpStatus wp_pit(const struct WpDist *dist, double y, double *out);

// Empty training set for ensembles of `k` members.
//
// # Safety
// `out` must be writable.
enum WpStatus wp_training_new(size_t k, struct WpTrainingSet **out);

// # Safety
// `set` must be null or a live training set handle.
void wp_training_free(struct WpTrainingSet *set);

// Append one pair given by its ensemble summaries.
//
// # Safety
// `set` must be a live training set handle.
enum WpStatus wp_training_push_summary(struct WpTrainingSet *set,
                                       double x_bar,
                                       double s2,
                                       double x_med,
                                       double y);

// Append one pair given by its raw members.
//
// # Safety
// `set` must be a live training set handle and `members` must point to
// `k` readable doubles.
enum WpStatus wp_training_push_members(struct WpTrainingSet *set,
                                       const double *members,
                                       size_t k,
                                       double y);

// # Safety
// `set` must be a live training set handle and `out` writable.
enum WpStatus wp_training_len(const struct WpTrainingSet *set, size_t *out);

// Minimum-CRPS fit of the truncated normal regression
// μ = a + b·x̄, σ² = c + d·S². Writes (a, b, c, d) to `coef`.
// A fit that exhausts its evaluation budget still returns its best point
// with `info.converged = 0`.
//
// # Safety
// `set` must be a live training set handle, `coef` must point to 4
// writable doubles and `info` must be null or writable.
enum WpStatus wp_fit_tn(const struct WpTrainingSet *set,
                        size_t n_min,
                        uint64_t seed,
                        double *coef,
                        struct WpFitInfo *info);

// Maximum-likelihood fit of the GEV regression μ = μ₀ + μ₁·x̄,
// σ = σ₀ + σ₁·x̄ with constant ξ. Writes (μ₀, μ₁, σ₀, σ₁, ξ) to `coef`.
//
// # Safety
// `set` must be a live training set handle, `coef` must point to 5
// writable doubles and `info` must be null or writable.
enum WpStatus wp_fit_gev(const struct WpTrainingSet *set,
                         size_t n_min,
                         uint64_t seed,
                         double *coef,
                         struct WpFitInfo *info);

// Load a case CSV file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum WpStatus wp_dataset_read(const char *path, struct WpDataset **out);

// # Safety
// `dataset` must be null or a live dataset handle.
void wp_dataset_free(struct WpDataset *dataset);

// # Safety
// `dataset` must be a live dataset handle and `out` writable.
enum WpStatus wp_dataset_len(const struct WpDataset *dataset, size_t *out);

// Rolling-window fit and verification of all forecasters. `config_toml`
// is the text of a configuration file, or null for the defaults.
//
// # Safety
// `dataset` must be a live dataset handle, `config_toml` null or a
// NUL-terminated string, and `out` writable.
enum WpStatus wp_run(const struct WpDataset *dataset, const char *config_toml, struct WpRun **out);

// # Safety
// `run` must be null or a live run handle.
void wp_run_free(struct WpRun *run);

// Score table as CSV.
//
// # Safety
// `run` must be a live run handle, `buf` must hold `capacity` writable
// bytes (may be null when `capacity` is 0) and `needed` null or writable.
enum WpStatus wp_run_scores_csv(const struct WpRun *run,
                                char *buf,
                                size_t capacity,
                                size_t *needed);

// Per-case forecast records as CSV.
//
// # Safety
// As for [`wp_run_scores_csv`].
enum WpStatus wp_run_records_csv(const struct WpRun *run,
                                 char *buf,
                                 size_t capacity,
                                 size_t *needed);

// Write every report file into the existing directory `dir`.
//
// # Safety
// `run` must be a live run handle and `dir` a NUL-terminated string.
enum WpStatus wp_run_write_report(const struct WpRun *run, const char *dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WINDPOST_H */
