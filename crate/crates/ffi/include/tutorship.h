#ifndef TUTORSHIP_H
#define TUTORSHIP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TsStatus {
  TS_STATUS_OK = 0,
  TS_STATUS_NULL_POINTER = 1,
  /**
   * Bad argument or configuration.
   */
  TS_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Malformed input data (rows, encodings).
   */
  TS_STATUS_INVALID_DATA = 3,
  /**
   * The quantity is undefined for this input (e.g. zero variance).
   */
  TS_STATUS_UNDEFINED = 4,
  TS_STATUS_IO = 5,
  TS_STATUS_PANIC = 6,
} TsStatus;

/**
 * Result of a k-medoids run.
 */
typedef struct TsClustering TsClustering;

/**
 * Learner records loaded from a session CSV.
 */
typedef struct TsDataset TsDataset;

/**
 * Pairwise DTW distances between learners.
 */
typedef struct TsDistanceMatrix TsDistanceMatrix;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *ts_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ts_version(void);

/**
 * Offset-encodes a tutor sequence given as integer tutor labels.
 * `out` must hold `len` values: -1 for a new tutor, otherwise the distance
 * back to the same tutor's previous session.
 *
 * # Safety
 * `tutors` must point to `len` values and `out` to `len` writable slots.
 */
enum TsStatus ts_encode(const int64_t *tutors, size_t len, int32_t *out);

/**
 * Distributedness of a tutor sequence in the given log base (2 for bits).
 *
 * # Safety
 * `tutors` must point to `len` values; `out` must be writable.
 */
enum TsStatus ts_distributedness(const int64_t *tutors, size_t len, double log_base, double *out);

/**
 * DTW distance between two numeric sequences. `window <= 0` disables the
 * Sakoe–Chiba band.
 *
 * # Safety
 * `x` must point to `m` values, `y` to `n` values; `out` must be writable.
 */
enum TsStatus ts_dtw_distance(const double *x,
                              size_t m,
                              const double *y,
                              size_t n,
                              int64_t window,
                              bool length_normalize,
                              double *out);

/**
 * Wraps a dense row-major `n × n` matrix, which must be symmetric with a zero
 * diagonal and finite non-negative entries.
 *
 * # Safety
 * `data` must point to `n * n` values; `out` must be writable.
 */
enum TsStatus ts_distance_matrix_from_dense(const double *data,
                                            size_t n,
                                            struct TsDistanceMatrix **out);

/**
 * Pairwise DTW distances between `count` encoded sequences; sequence `i`
 * starts at `seqs[i]` and has `lens[i]` values.
 *
 * # Safety
 * `seqs` and `lens` must point to `count` entries, each `seqs[i]` to
 * `lens[i]` values; `out` must be writable.
 */
enum TsStatus ts_distance_matrix_from_sequences(const int32_t *const *seqs,
                                                const size_t *lens,
                                                size_t count,
                                                int64_t window,
                                                bool length_normalize,
                                                struct TsDistanceMatrix **out);

/**
 * # Safety
 * `m` must be a live matrix handle; `out` must be writable.
 */
enum TsStatus ts_distance_matrix_len(const struct TsDistanceMatrix *m, size_t *out);

/**
 * # Safety
 * `m` must be a live matrix handle; `out` must be writable.
 */
enum TsStatus ts_distance_matrix_get(const struct TsDistanceMatrix *m,
                                     size_t i,
                                     size_t j,
                                     double *out);

/**
 * # Safety
 * `m` must be null or a handle not yet freed.
 */
void ts_distance_matrix_free(struct TsDistanceMatrix *m);

/**
 * PAM k-medoids over a distance matrix.
 *
 * # Safety
 * `m` must be a live matrix handle; `out` must be writable.
 */
enum TsStatus ts_k_medoids(const struct TsDistanceMatrix *m,
                           size_t k,
                           size_t max_iter,
                           struct TsClustering **out);

/**
 * # Safety
 * `c` must be a live clustering handle; `out` must be writable.
 */
enum TsStatus ts_clustering_k(const struct TsClustering *c, size_t *out);

/**
 * # Safety
 * `c` must be a live clustering handle; `out` must be writable.
 */
enum TsStatus ts_clustering_total_cost(const struct TsClustering *c, double *out);

/**
 * Cluster number (0..k, ordered by medoid index) for each of the `len` items.
 *
 * # Safety
 * `c` must be a live clustering handle; `out` must hold `len` values.
 */
enum TsStatus ts_clustering_labels(const struct TsClustering *c, size_t *out, size_t len);

/**
 * Item index of each of the `k` medoids, ascending.
 *
 * # Safety
 * `c` must be a live clustering handle; `out` must hold `len` values.
 */
enum TsStatus ts_clustering_medoids(const struct TsClustering *c, size_t *out, size_t len);

/**
 * # Safety
 * `c` must be null or a handle not yet freed.
 */
void ts_clustering_free(struct TsClustering *c);

/**
 * Mean silhouette width of a clustering over the matrix it was built from.
 *
 * # Safety
 * `m` and `c` must be live handles; `out` must be writable.
 */
enum TsStatus ts_silhouette(const struct TsDistanceMatrix *m,
                            const struct TsClustering *c,
                            double *out);

/**
 * Spearman rank correlation. `p_out` receives NaN when the sample is too
 * small for a p-value.
 *
 * # Safety
 * `x` and `y` must point to `n` values; `rho_out` and `p_out` must be writable.
 */
enum TsStatus ts_spearman(const double *x,
                          const double *y,
                          size_t n,
                          double *rho_out,
                          double *p_out);

/**
 * One-way ANOVA. `values` holds the groups back to back; group `g` has
 * `group_sizes[g]` values.
 *
 * # Safety
 * `group_sizes` must point to `n_groups` values and `values` to their sum;
 * `f_out` and `p_out` must be writable.
 */
enum TsStatus ts_anova(const double *values,
                       const size_t *group_sizes,
                       size_t n_groups,
                       double *f_out,
                       double *p_out);

/**
 * Loads a session CSV (`learner_id,session_index,tutor_id,<skills>`).
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum TsStatus ts_dataset_load_csv(const char *path, struct TsDataset **out);

/**
 * Number of learners in the dataset.
 *
 * # Safety
 * `d` must be a live dataset handle; `out` must be writable.
 */
enum TsStatus ts_dataset_len(const struct TsDataset *d, size_t *out);

/**
 * # Safety
 * `d` must be null or a handle not yet freed.
 */
void ts_dataset_free(struct TsDataset *d);

/**
 * Runs the full analysis and returns the report as JSON in `*out`, to be
 * released with [`ts_string_free`]. `config_json` may be null for defaults.
 *
 * # Safety
 * `d` must be a live dataset handle, `config_json` null or a NUL-terminated
 * string, and `out` writable.
 */
enum TsStatus ts_analyze(const struct TsDataset *d, const char *config_json, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void ts_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TUTORSHIP_H */
