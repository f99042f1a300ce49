#ifndef WALKCLIP_H
#define WALKCLIP_H

/* Generated by cbindgen from crates/ffi/src. Do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every fallible call. On anything but `WC_STATUS_OK` the
 message is available from `wc_last_error_message` on the same thread.
 */
typedef enum WcStatus {
  WC_STATUS_OK = 0,
  WC_STATUS_NULL_POINTER = 1,
  WC_STATUS_INVALID_ARGUMENT = 2,
  WC_STATUS_IO = 3,
  WC_STATUS_PARSE = 4,
  WC_STATUS_DIMENSION = 5,
  WC_STATUS_DEGENERATE = 6,
  WC_STATUS_ZERO_NORM = 7,
  WC_STATUS_BUFFER_TOO_SMALL = 8,
  WC_STATUS_PANIC = 9,
} WcStatus;

/*
 Opaque dataset handle.
 */
typedef struct WcDataset WcDataset;

/*
 Opaque uniform-grid radius index.
 */
typedef struct WcSpatialIndex WcSpatialIndex;

/*
 Synthetic-city parameters; origin is fixed to the library default.
 */
typedef struct WcSynthConfig {
  size_t n_locations;
  size_t d_sat;
  size_t d_street;
  size_t d_pdfm;
  double spatial_extent;
  double autocorrelation_length;
  double noise_std;
  size_t augment_copies;
  uint64_t seed;
} WcSynthConfig;

/*
 SAFE parameters. `metric` is 0 for degree-space Euclidean, 1 for haversine.
 */
typedef struct WcSafeConfig {
  double radius;
  double epsilon;
  double power;
  uint32_t metric;
} WcSafeConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *wc_version(void);

/*
 Releases a string returned by this library. NULL is ignored.

 # Safety
 `s` must come from this library and not have been freed.
 */
void wc_string_free(char *s);

/*
 Parses and validates a dataset file.

 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum WcStatus wc_dataset_load(const char *path, struct WcDataset **out);

/*
 Generates a seeded synthetic dataset.

 # Safety
 `cfg` must point to a valid config; `out` must be writable.
 */
enum WcStatus wc_dataset_synthesize(const struct WcSynthConfig *cfg, struct WcDataset **out);

/*
 Writes a dataset in canonical form.

 # Safety
 `ds` must be a live handle; `path` a NUL-terminated string.
 */
enum WcStatus wc_dataset_write(const struct WcDataset *ds, const char *path);

/*
 Number of records; 0 for NULL.

 # Safety
 `ds` must be NULL or a live handle.
 */
size_t wc_dataset_len(const struct WcDataset *ds);

/*
 Embedding widths as `[sat, street, pdfm]`.

 # Safety
 `ds` must be a live handle and `out` must hold 3 values.
 */
enum WcStatus wc_dataset_dims(const struct WcDataset *ds, size_t *out);

/*
 SAFE-transformed copy of a dataset (satellite and street embeddings only).

 # Safety
 `ds` and `cfg` must be valid; `out` must be writable.
 */
enum WcStatus wc_dataset_safe_transform(const struct WcDataset *ds,
                                        const struct WcSafeConfig *cfg,
                                        struct WcDataset **out);

/*
 Split plan (hold-out plus stratified folds) in its text serialization.
 Release `*out_text` with `wc_string_free`.

 # Safety
 `ds` must be a live handle; `out_text` must be writable.
 */
enum WcStatus wc_dataset_split_plan(const struct WcDataset *ds,
                                    double test_fraction,
                                    size_t k,
                                    uint64_t seed,
                                    char **out_text);

/*
 # Safety
 `ds` must be NULL or a handle from this library, not yet freed.
 */
void wc_dataset_free(struct WcDataset *ds);

/*
 Euclidean distance in degree space.
 */
double wc_degree_distance(double lat_a, double lon_a, double lat_b, double lon_b);

/*
 Builds a degree-space radius index over `n` points.

 # Safety
 `lats`/`lons` must hold `n` values; `out` must be writable.
 */
enum WcStatus wc_index_build(const double *lats,
                             const double *lons,
                             size_t n,
                             double cell_size,
                             struct WcSpatialIndex **out);

/*
 Neighbors of point `i` strictly within `radius`, ascending.

 Always stores the neighbor count in `*out_len`. Returns
 `WC_STATUS_BUFFER_TOO_SMALL` (and writes nothing to `out`) when it exceeds `cap`.

 # Safety
 `idx` must be a live handle; `out` must hold `cap` values.
 */
enum WcStatus wc_index_radius_query(const struct WcSpatialIndex *idx,
                                    size_t i,
                                    double radius,
                                    size_t *out,
                                    size_t cap,
                                    size_t *out_len);

/*
 # Safety
 `idx` must be NULL or a handle from this library, not yet freed.
 */
void wc_index_free(struct WcSpatialIndex *idx);

/*
 Inverse-distance weight `1 / (distance^power + epsilon)`.
 */
double wc_idw_weight(double distance, double epsilon, double power);

/*
 SAFE aggregation of an `n x d` row-major feature matrix into `out` (`n x d`).

 # Safety
 `features` and `out` must hold `n*d` values; `lats`/`lons` must hold `n`.
 */
enum WcStatus wc_safe_aggregate(const double *features,
                                size_t n,
                                size_t d,
                                const double *lats,
                                const double *lons,
                                const struct WcSafeConfig *cfg,
                                double *out);

/*
 Cosine similarity of two length-`n` vectors.

 # Safety
 `u`, `v` must hold `n` values; `out` must be writable.
 */
enum WcStatus wc_cosine_similarity(const double *u, const double *v, size_t n, double *out);

/*
 InfoNCE loss of `n` pairs (`image`: n x p, `text`: n x q) under projections
 `image_proj` (p x k) and `text_proj` (q x k) with temperature `exp(log_tau)`.

 # Safety
 All buffers must hold the stated number of values; `out` must be writable.
 */
enum WcStatus wc_info_nce_loss(const double *image,
                               const double *text,
                               size_t n,
                               size_t p,
                               size_t q,
                               const double *image_proj,
                               const double *text_proj,
                               size_t k,
                               double log_tau,
                               bool symmetric,
                               double *out);

/*
 # Safety
 `preds`/`targets` must hold `n` values; `out` must be writable.
 */
enum WcStatus wc_r_squared(const double *preds, const double *targets, size_t n, double *out);

/*
 # Safety
 `preds`/`targets` must hold `n` values; `out` must be writable.
 */
enum WcStatus wc_rmse(const double *preds, const double *targets, size_t n, double *out);

/*
 Order-1 transport cost between two equal-size samples.

 # Safety
 `a`/`b` must hold `n` values; `out` must be writable.
 */
enum WcStatus wc_wasserstein_1d(const double *a, const double *b, size_t n, double *out);

/*
 Sliced Wasserstein distance between two clouds of `n` 3-D points (row-major
 `n x 3`).

 # Safety
 `a`/`b` must hold `3*n` values; `out` must be writable.
 */
enum WcStatus wc_sliced_wasserstein(const double *a,
                                    const double *b,
                                    size_t n,
                                    size_t n_proj,
                                    uint64_t seed,
                                    double *out);

/*
 Runs the ablation pipeline from a TOML configuration string, writing artifacts
 to the configured output directory. `*out_report` receives the deterministic
 report text; release it with `wc_string_free`.

 # Safety
 `config_toml` must be NUL-terminated; `out_report` must be writable.
 */
enum WcStatus wc_run(const char *config_toml, char **out_report);

/*
 Message of the last failed call on this thread, or NULL. Valid until the next
 call into this library from the same thread.
 */
const char *wc_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WALKCLIP_H */
