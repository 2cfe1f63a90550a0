#ifndef KMS_H
#define KMS_H

/* Generated by cbindgen from kms-capi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible function.
 */
typedef enum KmsStatus {
  KMS_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  KMS_STATUS_NULL_POINTER = 1,
  /**
   * Arguments violated a precondition (bad k, empty grid, bad element...).
   */
  KMS_STATUS_INVALID_INPUT = 2,
  /**
   * A caller-provided buffer does not have the required length.
   */
  KMS_STATUS_BUFFER_SIZE = 3,
  /**
   * An unexpected internal failure; the operation did not complete.
   */
  KMS_STATUS_INTERNAL = 4,
} KmsStatus;

/**
 * Built-in structuring elements.
 */
typedef enum KmsSeKind {
  /**
   * Flat 3x3 neighborhood including the center.
   */
  KMS_SE_KIND_B1 = 0,
  /**
   * Flat cross with diagonal reach pushed to distance 10.
   */
  KMS_SE_KIND_B2 = 1,
} KmsSeKind;

/**
 * Grid edge handling.
 */
typedef enum KmsBoundary {
  /**
   * Out-of-range neighbors are dropped.
   */
  KMS_BOUNDARY_CLAMP = 0,
  /**
   * Neighbor coordinates fold modulo the grid dimensions.
   */
  KMS_BOUNDARY_WRAP = 1,
} KmsBoundary;

/**
 * Execution engine.
 */
typedef enum KmsEngine {
  KMS_ENGINE_SEQUENTIAL = 0,
  KMS_ENGINE_PARALLEL = 1,
} KmsEngine;

/**
 * Opaque clustering-result handle.
 */
typedef struct KmsClustering KmsClustering;

/**
 * Opaque occupancy grid handle.
 */
typedef struct KmsGrid KmsGrid;

/**
 * Clustering parameters. `delta_max = 0` selects the default guard,
 * `max(width, height)` of the grid.
 */
typedef struct KmsOptions {
  uint32_t k;
  enum KmsSeKind se;
  enum KmsBoundary boundary;
  enum KmsEngine engine;
  uint32_t delta_max;
} KmsOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static description of a status code.
 */
const char *kms_status_message(enum KmsStatus status);

/**
 * Builds a grid by discretizing `len` points given as parallel x/y arrays.
 *
 * # Safety
 * `xs` and `ys` must point to `len` readable doubles; `out` must be a valid
 * pointer to receive the handle. The handle must be freed with
 * [`kms_grid_free`].
 */
enum KmsStatus kms_grid_from_points(const double *xs,
                                    const double *ys,
                                    size_t len,
                                    double gamma,
                                    struct KmsGrid **out);

/**
 * Builds a grid from 8-bit grey pixels (row-major, `width * height` bytes);
 * a pixel strictly below `threshold` becomes an instance.
 *
 * # Safety
 * `pixels` must point to `width * height` readable bytes; `out` must be
 * valid. Free the handle with [`kms_grid_free`].
 */
enum KmsStatus kms_grid_from_pixels(const uint8_t *pixels,
                                    uint32_t width,
                                    uint32_t height,
                                    uint8_t threshold,
                                    struct KmsGrid **out);

/**
 * Builds a grid with exactly `instances` distinct random cells set,
 * deterministic per `seed`.
 *
 * # Safety
 * `out` must be valid. Free the handle with [`kms_grid_free`].
 */
enum KmsStatus kms_grid_random(uint32_t width,
                               uint32_t height,
                               uint64_t instances,
                               uint64_t seed,
                               struct KmsGrid **out);

/**
 * Grid width in cells; 0 for a null handle.
 *
 * # Safety
 * `grid` must be null or a live handle from this library.
 */
uint32_t kms_grid_width(const struct KmsGrid *grid);

/**
 * Grid height in cells; 0 for a null handle.
 *
 * # Safety
 * `grid` must be null or a live handle from this library.
 */
uint32_t kms_grid_height(const struct KmsGrid *grid);

/**
 * Number of instance cells; 0 for a null handle.
 *
 * # Safety
 * `grid` must be null or a live handle from this library.
 */
uint64_t kms_grid_foreground_count(const struct KmsGrid *grid);

/**
 * Releases a grid handle. Null is ignored.
 *
 * # Safety
 * `grid` must be a handle returned by this library, not yet freed.
 */
void kms_grid_free(struct KmsGrid *grid);

/**
 * Clusters a grid with a built-in structuring element.
 *
 * # Safety
 * `grid` must be a live grid handle; `options` and `out` must be valid
 * pointers. Free the result with [`kms_clustering_free`].
 */
enum KmsStatus kms_cluster_run(const struct KmsGrid *grid,
                               const struct KmsOptions *options,
                               struct KmsClustering **out);

/**
 * Clusters a grid with a caller-supplied flat structuring element given as
 * `offset_count` (dy, dx) pairs. The element must contain the origin and
 * reach in all four directions.
 *
 * # Safety
 * `offsets` must point to `2 * offset_count` readable `int32_t`; the other
 * arguments follow [`kms_cluster_run`].
 */
enum KmsStatus kms_cluster_run_custom(const struct KmsGrid *grid,
                                      const struct KmsOptions *options,
                                      const int32_t *offsets,
                                      size_t offset_count,
                                      struct KmsClustering **out);

/**
 * Number of clusters in the result; 0 for a null handle.
 *
 * # Safety
 * `clustering` must be null or a live handle from this library.
 */
uint32_t kms_clustering_cluster_count(const struct KmsClustering *clustering);

/**
 * Whether the run converged (false when the delta guard tripped).
 *
 * # Safety
 * `clustering` must be null or a live handle from this library.
 */
bool kms_clustering_converged(const struct KmsClustering *clustering);

/**
 * Number of sweeps the run executed; 0 for a null handle.
 *
 * # Safety
 * `clustering` must be null or a live handle from this library.
 */
uint64_t kms_clustering_passes(const struct KmsClustering *clustering);

/**
 * Grid width of the result; 0 for a null handle.
 *
 * # Safety
 * `clustering` must be null or a live handle from this library.
 */
uint32_t kms_clustering_width(const struct KmsClustering *clustering);

/**
 * Grid height of the result; 0 for a null handle.
 *
 * # Safety
 * `clustering` must be null or a live handle from this library.
 */
uint32_t kms_clustering_height(const struct KmsClustering *clustering);

/**
 * Length of the delta history (one entry per pass).
 *
 * # Safety
 * `clustering` must be null or a live handle from this library.
 */
size_t kms_clustering_delta_history_len(const struct KmsClustering *clustering);

/**
 * Copies the delta history into `buffer`.
 *
 * # Safety
 * `buffer` must point to at least `len` writable `uint32_t`, where `len`
 * is [`kms_clustering_delta_history_len`].
 */
enum KmsStatus kms_clustering_copy_delta_history(const struct KmsClustering *clustering,
                                                 uint32_t *buffer,
                                                 size_t len);

/**
 * Copies the final labels row-major into `buffer` (`-1` is background).
 *
 * # Safety
 * `buffer` must point to `len` writable `int32_t`, where `len` is exactly
 * `width * height` of the result.
 */
enum KmsStatus kms_clustering_copy_labels(const struct KmsClustering *clustering,
                                          int32_t *buffer,
                                          size_t len);

/**
 * Erases every cluster with `tau` or fewer cells from the result, writing
 * the number of erased clusters to `removed` when non-null. The handle's
 * cluster census is updated in place.
 *
 * # Safety
 * `clustering` must be a live, exclusively-owned handle.
 */
enum KmsStatus kms_clustering_remove_small(struct KmsClustering *clustering,
                                           uint64_t tau,
                                           uint64_t *removed);

/**
 * Releases a clustering handle. Null is ignored.
 *
 * # Safety
 * `clustering` must be a handle returned by this library, not yet freed.
 */
void kms_clustering_free(struct KmsClustering *clustering);

/**
 * Number of connected components of the foreground under the element
 * adjacency — the most clusters any k can produce for this grid.
 *
 * # Safety
 * `grid` must be a live grid handle; `out` must be valid.
 */
enum KmsStatus kms_grid_intrinsic_max_clusters(const struct KmsGrid *grid,
                                               enum KmsSeKind se,
                                               enum KmsBoundary boundary,
                                               uint32_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KMS_H */
