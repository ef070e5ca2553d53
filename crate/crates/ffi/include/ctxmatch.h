#ifndef CTXMATCH_H
#define CTXMATCH_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum CtxStatus {
  CTX_STATUS_OK = 0,
  CTX_STATUS_NULL_POINTER = 1,
  CTX_STATUS_INVALID_INPUT = 2,
  CTX_STATUS_DIMENSION_MISMATCH = 3,
  CTX_STATUS_OUT_OF_RANGE = 4,
  CTX_STATUS_DEGENERATE = 5,
  CTX_STATUS_UNSUPPORTED = 6,
  CTX_STATUS_IO = 7,
  CTX_STATUS_PARSE = 8,
  CTX_STATUS_PANIC = 9,
} CtxStatus;

typedef enum CtxScoreVariant {
  CTX_SCORE_VARIANT_D_GE = 0,
  CTX_SCORE_VARIANT_D_PLUS_GE = 1,
  CTX_SCORE_VARIANT_D_PLUS = 2,
} CtxScoreVariant;

typedef enum CtxFginn {
  CTX_FGINN_NONE = 0,
  CTX_FGINN_PIXELS = 1,
  CTX_FGINN_OVERLAP = 2,
} CtxFginn;

typedef enum CtxCombiner {
  CTX_COMBINER_FIRST = 0,
  CTX_COMBINER_SECOND = 1,
  CTX_COMBINER_MIN = 2,
  CTX_COMBINER_MAX = 3,
  CTX_COMBINER_HARMONIC = 4,
} CtxCombiner;

typedef enum CtxBoundaryMode {
  CTX_BOUNDARY_MODE_ALPHA = 0,
  CTX_BOUNDARY_MODE_CONVEX_HULL = 1,
  CTX_BOUNDARY_MODE_NONE = 2,
} CtxBoundaryMode;

typedef enum CtxModelKind {
  CTX_MODEL_KIND_HOMOGRAPHY = 0,
  CTX_MODEL_KIND_FUNDAMENTAL = 1,
} CtxModelKind;

/**
 * Descriptor distances, row-major, image 1 by image 2.
 */
typedef struct CtxDistanceMatrix CtxDistanceMatrix;

typedef struct CtxMatchSet CtxMatchSet;

/**
 * Keypoints and image sizes of a pair.
 */
typedef struct CtxPairContext CtxPairContext;

/**
 * Blob matching settings. `f == 0` keeps every candidate of a line.
 */
typedef struct CtxBlobConfig {
  size_t f;
  /**
   * Union of the row and column pre-filters instead of their intersection.
   */
  bool f_union;
  size_t f_prime;
  enum CtxScoreVariant score_variant;
  enum CtxFginn fginn;
  /**
   * Pixel distance or overlap error, depending on `fginn`.
   */
  double fginn_value;
  enum CtxCombiner combiner;
  bool use_threshold;
  double threshold;
} CtxBlobConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static string.
 */
const char *ctxmatch_version(void);

/**
 * Message of the last failure on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *ctxmatch_last_error(void);

/**
 * # Safety
 * `values` must hold `rows * cols` doubles; `out` must be writable.
 */
enum CtxStatus ctxmatch_distance_matrix_new(size_t rows,
                                            size_t cols,
                                            const double *values,
                                            struct CtxDistanceMatrix **out);

/**
 * # Safety
 * `d` must come from [`ctxmatch_distance_matrix_new`] or be null.
 */
void ctxmatch_distance_matrix_free(struct CtxDistanceMatrix *d);

/**
 * Keypoints given as interleaved `x, y` coordinates.
 *
 * # Safety
 * `xy1` and `xy2` must hold `2 * n1` and `2 * n2` doubles.
 */
enum CtxStatus ctxmatch_pair_context_new(const double *xy1,
                                         size_t n1,
                                         const double *xy2,
                                         size_t n2,
                                         double width1,
                                         double height1,
                                         double width2,
                                         double height2,
                                         struct CtxPairContext **out);

/**
 * Attaches patch ellipses `a, b, c` (matrix `[[a, c], [c, b]]`) to every
 * keypoint of image 1 or 2. `n` must equal that image's keypoint count.
 *
 * # Safety
 * `ctx` must be a live context and `abc` must hold `3 * n` doubles.
 */
enum CtxStatus ctxmatch_pair_context_set_ellipses(struct CtxPairContext *ctx,
                                                  uint32_t image,
                                                  const double *abc,
                                                  size_t n);

/**
 * # Safety
 * `ctx` must come from [`ctxmatch_pair_context_new`] or be null.
 */
void ctxmatch_pair_context_free(struct CtxPairContext *ctx);

/**
 * Builds a match set from parallel arrays, keeping their order.
 *
 * # Safety
 * `i`, `j` and `score` must each hold `n` elements.
 */
enum CtxStatus ctxmatch_match_set_new(const size_t *i,
                                      const size_t *j,
                                      const double *score,
                                      size_t n,
                                      struct CtxMatchSet **out);

/**
 * Number of matches; 0 for null.
 *
 * # Safety
 * `set` must be a live match set or null.
 */
size_t ctxmatch_match_set_len(const struct CtxMatchSet *set);

/**
 * Reads match `k`. Any of the outputs may be null.
 *
 * # Safety
 * `set` must be a live match set; non-null outputs must be writable.
 */
enum CtxStatus ctxmatch_match_set_get(const struct CtxMatchSet *set,
                                      size_t k,
                                      size_t *i,
                                      size_t *j,
                                      double *score);

/**
 * # Safety
 * `set` must come from this library or be null.
 */
void ctxmatch_match_set_free(struct CtxMatchSet *set);

/**
 * Recommended blob matching settings.
 */
struct CtxBlobConfig ctxmatch_blob_config_best(void);

/**
 * Plain one-to-one nearest neighbour ratio matching.
 */
struct CtxBlobConfig ctxmatch_blob_config_baseline(void);

/**
 * # Safety
 * All pointers must be live handles; `out` must be writable.
 */
enum CtxStatus ctxmatch_blob_match(const struct CtxDistanceMatrix *d,
                                   const struct CtxPairContext *ctx,
                                   const struct CtxBlobConfig *cfg,
                                   struct CtxMatchSet **out);

/**
 * Spatial filtering. `dtm1_only` skips the recovery stage.
 *
 * # Safety
 * All pointers must be live handles; `out` must be writable.
 */
enum CtxStatus ctxmatch_dtm(const struct CtxMatchSet *matches,
                            const struct CtxPairContext *ctx,
                            enum CtxBoundaryMode boundary_mode,
                            bool dtm1_only,
                            struct CtxMatchSet **out);

/**
 * Single-sample model fit. On success `model` receives the row-major
 * 3x3 matrix and `failed` whether no model could be formed, in which case
 * the output set is empty and `model` is zeroed. `model` and `failed` may
 * be null.
 *
 * # Safety
 * All handles must be live; `model` must hold 9 doubles when non-null.
 */
enum CtxStatus ctxmatch_one_sac(const struct CtxMatchSet *matches,
                                const struct CtxPairContext *ctx,
                                enum CtxModelKind kind,
                                double threshold,
                                struct CtxMatchSet **out,
                                double *model,
                                bool *failed);

/**
 * Copies the message of the last failure into `buf` (truncated, always
 * NUL-terminated) and returns the full message length.
 *
 * # Safety
 * `buf` must hold `len` bytes when non-null.
 */
size_t ctxmatch_last_error_copy(char *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CTXMATCH_H */
