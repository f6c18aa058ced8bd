/* C interface to the cloudseg sky/cloud segmentation library. */

#ifndef CLOUDSEG_H
#define CLOUDSEG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes mirroring the CLI exit-code contract.
 */
typedef enum CloudsegStatus {
  CLOUDSEG_STATUS_OK = 0,
  /**
   * Invalid argument or malformed input data.
   */
  CLOUDSEG_STATUS_VALIDATION = 1,
  /**
   * File system or codec failure.
   */
  CLOUDSEG_STATUS_IO = 2,
  /**
   * Numerical failure (degenerate regression or ground truth).
   */
  CLOUDSEG_STATUS_NUMERICAL = 3,
  /**
   * A required pointer argument was null.
   */
  CLOUDSEG_STATUS_NULL_POINTER = 4,
} CloudsegStatus;

/**
 * Opaque handle to a trained PLS segmentation model.
 */
typedef struct CloudsegModel CloudsegModel;

/**
 * Confusion counts and derived rates for one scored mask pair.
 */
typedef struct CloudsegMetrics {
  uint64_t true_positives;
  uint64_t true_negatives;
  uint64_t false_positives;
  uint64_t false_negatives;
  double precision;
  double recall;
  double f_score;
  double misclassification;
} CloudsegMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *cloudseg_last_error_message(void);

/**
 * Library version as a static UTF-8 string.
 */
const char *cloudseg_version(void);

/**
 * Extracts channel `channel_id` (1..=16, the c1..c16 numbering) of a
 * `width*height*3` RGB buffer into `out` (`width*height` doubles).
 *
 * # Safety
 * `rgb` must point to `width*height*3` doubles and `out` to `width*height`
 * writable doubles.
 */
enum CloudsegStatus cloudseg_extract_channel(const double *rgb,
                                             size_t width,
                                             size_t height,
                                             uint32_t channel_id,
                                             double *out);

/**
 * Trains a PLS model from a row-major `rows x n_channels` feature matrix
 * and 0/1 labels, with `components` latent components.
 *
 * # Safety
 * `features` must point to `rows*n_channels` doubles, `labels` to `rows`
 * bytes, `channel_ids` to `n_channels` ids, and `out_model` to a writable
 * pointer slot. On success the caller owns the handle and must release it
 * with [`cloudseg_model_free`].
 */
enum CloudsegStatus cloudseg_model_train(const double *features,
                                         size_t rows,
                                         const uint32_t *channel_ids,
                                         size_t n_channels,
                                         const uint8_t *labels,
                                         size_t components,
                                         struct CloudsegModel **out_model);

/**
 * Loads a model JSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated UTF-8 path; `out_model` must be writable.
 */
enum CloudsegStatus cloudseg_model_load(const char *path, struct CloudsegModel **out_model);

/**
 * Saves a model to a JSON file, refusing to overwrite unless `force`.
 *
 * # Safety
 * `model` must be a live handle from this library; `path` a NUL-terminated
 * UTF-8 path.
 */
enum CloudsegStatus cloudseg_model_save(const struct CloudsegModel *model,
                                        const char *path,
                                        bool force);

/**
 * Number of input channels the model consumes.
 *
 * # Safety
 * `model` must be a live handle (null returns 0).
 */
size_t cloudseg_model_num_channels(const struct CloudsegModel *model);

/**
 * Releases a model handle. Passing null is a no-op.
 *
 * # Safety
 * `model` must have come from this library and not been freed before.
 */
void cloudseg_model_free(struct CloudsegModel *model);

/**
 * Predicts the per-pixel cloud belongingness map of an RGB image into
 * `prob_out` (`width*height` doubles in [0,1], min-max normalized per
 * image). `degenerate_out` (optional) reports a constant raw prediction.
 *
 * # Safety
 * `rgb` must point to `width*height*3` doubles and `prob_out` to
 * `width*height` writable doubles.
 */
enum CloudsegStatus cloudseg_predict(const struct CloudsegModel *model,
                                     const double *rgb,
                                     size_t width,
                                     size_t height,
                                     double *prob_out,
                                     bool *degenerate_out);

/**
 * Thresholds a probability buffer into a 0/1 mask (`value >= threshold` is
 * cloud).
 *
 * # Safety
 * `prob` must point to `len` doubles and `mask_out` to `len` writable bytes.
 */
enum CloudsegStatus cloudseg_binarize(const double *prob,
                                      size_t len,
                                      double threshold,
                                      uint8_t *mask_out);

/**
 * Scores a predicted 0/1 mask against ground truth.
 *
 * # Safety
 * `pred` and `gt` must point to `len` bytes each; `out` must be writable.
 */
enum CloudsegStatus cloudseg_score(const uint8_t *pred,
                                   const uint8_t *gt,
                                   size_t len,
                                   struct CloudsegMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CLOUDSEG_H */
