#ifndef EMOFEAT_H
#define EMOFEAT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible call.
 */
typedef enum EmofeatStatus {
  EMOFEAT_STATUS_OK = 0,
  EMOFEAT_STATUS_NULL_POINTER = 1,
  /**
   * Bad length, dimension, mode or other argument.
   */
  EMOFEAT_STATUS_INVALID_ARGUMENT = 2,
  EMOFEAT_STATUS_IO = 3,
  /**
   * Malformed file contents (checkpoint, model JSON, audio).
   */
  EMOFEAT_STATUS_FORMAT = 4,
  /**
   * Inputs that are well-formed but unusable, e.g. an empty matrix.
   */
  EMOFEAT_STATUS_DATA = 5,
  EMOFEAT_STATUS_NON_FINITE = 6,
  /**
   * A Rust panic was caught at the boundary.
   */
  EMOFEAT_STATUS_INTERNAL = 7,
} EmofeatStatus;

/**
 * Feature extractor loaded from a checkpoint.
 */
typedef struct EmofeatModel EmofeatModel;

/**
 * Standardizer plus one-vs-rest linear SVM.
 */
typedef struct EmofeatSvm EmofeatSvm;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL after a
 * successful call. Valid until the next call on this thread.
 */
const char *emofeat_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *emofeat_version(void);

/**
 * Loads a checkpoint file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum EmofeatStatus emofeat_model_load(const char *path, struct EmofeatModel **out);

/**
 * Releases a model. NULL is ignored.
 *
 * # Safety
 * `model` must come from [`emofeat_model_load`] and not be used afterwards.
 */
void emofeat_model_free(struct EmofeatModel *model);

/**
 * Samples per chunk the model expects.
 *
 * # Safety
 * `model` must be a live handle or NULL (returns 0).
 */
size_t emofeat_model_input_len(const struct EmofeatModel *model);

/**
 * Length of one pooled feature vector.
 *
 * # Safety
 * `model` must be a live handle or NULL (returns 0).
 */
size_t emofeat_model_pooled_dim(const struct EmofeatModel *model);

/**
 * Pooled features for `n_chunks` consecutive chunks of `input_len` 16 kHz
 * samples each. Every chunk is mean-normalized, run in inference mode and
 * mean+max pooled, as in file extraction. `out` receives
 * `n_chunks * pooled_dim` values.
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum EmofeatStatus emofeat_model_features(const struct EmofeatModel *model,
                                          const float *samples,
                                          size_t samples_len,
                                          size_t n_chunks,
                                          float *out,
                                          size_t out_len);

/**
 * Mean then max over time of a `steps x channels` row-major map. `out`
 * receives `2 * channels` values.
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum EmofeatStatus emofeat_pool(const float *fmap,
                                size_t steps,
                                size_t channels,
                                float *out,
                                size_t out_len);

/**
 * Loads a saved SVM model.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum EmofeatStatus emofeat_svm_load(const char *path, struct EmofeatSvm **out);

/**
 * Releases an SVM model. NULL is ignored.
 *
 * # Safety
 * `svm` must come from [`emofeat_svm_load`] and not be used afterwards.
 */
void emofeat_svm_free(struct EmofeatSvm *svm);

/**
 * Number of classes, or 0 for NULL.
 *
 * # Safety
 * `svm` must be a live handle or NULL.
 */
size_t emofeat_svm_num_classes(const struct EmofeatSvm *svm);

/**
 * Input feature dimension, or 0 for NULL.
 *
 * # Safety
 * `svm` must be a live handle or NULL.
 */
size_t emofeat_svm_dim(const struct EmofeatSvm *svm);

/**
 * One decision score per class for a raw (unstandardized) feature vector.
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum EmofeatStatus emofeat_svm_decision(const struct EmofeatSvm *svm,
                                        const double *x,
                                        size_t dim,
                                        double *scores,
                                        size_t num_classes);

/**
 * Predicted class index (highest score, lowest index on ties).
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum EmofeatStatus emofeat_svm_predict(const struct EmofeatSvm *svm,
                                       const double *x,
                                       size_t dim,
                                       size_t *class_out);

/**
 * Unweighted average recall of a `k x k` row-major confusion matrix
 * (rows truth). `strict` nonzero counts classes without support as
 * recall 0; otherwise they are left out.
 *
 * # Safety
 * `counts` must hold `k * k` values and `out` must be valid.
 */
enum EmofeatStatus emofeat_uar(const uint64_t *counts, size_t k, int32_t strict, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EMOFEAT_H */
