#ifndef TEXTUREBENCH_H
#define TEXTUREBENCH_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum TbStatus {
  TB_STATUS_OK = 0,
  TB_STATUS_NULL_POINTER = 1,
  TB_STATUS_INVALID_ARGUMENT = 2,
  TB_STATUS_DIMENSION_MISMATCH = 3,
  TB_STATUS_BUFFER_TOO_SMALL = 4,
  TB_STATUS_IO = 5,
  TB_STATUS_PARSE = 6,
  TB_STATUS_DATASET = 7,
  TB_STATUS_PANIC = 8,
} TbStatus;

// A feature matrix with one class label per row.
typedef struct TbFeatureMatrix TbFeatureMatrix;

// A trained classifier together with its class names.
typedef struct TbModel TbModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failed call on this thread; empty after a
// successful call. Valid until the next call into this library on the thread.
const char *tb_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *tb_version(void);

// Number of rotation classes of `points`-bit patterns (the LBP histogram length).
//
// # Safety
// `out` must be a valid pointer.
enum TbStatus tb_necklace_count(size_t points, uint64_t *out);

// Rotation-invariant LBP histogram of an image. `*written` receives the
// histogram length even when `out_len` is too small.
//
// # Safety
// `pixels` holds `width * height` doubles; `out` holds `out_len` doubles.
enum TbStatus tb_lbp_histogram(const double *pixels,
                               size_t width,
                               size_t height,
                               size_t points,
                               double radius,
                               bool normalize,
                               double *out,
                               size_t out_len,
                               size_t *written);

// HOG descriptor length for an image size.
//
// # Safety
// `out` must be a valid pointer.
enum TbStatus tb_hog_len(size_t width,
                         size_t height,
                         size_t cell,
                         size_t block,
                         size_t bins,
                         size_t *out);

// HOG descriptor of an image.
//
// # Safety
// `pixels` holds `width * height` doubles; `out` holds `out_len` doubles.
enum TbStatus tb_hog_features(const double *pixels,
                              size_t width,
                              size_t height,
                              size_t cell,
                              size_t block,
                              size_t bins,
                              bool signed_orientations,
                              double *out,
                              size_t out_len,
                              size_t *written);

// Builds a matrix from `rows * cols` row-major values and `rows` labels.
//
// # Safety
// `data` holds `rows * cols` doubles, `labels` holds `rows` strings;
// `extractor` and `params` are strings; `out` is writable.
enum TbStatus tb_features_new(const double *data,
                              size_t rows,
                              size_t cols,
                              const char *const *labels,
                              const char *extractor,
                              const char *params,
                              struct TbFeatureMatrix **out);

// Reads a feature file.
//
// # Safety
// `path` is a string; `out` is writable.
enum TbStatus tb_features_read(const char *path, struct TbFeatureMatrix **out);

// Writes a feature file.
//
// # Safety
// `matrix` comes from this library; `path` is a string.
enum TbStatus tb_features_write(const struct TbFeatureMatrix *matrix, const char *path);

// Number of rows; 0 for a null handle.
//
// # Safety
// `matrix` is null or comes from this library.
size_t tb_features_rows(const struct TbFeatureMatrix *matrix);

// Number of columns; 0 for a null handle.
//
// # Safety
// `matrix` is null or comes from this library.
size_t tb_features_cols(const struct TbFeatureMatrix *matrix);

// Copies row `row` into `out`.
//
// # Safety
// `matrix` comes from this library; `out` holds `out_len` doubles.
enum TbStatus tb_features_row(const struct TbFeatureMatrix *matrix,
                              size_t row,
                              double *out,
                              size_t out_len,
                              size_t *written);

// Releases a matrix. Null is ignored.
//
// # Safety
// `matrix` is null or a handle not yet freed.
void tb_features_free(struct TbFeatureMatrix *matrix);

// Trains a classifier on all rows. `spec_json` is either a classifier spec
// (`{"kind":"svm",...}`) or a pipeline (`{"standardize":true,"classifier":{...}}`).
//
// # Safety
// `matrix` comes from this library; `spec_json` is a string; `out` is writable.
enum TbStatus tb_model_train(const struct TbFeatureMatrix *matrix,
                             const char *spec_json,
                             struct TbModel **out);

// Predicts the class index of one feature vector.
//
// # Safety
// `model` comes from this library; `x` holds `len` doubles; `class_out` is writable.
enum TbStatus tb_model_predict(const struct TbModel *model,
                               const double *x,
                               size_t len,
                               size_t *class_out);

// Number of classes the model was trained on; 0 for a null handle.
//
// # Safety
// `model` is null or comes from this library.
size_t tb_model_class_count(const struct TbModel *model);

// Name of class `class`, owned by the model; null when out of range.
//
// # Safety
// `model` is null or comes from this library.
const char *tb_model_class_name(const struct TbModel *model, size_t class_);

// Releases a model. Null is ignored.
//
// # Safety
// `model` is null or a handle not yet freed.
void tb_model_free(struct TbModel *model);

// k-fold cross-validation; writes the mean and sample standard deviation of
// the fold accuracies, in percent.
//
// # Safety
// `matrix` comes from this library; `spec_json` is a string; outputs are writable.
enum TbStatus tb_cross_validate(const struct TbFeatureMatrix *matrix,
                                const char *spec_json,
                                size_t k,
                                uint64_t seed,
                                bool stratified,
                                double *mean_out,
                                double *std_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TEXTUREBENCH_H */
