#ifndef CELLPK_H
#define CELLPK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum CellpkStatus {
  CELLPK_STATUS_OK = 0,
  CELLPK_STATUS_NULL_POINTER = 1,
  CELLPK_STATUS_INVALID_ARGUMENT = 2,
  CELLPK_STATUS_COMPUTE_ERROR = 3,
  CELLPK_STATUS_IO_ERROR = 4,
} CellpkStatus;

/**
 * t-test variants.
 */
typedef enum CellpkTTestVariant {
  CELLPK_T_TEST_VARIANT_WELCH = 0,
  CELLPK_T_TEST_VARIANT_STUDENT = 1,
} CellpkTTestVariant;

/**
 * Opaque handle around a loaded scoring model.
 */
typedef struct CellpkModel CellpkModel;

/**
 * Pair counts and PK value of a prediction against one reference rater.
 */
typedef struct CellpkPkReport {
  uint64_t n_pairs_considered;
  uint64_t concordant;
  uint64_t discordant;
  uint64_t ties_pred_only;
  double pk;
} CellpkPkReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message for this thread, or null. Valid until the next
 * cellpk call on the same thread.
 */
const char *cellpk_last_error(void);

/**
 * Library version as a static string.
 */
const char *cellpk_version(void);

/**
 * Prediction probability PK of `prediction` against `reference`
 * (both length `n`).
 *
 * # Safety
 * `reference` and `prediction` must point to `n` readable doubles and
 * `out` to a writable report struct.
 */
enum CellpkStatus cellpk_pk(const double *reference,
                            const double *prediction,
                            uintptr_t n,
                            struct CellpkPkReport *out);

/**
 * Kendall tau-b of two equal-length samples.
 *
 * # Safety
 * `x` and `y` must point to `n` readable doubles and `out_tau` to a
 * writable double.
 */
enum CellpkStatus cellpk_kendall_tau_b(const double *x,
                                       const double *y,
                                       uintptr_t n,
                                       double *out_tau);

/**
 * Unpaired two-sample t-test; writes the statistic, the degrees of
 * freedom, and the two-tailed p-value.
 *
 * # Safety
 * `a`/`b` must point to `na`/`nb` readable doubles; the three out
 * pointers must be writable.
 */
enum CellpkStatus cellpk_t_test(const double *a,
                                uintptr_t na,
                                const double *b,
                                uintptr_t nb,
                                enum CellpkTTestVariant variant,
                                double *out_t,
                                double *out_df,
                                double *out_p);

/**
 * Lossless rotation of an RGB patch by an integer angle
 * (counterclockwise).
 *
 * Writes `width * height * 3` bytes to `out_rgb`; when `out_mask` is
 * non-null it receives `width * height` bytes (1 where full-resolution
 * content was kept, 0 where the resized fit filled in).
 *
 * # Safety
 * `rgb` must point to `width * height * 3` readable bytes, `out_rgb` to
 * as many writable bytes, and `out_mask` (when non-null) to
 * `width * height` writable bytes.
 */
enum CellpkStatus cellpk_rotate_lossless(const uint8_t *rgb,
                                         uint32_t width,
                                         uint32_t height,
                                         int32_t theta_degrees,
                                         uint8_t *out_rgb,
                                         uint8_t *out_mask);

/**
 * Load a CPKW1 weight file into a scoring model.
 *
 * The architecture and input size are inferred from the tensor names;
 * pass `size_hint > 0` to override the input side (required for weight
 * files whose size cannot be inferred).
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out_model` a writable
 * pointer slot. A returned model must be released with
 * [`cellpk_model_free`].
 */
enum CellpkStatus cellpk_model_load(const char *path,
                                    uint32_t size_hint,
                                    struct CellpkModel **out_model);

/**
 * Input side (pixels) the model expects.
 *
 * # Safety
 * `model` must come from [`cellpk_model_load`] and not be freed.
 */
uint32_t cellpk_model_input_size(const struct CellpkModel *model);

/**
 * Score one RGB patch; the image is resampled to the model's input side
 * if needed. The score lands in [0, 1].
 *
 * # Safety
 * `model` must come from [`cellpk_model_load`]; `rgb` must point to
 * `width * height * 3` readable bytes; `out_score` must be writable.
 */
enum CellpkStatus cellpk_model_predict(const struct CellpkModel *model,
                                       const uint8_t *rgb,
                                       uint32_t width,
                                       uint32_t height,
                                       double *out_score);

/**
 * Release a model handle. Null is a no-op.
 *
 * # Safety
 * `model` must come from [`cellpk_model_load`] and not be freed twice.
 */
void cellpk_model_free(struct CellpkModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CELLPK_H */
