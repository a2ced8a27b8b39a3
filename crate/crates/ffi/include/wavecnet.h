#ifndef WAVECNET_H
#define WAVECNET_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes of every fallible call.
 */
typedef enum WcStatus {
  WcStatus_Ok = 0,
  WcStatus_NullPointer = 1,
  WcStatus_InvalidArgument = 2,
  WcStatus_UnknownWavelet = 3,
  WcStatus_InvalidExtent = 4,
  WcStatus_ShapeMismatch = 5,
  WcStatus_NonFiniteInput = 6,
  WcStatus_Io = 7,
  WcStatus_Format = 8,
  WcStatus_Panic = 9,
} WcStatus;

typedef enum WcBoundary {
  WcBoundary_Periodic = 0,
  WcBoundary_Truncate = 1,
} WcBoundary;

/**
 * A trained toy classifier.
 */
typedef struct WcModel WcModel;

/**
 * A filter bank.
 */
typedef struct WcWavelet WcWavelet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next call into this library on the same thread.
 */
const char *wc_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *wc_version(void);

/**
 * Looks up a built-in wavelet (`haar`, `db1`..`db6`, `ch2.2`..`ch5.5`).
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum WcStatus wc_wavelet_new(const char *name, struct WcWavelet **out);

/**
 * # Safety
 * `w` must come from [`wc_wavelet_new`] and not be used afterwards; null is
 * ignored.
 */
void wc_wavelet_free(struct WcWavelet *w);

/**
 * Filter length of the bank, or 0 for a null handle.
 *
 * # Safety
 * `w` must be null or a live handle.
 */
uintptr_t wc_wavelet_filter_len(const struct WcWavelet *w);

/**
 * One-level 1D DWT of `x[n]` into `lo[n/2]` and `hi[n/2]`.
 *
 * # Safety
 * Buffers must hold the stated number of doubles.
 */
enum WcStatus wc_dwt1d(const struct WcWavelet *w,
                       const double *x,
                       uintptr_t n,
                       enum WcBoundary boundary,
                       double *lo,
                       double *hi);

/**
 * Inverse of [`wc_dwt1d`]: `lo[half]`, `hi[half]` into `out[n]`.
 *
 * # Safety
 * Buffers must hold the stated number of doubles.
 */
enum WcStatus wc_idwt1d(const struct WcWavelet *w,
                        const double *lo,
                        const double *hi,
                        uintptr_t half,
                        enum WcBoundary boundary,
                        double *out,
                        uintptr_t n);

/**
 * One-level 2D DWT of a row-major `rows x cols` image into four
 * `(rows/2) x (cols/2)` bands.
 *
 * # Safety
 * Buffers must hold the stated number of doubles.
 */
enum WcStatus wc_dwt2d(const struct WcWavelet *w,
                       const double *x,
                       uintptr_t rows,
                       uintptr_t cols,
                       enum WcBoundary boundary,
                       double *ll,
                       double *lh,
                       double *hl,
                       double *hh);

/**
 * Inverse of [`wc_dwt2d`] into a `rows x cols` image.
 *
 * # Safety
 * Buffers must hold the stated number of doubles.
 */
enum WcStatus wc_idwt2d(const struct WcWavelet *w,
                        const double *ll,
                        const double *lh,
                        const double *hl,
                        const double *hh,
                        uintptr_t rows,
                        uintptr_t cols,
                        enum WcBoundary boundary,
                        double *out);

/**
 * Low-frequency band only, for a `[batch, channels, rows, cols]` tensor;
 * `out` holds `batch * channels * (rows/2) * (cols/2)` doubles.
 *
 * # Safety
 * Buffers must hold the stated number of doubles.
 */
enum WcStatus wc_dwt_ll(const struct WcWavelet *w,
                        const double *x,
                        uintptr_t batch,
                        uintptr_t channels,
                        uintptr_t rows,
                        uintptr_t cols,
                        enum WcBoundary boundary,
                        double *out);

/**
 * Multiply-add counts of one `m x n x c` 2D DWT and IDWT.
 *
 * # Safety
 * `dwt` and `idwt` must be valid pointers.
 */
enum WcStatus wc_madd(uint64_t m, uint64_t n, uint64_t c, uint64_t *dwt, uint64_t *idwt);

/**
 * Loads a model saved by `wavecnet train` (weights plus `<path>.json`).
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum WcStatus wc_model_load(const char *path, struct WcModel **out);

/**
 * # Safety
 * `m` must come from [`wc_model_load`] and not be used afterwards; null is
 * ignored.
 */
void wc_model_free(struct WcModel *m);

/**
 * Writes the model's expected input `channels`, `rows`, `cols` and its
 * number of `classes`.
 *
 * # Safety
 * All pointers must be valid.
 */
enum WcStatus wc_model_shape(const struct WcModel *m,
                             uintptr_t *channels,
                             uintptr_t *rows,
                             uintptr_t *cols,
                             uintptr_t *classes);

/**
 * Class probabilities for `batch` images laid out `[batch, C, H, W]`;
 * `probs` holds `batch * classes` doubles.
 *
 * # Safety
 * Buffers must hold the stated number of doubles.
 */
enum WcStatus wc_model_predict(const struct WcModel *m,
                               const double *x,
                               uintptr_t batch,
                               double *probs);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WAVECNET_H */
