#ifndef MATTEKIT_H
#define MATTEKIT_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from src/lib.rs. Do not edit by hand. */

#include <stddef.h>
#include <stdint.h>

// Result codes. `MK_OK` is zero; every other value is an error.
typedef enum MkStatus {
  MK_OK = 0,
  MK_NULL_POINTER = 1,
  MK_INVALID_UTF8 = 2,
  MK_INVALID_ARGUMENT = 3,
  MK_OUT_OF_RANGE_VALUE = 4,
  MK_SHAPE_MISMATCH = 5,
  MK_NON_BINARY_VALUE = 6,
  MK_ZERO_DIMENSION = 7,
  MK_UNSUPPORTED_CHANNELS = 8,
  MK_EMPTY_MASK = 9,
  MK_EMPTY_BACKGROUND = 10,
  MK_IMAGE_TOO_SMALL = 11,
  MK_CHANNEL_MISMATCH = 12,
  MK_IMAGE_DECODE = 13,
  MK_IO = 14,
  MK_PANIC = 15,
} MkStatus;

// Planar image with 1 or 3 channels.
typedef struct MkImage MkImage;

// Boolean pixel mask.
typedef struct MkMask MkMask;

// Single-channel alpha matte.
typedef struct MkMatte MkMatte;

// The four matting metrics, with the default scales.
typedef struct MkMetrics {
  double sad;
  double mse;
  double grad;
  double conn;
  // Non-zero when no pixel is fully opaque in both mattes (Conn is then 0).
  int32_t no_opaque_region;
} MkMetrics;

// Refinement loss and its three components.
typedef struct MkRefineLoss {
  double l1;
  double composition;
  double laplacian;
  double total;
  // Non-zero when the unknown mask was empty (all terms are then 0).
  int32_t empty_unknown;
} MkRefineLoss;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Length in bytes (without the terminator) of the last error message on
// this thread, or 0 if there is none.
size_t mk_last_error_length(void);

// Copies the last error message into `buf` (NUL-terminated, truncated to
// `len - 1` bytes). Returns the full message length.
//
// # Safety
// `buf` must be null or valid for `len` writable bytes.
size_t mk_last_error_message(char *buf, size_t len);

// Creates a matte from `height * width` row-major values in `[0, 1]`.
//
// # Safety
// `values` must be valid for `height * width` reads; `out` must be writable.
enum MkStatus mk_matte_new(size_t height, size_t width, const float *values, struct MkMatte **out);

// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum MkStatus mk_matte_load(const char *path, struct MkMatte **out);

// Writes a single-channel PNG at 8 or 16 bits.
//
// # Safety
// `matte` must be a live handle; `path` a NUL-terminated string.
enum MkStatus mk_matte_save(const struct MkMatte *matte, const char *path, uint32_t bits);

// # Safety
// `matte` must be a live handle; `height` and `width` must be writable.
enum MkStatus mk_matte_dims(const struct MkMatte *matte, size_t *height, size_t *width);

// Copies the values out; `len` must equal `height * width`.
//
// # Safety
// `out` must be valid for `len` writes.
enum MkStatus mk_matte_values(const struct MkMatte *matte, float *out, size_t len);

// # Safety
// `matte` must be null or a handle not yet freed.
void mk_matte_free(struct MkMatte *matte);

// Creates an image from planar data of `channels * height * width` values.
//
// # Safety
// `data` must be valid for that many reads; `out` must be writable.
enum MkStatus mk_image_new(size_t height,
                           size_t width,
                           size_t channels,
                           const float *data,
                           struct MkImage **out);

// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum MkStatus mk_image_load(const char *path, struct MkImage **out);

// # Safety
// `image` must be a live handle; `path` a NUL-terminated string.
enum MkStatus mk_image_save(const struct MkImage *image, const char *path, uint32_t bits);

// # Safety
// `image` must be a live handle; the outputs must be writable.
enum MkStatus mk_image_dims(const struct MkImage *image,
                            size_t *height,
                            size_t *width,
                            size_t *channels);

// Copies the planar data out; `len` must equal `channels * height * width`.
//
// # Safety
// `out` must be valid for `len` writes.
enum MkStatus mk_image_data(const struct MkImage *image, float *out, size_t len);

// # Safety
// `image` must be null or a handle not yet freed.
void mk_image_free(struct MkImage *image);

// Creates a mask from `height * width` bytes; non-zero means set.
//
// # Safety
// `values` must be valid for `height * width` reads; `out` must be writable.
enum MkStatus mk_mask_new(size_t height, size_t width, const uint8_t *values, struct MkMask **out);

// # Safety
// `mask` must be a live handle; `height`, `width` and `count` must be writable.
enum MkStatus mk_mask_dims(const struct MkMask *mask, size_t *height, size_t *width, size_t *count);

// Copies the mask out as 0/1 bytes; `len` must equal `height * width`.
//
// # Safety
// `out` must be valid for `len` writes.
enum MkStatus mk_mask_values(const struct MkMask *mask, uint8_t *out, size_t len);

// # Safety
// `mask` must be null or a handle not yet freed.
void mk_mask_free(struct MkMask *mask);

// `alpha * fg + (1 - alpha) * bg`.
//
// # Safety
// All handles must be live; `out` must be writable.
enum MkStatus mk_composite(const struct MkImage *fg,
                           const struct MkImage *bg,
                           const struct MkMatte *alpha,
                           struct MkImage **out);

// Pixels with `alpha > 0`.
//
// # Safety
// `alpha` must be live; `out` must be writable.
enum MkStatus mk_binarize_alpha(const struct MkMatte *alpha, struct MkMask **out);

// Three-level trimap (0, 0.5, 1) as a one-channel image.
//
// # Safety
// `alpha` must be live; `out` must be writable.
enum MkStatus mk_trimap(const struct MkMatte *alpha, size_t radius, struct MkImage **out);

// Pixels with `lo < alpha < hi`; pass `(0, 1)` for the strict band.
//
// # Safety
// `alpha` must be live; `out` must be writable.
enum MkStatus mk_f_quant(const struct MkMatte *alpha, double lo, double hi, struct MkMask **out);

// High-resolution values inside the band, upsampled low-resolution values
// elsewhere. With `resize == 0` the two mattes must have equal size.
//
// # Safety
// Handles must be live; `out` must be writable.
enum MkStatus mk_fuse(const struct MkMatte *high,
                      const struct MkMatte *low,
                      double lo,
                      double hi,
                      int32_t resize,
                      struct MkMatte **out);

// Re-renders the masked foreground with the background statistics.
//
// # Safety
// Handles must be live; `out` must be writable.
enum MkStatus mk_harmonize(const struct MkImage *image,
                           const struct MkMask *fg_mask,
                           double epsilon,
                           int32_t literal_eq10,
                           struct MkImage **out);

// SAD, MSE, Grad and Conn over `region`, or the whole image if it is null.
//
// # Safety
// `pred` and `gt` must be live; `region` null or live; `out` writable.
enum MkStatus mk_metrics(const struct MkMatte *pred,
                         const struct MkMatte *gt,
                         const struct MkMask *region,
                         struct MkMetrics *out);

// Mean binary cross-entropy of `pred` against `target`.
//
// # Safety
// Handles must be live; `out` writable.
enum MkStatus mk_bce(const struct MkMatte *pred, const struct MkMask *target, double *out);

// `dom + 0.8 aux1 + 0.6 aux2 + 0.4 aux3`.
double mk_coarse_loss(double dom, double aux1, double aux2, double aux3);

// L1 + composition + Laplacian loss restricted to the unknown mask `g`.
//
// # Safety
// Handles must be live; `out` writable.
enum MkStatus mk_refine_loss(const struct MkMatte *pred,
                             const struct MkMatte *gt,
                             const struct MkImage *fg,
                             const struct MkImage *bg,
                             const struct MkMask *g,
                             struct MkRefineLoss *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MATTEKIT_H */
