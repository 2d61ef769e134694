#ifndef TILEGRAFT_H
#define TILEGRAFT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum TgStatus {
  TG_STATUS_OK = 0,
  TG_STATUS_NULL_POINTER = 1,
  TG_STATUS_INVALID_ARGUMENT = 2,
  TG_STATUS_IO = 3,
  TG_STATUS_FORMAT = 4,
  TG_STATUS_SHAPE_MISMATCH = 5,
  TG_STATUS_WRONG_SPACE = 6,
  TG_STATUS_DEGENERATE = 7,
  TG_STATUS_OPERATOR = 8,
  TG_STATUS_PANIC = 99,
} TgStatus;

typedef enum TgKernel {
  TG_KERNEL_LOGISTIC = 0,
  TG_KERNEL_TRIANGULAR = 1,
} TgKernel;

typedef enum TgMask {
  TG_MASK_HANN = 0,
  TG_MASK_BOX = 1,
} TgMask;

/**
 * Opaque image handle. Planar `f64` samples, 1 (gray) or 3 (sRGB) channels.
 */
typedef struct TgImage TgImage;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL after a
 * successful one. Valid until the next `tg_*` call on the same thread.
 */
const char *tg_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *tg_version(void);

/**
 * Build an image from `width * height * channels` planar samples.
 *
 * # Safety
 * `data` must point to that many readable doubles and `out` must be writable.
 */
enum TgStatus tg_image_new(size_t width,
                           size_t height,
                           size_t channels,
                           const double *data,
                           struct TgImage **out);

/**
 * Decode a PNG or PFM file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` must be writable.
 */
enum TgStatus tg_image_load(const char *path, struct TgImage **out);

/**
 * Encode an image. `bit_depth` is 8 or 16 for PNG, 32 for PFM.
 *
 * # Safety
 * `img` must be a live handle and `path` a NUL-terminated string.
 */
enum TgStatus tg_image_save(const struct TgImage *img, const char *path, uint32_t bit_depth);

/**
 * Release a handle. NULL is ignored.
 *
 * # Safety
 * `img` must be NULL or a handle not yet freed.
 */
void tg_image_free(struct TgImage *img);

/**
 * # Safety
 * `img` must be NULL or a live handle. Returns 0 for NULL.
 */
size_t tg_image_width(const struct TgImage *img);

/**
 * # Safety
 * `img` must be NULL or a live handle. Returns 0 for NULL.
 */
size_t tg_image_height(const struct TgImage *img);

/**
 * # Safety
 * `img` must be NULL or a live handle. Returns 0 for NULL.
 */
size_t tg_image_channels(const struct TgImage *img);

/**
 * Copy the planar samples into `out`, which holds `len` doubles.
 * `len` must equal width * height * channels.
 *
 * # Safety
 * `img` must be a live handle and `out` must have room for `len` doubles.
 */
enum TgStatus tg_image_copy_data(const struct TgImage *img, double *out, size_t len);

/**
 * Tile a gray image through a patch operator and blend the RGB result.
 * `mask` is a [`TgMask`] value.
 *
 * `op` takes the same forms as the command line: `identity`,
 * `lut:<file>`, `toyconv:<file>` or `subprocess:<command>`.
 *
 * # Safety
 * `gray` must be a live handle, `op` a NUL-terminated string and `out`
 * writable.
 */
enum TgStatus tg_tile_translate(const struct TgImage *gray,
                                const char *op,
                                size_t patch,
                                size_t stride,
                                double epsilon,
                                uint32_t mask,
                                struct TgImage **out);

/**
 * Soft-histogram CDF loss between two images of equal shape.
 * `kernel` is a [`TgKernel`] value.
 *
 * # Safety
 * Both handles must be live and `out` writable.
 */
enum TgStatus tg_cdf_loss(const struct TgImage *pred,
                          const struct TgImage *target,
                          size_t bins,
                          double tau,
                          uint32_t kernel,
                          double *out);

/**
 * Gradient of [`tg_cdf_loss`] with respect to `pred`, as a new image.
 *
 * # Safety
 * Both handles must be live and `out` writable.
 */
enum TgStatus tg_cdf_loss_grad(const struct TgImage *pred,
                               const struct TgImage *target,
                               size_t bins,
                               double tau,
                               uint32_t kernel,
                               struct TgImage **out);

/**
 * PSNR in dB, capped at 99.
 *
 * # Safety
 * Both handles must be live and `out` writable.
 */
enum TgStatus tg_psnr(const struct TgImage *a, const struct TgImage *b, double max_i, double *out);

/**
 * Mean SSIM over channels.
 *
 * # Safety
 * Both handles must be live and `out` writable.
 */
enum TgStatus tg_ssim(const struct TgImage *a, const struct TgImage *b, double *out);

/**
 * Mean per-pixel angular error in degrees. Both images must be RGB.
 *
 * # Safety
 * Both handles must be live and `out` writable.
 */
enum TgStatus tg_angular_error(const struct TgImage *pred, const struct TgImage *gt, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TILEGRAFT_H */
