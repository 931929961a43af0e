#ifndef VIGIL_H
#define VIGIL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VigilStatus {
  VIGIL_STATUS_OK = 0,
  VIGIL_STATUS_IO = 1,
  VIGIL_STATUS_INVALID_INPUT = 2,
  VIGIL_STATUS_BACKEND = 3,
  VIGIL_STATUS_TILE_TOO_SMALL = 4,
  VIGIL_STATUS_NULL_POINTER = 5,
  VIGIL_STATUS_PANIC = 6,
} VigilStatus;

/**
 * Canonical label indices.
 */
typedef enum VigilLabel {
  VIGIL_LABEL_NORMAL = 0,
  VIGIL_LABEL_SMOKING = 1,
  VIGIL_LABEL_CALLING = 2,
  VIGIL_LABEL_SMOKING_CALLING = 3,
} VigilLabel;

/**
 * Opaque classifier handle.
 */
typedef struct VigilClassifier VigilClassifier;

/**
 * Opaque temporal smoothing state for one stream.
 */
typedef struct VigilTemporal VigilTemporal;

typedef struct VigilResult {
  /**
   * A `VigilLabel` value.
   */
  uint32_t label;
  double confidence;
  /**
   * Probabilities in canonical label order.
   */
  double probs[4];
} VigilResult;

typedef struct VigilDarkReport {
  uint64_t dark_pixel_count;
  uint64_t total_pixels;
  double ratio;
  bool is_dark;
} VigilDarkReport;

typedef struct VigilSmoothed {
  uint64_t frame_index;
  struct VigilResult raw;
  uint32_t mode_label;
  double mode_mean;
} VigilSmoothed;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds a classifier from a backend spec: `constant:P0,P1,P2,P3`,
 * `scripted:FILE` or `model:FILE.onnx`.
 *
 * # Safety
 * `spec` must be a NUL-terminated string; `out` must be writable.
 */
enum VigilStatus vigil_classifier_new(const char *spec, struct VigilClassifier **out);

/**
 * # Safety
 * `classifier` must come from `vigil_classifier_new` and not be used
 * afterwards. Null is ignored.
 */
void vigil_classifier_free(struct VigilClassifier *classifier);

/**
 * Backend calls made through this handle so far; 0 for null.
 *
 * # Safety
 * `classifier` must be null or a live handle.
 */
uint64_t vigil_classifier_invocations(const struct VigilClassifier *classifier);

/**
 * # Safety
 * `rgb` must hold `width * height * 3` bytes; `out` must be writable.
 */
enum VigilStatus vigil_classify_rgb(const struct VigilClassifier *classifier,
                                    const uint8_t *rgb,
                                    uint32_t width,
                                    uint32_t height,
                                    struct VigilResult *out);

/**
 * Classifies the whole image and each tile of a `rows x cols` grid.
 * `tiles` receives `rows * cols` results row-major and `mask[i]` is 1 when
 * tile `i` agrees with the whole-image label.
 *
 * # Safety
 * `tiles` and `mask` must each hold at least `capacity` elements.
 */
enum VigilStatus vigil_localize_rgb(const struct VigilClassifier *classifier,
                                    const uint8_t *rgb,
                                    uint32_t width,
                                    uint32_t height,
                                    uint32_t rows,
                                    uint32_t cols,
                                    struct VigilResult *whole,
                                    struct VigilResult *tiles,
                                    uint8_t *mask,
                                    size_t capacity);

/**
 * # Safety
 * `rgb` must hold `width * height * 3` bytes; `out` must be writable.
 */
enum VigilStatus vigil_dark_report_rgb(const uint8_t *rgb,
                                       uint32_t width,
                                       uint32_t height,
                                       uint8_t pixel_threshold,
                                       double ratio_threshold,
                                       struct VigilDarkReport *out);

/**
 * Applies the gamma curve to every channel. `out_rgb` may alias `rgb`.
 *
 * # Safety
 * Both buffers must hold `width * height * 3` bytes.
 */
enum VigilStatus vigil_enhance_gamma_rgb(const uint8_t *rgb,
                                         uint32_t width,
                                         uint32_t height,
                                         double gamma,
                                         uint8_t *out_rgb);

/**
 * # Safety
 * `out` must be writable.
 */
enum VigilStatus vigil_temporal_new(size_t window, struct VigilTemporal **out);

/**
 * Feeds one raw result; only `raw->probs` is read, the label is recomputed.
 *
 * # Safety
 * `state` must be a live handle, `raw` readable and `out` writable.
 */
enum VigilStatus vigil_temporal_push(struct VigilTemporal *state,
                                     const struct VigilResult *raw,
                                     struct VigilSmoothed *out);

/**
 * # Safety
 * `state` must come from `vigil_temporal_new` and not be used afterwards.
 * Null is ignored.
 */
void vigil_temporal_free(struct VigilTemporal *state);

/**
 * # Safety
 * `out` must be writable.
 */
enum VigilStatus vigil_cosine_decay_lr(double initial_lr,
                                       uint64_t decay_steps,
                                       double alpha,
                                       uint64_t step,
                                       double *out);

/**
 * Static name of a label index, or null when out of range.
 */
const char *vigil_label_name(uint32_t label);

/**
 * Message of the last failure on this thread, or null. Valid until the next
 * failing call on the same thread.
 */
const char *vigil_last_error(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VIGIL_H */
