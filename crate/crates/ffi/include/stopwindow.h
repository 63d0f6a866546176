#ifndef STOPWINDOW_H
#define STOPWINDOW_H

/* Generated by cbindgen from crates/ffi. Do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SwAction {
  SW_ACTION_CONTINUE = 0,
  SW_ACTION_STOP = 1,
  SW_ACTION_EXHAUSTED = 2,
} SwAction;

typedef enum SwMode {
  SW_MODE_SIGN_CHANGE = 0,
  SW_MODE_STRICT = 1,
} SwMode;

typedef enum SwSize {
  SW_SIZE_EXCLUSIVE = 0,
  SW_SIZE_INCLUSIVE = 1,
} SwSize;

typedef enum SwStatus {
  SW_STATUS_OK = 0,
  SW_STATUS_NULL_POINTER = 1,
  SW_STATUS_INVALID_CONFIG = 2,
  SW_STATUS_INVALID_RECORD = 3,
  SW_STATUS_NON_CONSECUTIVE_EPOCH = 4,
  SW_STATUS_FED_AFTER_STOP = 5,
  SW_STATUS_OUT_OF_RANGE = 6,
  SW_STATUS_EMPTY_TRACE = 7,
  SW_STATUS_INTERNAL = 99,
} SwStatus;

/**
 * Opaque detector handle.
 */
typedef struct SwDetector SwDetector;

typedef struct SwConfig {
  uint32_t min_window;
  double max_oscillation;
  uint32_t max_epochs;
  enum SwMode mode;
  double epsilon;
  enum SwSize size;
} SwConfig;

/**
 * Decision record. Fields not meaningful for `action` are zero.
 */
typedef struct SwDecision {
  enum SwAction action;
  uint32_t window_start;
  uint32_t window_end;
  uint32_t stop_epoch;
  uint32_t lag;
  uint32_t best_epoch;
} SwDecision;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Fills `out` with the default configuration (N=4, D=2, 200 epochs,
 * sign-change extrema, exclusive size).
 *
 * # Safety
 * `out` must be null or point to writable memory for one `SwConfig`.
 */
enum SwStatus sw_config_default(struct SwConfig *out);

/**
 * Creates a detector. On success `*out` receives a handle that must be
 * released with `sw_detector_free`.
 *
 * # Safety
 * `config` must point to a valid `SwConfig`; `out` must be writable.
 */
enum SwStatus sw_detector_new(const struct SwConfig *config, struct SwDetector **out);

/**
 * Feeds one epoch. Pass NaN as `val_loss` when no loss is available.
 *
 * # Safety
 * `detector` must be a live handle from `sw_detector_new`; `out` must be
 * writable.
 */
enum SwStatus sw_detector_feed(struct SwDetector *detector,
                               uint32_t epoch,
                               double metric,
                               double val_loss,
                               struct SwDecision *out);

/**
 * Ends the stream before `max_epochs`, yielding an exhausted decision.
 *
 * # Safety
 * Same requirements as `sw_detector_feed`.
 */
enum SwStatus sw_detector_finish(struct SwDetector *detector, struct SwDecision *out);

/**
 * Releases a detector. Null is ignored.
 *
 * # Safety
 * `detector` must be null or a handle not yet freed.
 */
void sw_detector_free(struct SwDetector *detector);

/**
 * `(1 - stop_epoch / max_epochs) * 100`.
 *
 * # Safety
 * `out` must be writable.
 */
enum SwStatus sw_eff_gain(uint32_t stop_epoch, uint32_t max_epochs, double *out);

/**
 * `metric_at_stop / global_max`.
 *
 * # Safety
 * `out` must be writable.
 */
enum SwStatus sw_max_diff(double metric_at_stop, double global_max, double *out);

/**
 * Message for the last failure on the calling thread, or null. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *sw_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sw_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STOPWINDOW_H */
