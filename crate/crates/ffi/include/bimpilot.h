#ifndef BIMPILOT_H
#define BIMPILOT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible entry point.
typedef enum BpStatus {
  BP_STATUS_OK = 0,
  BP_STATUS_NULL_ARGUMENT = 1,
  BP_STATUS_INVALID_UTF8 = 2,
  BP_STATUS_PARSE_ERROR = 3,
  BP_STATUS_INVALID_ARGUMENT = 4,
  BP_STATUS_BUFFER_TOO_SMALL = 5,
  BP_STATUS_TASK_ERROR = 6,
  BP_STATUS_PANIC = 7,
} BpStatus;

// Opaque environment session.
typedef struct BpEnv BpEnv;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failure on this thread, or null. The pointer stays
// valid until the next call into this library on the same thread.
const char *bp_last_error(void);

// Open a session on the default canvas with faults at `fault_rate`.
//
// # Safety
// `out` must be a valid pointer; the handle must be released with [`bp_env_free`].
enum BpStatus bp_env_new(double fault_rate, uint64_t seed, struct BpEnv **out);

// Release a session. Null is ignored.
//
// # Safety
// `env` must come from [`bp_env_new`] and not be used afterwards.
void bp_env_free(struct BpEnv *env);

// Parse and run an action script; `flag_count` (optional) receives the
// number of anomaly flags raised.
//
// # Safety
// `env` must be a live handle and `script` a NUL-terminated string.
enum BpStatus bp_env_execute(struct BpEnv *env, const char *script, uint32_t *flag_count);

// Width and height of rendered frames in pixels.
//
// # Safety
// `env` must be a live handle; `width` and `height` valid pointers.
enum BpStatus bp_env_frame_size(const struct BpEnv *env, uint32_t *width, uint32_t *height);

// Render the current frame as packed RGB8, row-major.
//
// # Safety
// `env` must be a live handle; `buf` must hold `len` bytes; `written` may be null.
enum BpStatus bp_env_render_rgb(const struct BpEnv *env, uint8_t *buf, size_t len, size_t *written);

// Export the building document as canonical JSON bytes (not NUL-terminated).
//
// # Safety
// `env` must be a live handle; `buf` must hold `len` bytes; `written` may be null.
enum BpStatus bp_env_export_document(const struct BpEnv *env,
                                     uint8_t *buf,
                                     size_t len,
                                     size_t *written);

// Run a benchmark task (JSON) with the scripted backend and return the run
// report as a NUL-terminated JSON string to be freed with [`bp_string_free`].
//
// # Safety
// `task_json` must be NUL-terminated; `report_json` a valid pointer.
enum BpStatus bp_run_task_json(const char *task_json,
                               uint64_t seed,
                               double fault_rate,
                               char **report_json);

// Release a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void bp_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BIMPILOT_H */
