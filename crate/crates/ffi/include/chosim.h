#ifndef CHOSIM_H
#define CHOSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every exported function.
typedef enum ChosimStatus {
  CHOSIM_STATUS_OK = 0,
  // A required pointer argument was null.
  CHOSIM_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  CHOSIM_STATUS_INVALID_UTF8 = 2,
  // The scenario could not be read, parsed, or validated.
  CHOSIM_STATUS_CONFIG = 3,
  // A policy hook blocked an action and the run was aborted.
  CHOSIM_STATUS_BLOCKED = 4,
  // The run failed for another reason.
  CHOSIM_STATUS_RUN = 5,
  // Writing artifacts failed.
  CHOSIM_STATUS_IO = 6,
  // An index was out of range.
  CHOSIM_STATUS_OUT_OF_RANGE = 7,
  // A Rust panic was caught at the boundary.
  CHOSIM_STATUS_PANIC = 8,
} ChosimStatus;

// Opaque handle to a completed run.
typedef struct ChosimRun ChosimRun;

// Headline counts of a completed run.
typedef struct ChosimSummary {
  uint64_t attempts;
  uint64_t successes;
  uint64_t fail_rlf;
  uint64_t fail_rach;
  uint64_t ping_pongs;
  uint64_t directives_applied;
} ChosimSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Runs a scenario with its own seed. `scenario` is a file path or
// `builtin:<name>`. On success `*out` holds a new handle; otherwise it is
// set to null.
//
// # Safety
// `scenario` must be null or a NUL-terminated string; `out` must be null or
// writable.
enum ChosimStatus chosim_run(const char *scenario, struct ChosimRun **out);

// Like [`chosim_run`] with the scenario seed replaced by `seed`.
//
// # Safety
// Same as [`chosim_run`].
enum ChosimStatus chosim_run_seeded(const char *scenario, uint64_t seed, struct ChosimRun **out);

// Copies the run's headline counts into `*out`.
//
// # Safety
// `run` must be a live handle; `out` must be null or writable.
enum ChosimStatus chosim_run_summary(const struct ChosimRun *run, struct ChosimSummary *out);

// Number of entries in the offset trace.
//
// # Safety
// `run` must be a live handle; `out` must be null or writable.
enum ChosimStatus chosim_run_offset_count(const struct ChosimRun *run, uintptr_t *out);

// Offset in dB after the `index`-th applied directive.
//
// # Safety
// `run` must be a live handle; `out` must be null or writable.
enum ChosimStatus chosim_run_offset_at(const struct ChosimRun *run, uintptr_t index, double *out);

// Writes the artifact bundle into directory `dir`, creating it if needed.
//
// # Safety
// `run` must be a live handle; `dir` must be null or a NUL-terminated string.
enum ChosimStatus chosim_run_write(const struct ChosimRun *run, const char *dir);

// Releases a handle. Null is ignored.
//
// # Safety
// `run` must be null or a handle from [`chosim_run`] not yet freed.
void chosim_run_free(struct ChosimRun *run);

// Message for the last failed call on this thread, or null. The pointer
// stays valid until the next call into this library on the same thread.
const char *chosim_last_error(void);

// Library version as a static NUL-terminated string.
const char *chosim_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHOSIM_H */
