#ifndef COORDFREE_H
#define COORDFREE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Bit positions in the mask written by [`cf_classify`].
 */
typedef enum CfClass {
  CF_CLASS_MONOTONE = 0,
  CF_CLASS_ADOM_MONOTONE = 1,
  CF_CLASS_WEAK_ADOM_MONOTONE = 2,
  CF_CLASS_WEAK_ADOM_INSTANCE = 3,
} CfClass;

typedef enum CfStatus {
  CF_STATUS_OK = 0,
  CF_STATUS_NULL_POINTER = 1,
  CF_STATUS_INVALID_UTF8 = 2,
  CF_STATUS_PARSE = 3,
  CF_STATUS_QUERY = 4,
  CF_STATUS_SCENARIO = 5,
  CF_STATUS_SIMULATION = 6,
  CF_STATUS_PANIC = 7,
} CfStatus;

/**
 * Opaque instance handle.
 */
typedef struct CfInstance CfInstance;

/**
 * Opaque query handle.
 */
typedef struct CfQuery CfQuery;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *cf_last_error_message(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not have been freed; null is a no-op.
 */
void cf_string_free(char *s);

/**
 * Looks up a bundled query: `tc`, `asym`, `remark33` or `winmove`.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum CfStatus cf_query_builtin(const char *name, struct CfQuery **out_query);

/**
 * Parses a Datalog program.
 *
 * # Safety
 * `program` must be a NUL-terminated string; `out` must be writable.
 */
enum CfStatus cf_query_parse(const char *program, struct CfQuery **out_query);

/**
 * # Safety
 * `q` must come from this library and not have been freed; null is a no-op.
 */
void cf_query_free(struct CfQuery *q);

/**
 * Parses facts such as `e(a,b). e(b,c).`.
 *
 * # Safety
 * `facts` must be a NUL-terminated string; `out` must be writable.
 */
enum CfStatus cf_instance_parse(const char *facts, struct CfInstance **out_instance);

/**
 * # Safety
 * `i` must come from this library and not have been freed; null is a no-op.
 */
void cf_instance_free(struct CfInstance *i);

/**
 * Number of facts; 0 for null.
 *
 * # Safety
 * `i` must be null or a live handle.
 */
size_t cf_instance_len(const struct CfInstance *i);

/**
 * Canonically sorted fact text, one `fact.` per line.
 *
 * # Safety
 * `i` must be a live handle; `out` must be writable. Free the result with
 * [`cf_string_free`].
 */
enum CfStatus cf_instance_to_string(const struct CfInstance *i, char **out_text);

/**
 * Evaluates `q` on `i`.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum CfStatus cf_eval(const struct CfQuery *q,
                      const struct CfInstance *i,
                      struct CfInstance **out_instance);

/**
 * Runs the bounded monotonicity checks. Bit `CfClass` of `holds_mask` is
 * set when that class holds within the bounds; `report` (optional)
 * receives the textual verdicts.
 *
 * # Safety
 * `q` must be live; `holds_mask` must be writable; `report` may be null.
 */
enum CfStatus cf_classify(const struct CfQuery *q,
                          size_t domain_size,
                          size_t max_facts,
                          size_t extra_fresh,
                          uint32_t *holds_mask,
                          char **report);

/**
 * Runs a scenario document in its configured mode (fair-random or
 * heartbeat-only). File references resolve against `base_dir`, or the
 * working directory when null.
 *
 * # Safety
 * Strings must be NUL-terminated (`base_dir` may be null); outputs must be
 * writable.
 */
enum CfStatus cf_run_scenario(const char *scenario_json,
                              const char *base_dir,
                              struct CfInstance **out_output,
                              bool *out_converged);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COORDFREE_H */
