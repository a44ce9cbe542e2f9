#ifndef SPINNET_H
#define SPINNET_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call.
 */
typedef enum SpinnetStatus {
  SPINNET_STATUS_OK = 0,
  SPINNET_STATUS_NULL_POINTER = 1,
  SPINNET_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed network, target or argument list.
   */
  SPINNET_STATUS_INVALID_INPUT = 3,
  /**
   * The request is well formed but cannot be met (phase constraint,
   * missing catalyst, unresolvable spectrum).
   */
  SPINNET_STATUS_INFEASIBLE = 4,
  /**
   * A numerical or size budget was exceeded.
   */
  SPINNET_STATUS_NUMERICAL = 5,
  /**
   * The output buffer is too short; the required length was written.
   */
  SPINNET_STATUS_BUFFER_TOO_SMALL = 6,
  /**
   * A Rust panic was caught at the boundary.
   */
  SPINNET_STATUS_INTERNAL = 7,
} SpinnetStatus;

/**
 * Opaque network handle.
 */
typedef struct SpinnetNetwork SpinnetNetwork;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next call on the same thread.
 */
const char *spinnet_last_error(void);

/**
 * Release a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void spinnet_string_free(char *s);

/**
 * Parse a network document (JSON text).
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum SpinnetStatus spinnet_network_from_json(const char *json, struct SpinnetNetwork **out);

/**
 * Load a bundled fixture by name (`fig1`, `fig2`, `triangle`, ...).
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum SpinnetStatus spinnet_network_fixture(const char *name, struct SpinnetNetwork **out);

/**
 * Destroy a handle. NULL is ignored.
 *
 * # Safety
 * `net` must come from this library and not be freed twice.
 */
void spinnet_network_free(struct SpinnetNetwork *net);

/**
 * Number of spins.
 *
 * # Safety
 * `net` must be a live handle; `out` must be writable.
 */
enum SpinnetStatus spinnet_network_spins(const struct SpinnetNetwork *net, size_t *out);

/**
 * Network serialized back to JSON. Free the result with
 * [`spinnet_string_free`].
 *
 * # Safety
 * `net` must be a live handle; `out` must be writable.
 */
enum SpinnetStatus spinnet_network_to_json(const struct SpinnetNetwork *net, char **out);

/**
 * Optimal single-excitation fidelity for a target given as `len` complex
 * amplitudes split into `re` and `im` (`im` may be NULL). `len` must equal
 * the spin count.
 *
 * # Safety
 * `re` (and `im` when non-NULL) must point at `len` doubles.
 */
enum SpinnetStatus spinnet_max_fidelity(const struct SpinnetNetwork *net,
                                        const double *re,
                                        const double *im,
                                        size_t len,
                                        double *out);

/**
 * Eigenvalues and overlaps with |2> on the accessible subspace. Writes at
 * most `cap` entries to each buffer and the true count to `len`; returns
 * `BufferTooSmall` when `cap` is short.
 *
 * # Safety
 * `eigenvalues` and `overlaps` must hold `cap` doubles; `len` writable.
 */
enum SpinnetStatus spinnet_spectrum(const struct SpinnetNetwork *net,
                                    double *eigenvalues,
                                    double *overlaps,
                                    size_t cap,
                                    size_t *len);

/**
 * Run a CLI command. `args_json` is a JSON array of strings without the
 * program name, e.g. `["bound","--net","fig2","--target","3"]`. The
 * rendered report goes to `report` (free with [`spinnet_string_free`]) and
 * the CLI exit code to `exit_code`. An infeasible plan still yields a
 * report and returns `Infeasible`.
 *
 * # Safety
 * `args_json` must be NUL-terminated; `report` and `exit_code` writable.
 */
enum SpinnetStatus spinnet_command(const char *args_json, char **report, int *exit_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPINNET_H */
