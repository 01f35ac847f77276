#ifndef CYLMODES_H
#define CYLMODES_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CylStatus {
  CYL_STATUS_OK = 0,
  CYL_STATUS_NULL_POINTER = 1,
  CYL_STATUS_INVALID_ARGUMENT = 2,
  CYL_STATUS_CONFIG = 3,
  CYL_STATUS_NUMERICAL = 4,
  CYL_STATUS_IO = 5,
  CYL_STATUS_BUFFER_TOO_SMALL = 6,
  CYL_STATUS_PANIC = 7,
} CylStatus;

/**
 * Cosine or sine family of an azimuthal mode.
 */
typedef enum CylFamily {
  CYL_FAMILY_COS = 0,
  CYL_FAMILY_SIN = 1,
} CylFamily;

/**
 * Velocity component in cylindrical coordinates.
 */
typedef enum CylComponent {
  CYL_COMPONENT_R = 0,
  CYL_COMPONENT_THETA = 1,
  CYL_COMPONENT_Z = 2,
} CylComponent;

/**
 * A validated run configuration.
 */
typedef struct CylConfig CylConfig;

/**
 * A trajectory in progress together with its diagnostics.
 */
typedef struct CylRun CylRun;

/**
 * A velocity field stored as azimuthal mode coefficients.
 */
typedef struct CylState CylState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *cyl_version(void);

/**
 * Copies the calling thread's last error message into `buf`. Returns
 * `BufferTooSmall` (with `*needed` set) when it does not fit.
 *
 * # Safety
 * `buf` must point to `len` writable bytes; `needed` may be null.
 */
enum CylStatus cyl_last_error(char *buf, size_t len, size_t *needed);

/**
 * Parses and validates a TOML run configuration.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum CylStatus cyl_config_from_toml(const char *toml, struct CylConfig **out);

/**
 * Reads and validates a TOML run configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CylStatus cyl_config_from_file(const char *path, struct CylConfig **out);

/**
 * Applies one `section.key=value` override and revalidates. On failure
 * the configuration is left unchanged.
 *
 * # Safety
 * `config` must come from this library; `assignment` must be NUL-terminated.
 */
enum CylStatus cyl_config_set(struct CylConfig *config, const char *assignment);

/**
 * # Safety
 * `config` must come from this library (or be null) and not be used afterwards.
 */
void cyl_config_free(struct CylConfig *config);

/**
 * Builds the initial state a configuration describes.
 *
 * # Safety
 * `config` must come from this library; `out` must be writable.
 */
enum CylStatus cyl_state_from_config(const struct CylConfig *config, struct CylState **out);

/**
 * # Safety
 * `state` must come from this library (or be null) and not be used afterwards.
 */
void cyl_state_free(struct CylState *state);

/**
 * Grid size, base frequency and truncation of a state. Any output may be null.
 *
 * # Safety
 * `state` must come from this library.
 */
enum CylStatus cyl_state_dims(const struct CylState *state,
                              size_t *nr,
                              size_t *nz,
                              uint32_t *n_base,
                              size_t *k_max);

/**
 * # Safety
 * `state` must come from this library; `t` must be writable.
 */
enum CylStatus cyl_state_time(const struct CylState *state, double *t);

/**
 * Copies one coefficient array (row-major, `nz` rows of `nr`) into `buf`.
 *
 * # Safety
 * `state` must come from this library; `buf` must hold `len` doubles.
 */
enum CylStatus cyl_state_component(const struct CylState *state,
                                   size_t k,
                                   enum CylFamily family,
                                   enum CylComponent component,
                                   double *buf,
                                   size_t len);

/**
 * `‖u‖²` in `L²` of the full three-dimensional field.
 *
 * # Safety
 * `state` must come from this library; `out` must be writable.
 */
enum CylStatus cyl_state_l2_norm_squared(const struct CylState *state, double *out);

/**
 * Relative gap between the mode-sum and quadrature `L²` norms of the state
 * and of its `(r, z)` gradient, whichever is larger.
 *
 * # Safety
 * `state` must come from this library; `out` must be writable.
 */
enum CylStatus cyl_state_plancherel_gap(const struct CylState *state, double *out);

/**
 * Starts a run from `state` with the time, solver and diagnostic settings
 * of `config`. The initial state is projected first.
 *
 * # Safety
 * `config` and `state` must come from this library; `out` must be writable.
 */
enum CylStatus cyl_run_start(const struct CylConfig *config,
                             const struct CylState *state,
                             struct CylRun **out);

/**
 * Takes up to `max_steps` steps; `*done` (if non-null) reports whether
 * the schedule is complete.
 *
 * # Safety
 * `run` must come from this library; `done` may be null.
 */
enum CylStatus cyl_run_advance(struct CylRun *run, uint64_t max_steps, bool *done);

/**
 * Steps taken so far and the scheduled total. Either output may be null.
 *
 * # Safety
 * `run` must come from this library.
 */
enum CylStatus cyl_run_progress(const struct CylRun *run, uint64_t *steps, uint64_t *total);

/**
 * A copy of the current state, owned by the caller.
 *
 * # Safety
 * `run` must come from this library; `out` must be writable.
 */
enum CylStatus cyl_run_state(const struct CylRun *run, struct CylState **out);

/**
 * The run summary so far as JSON. Returns `BufferTooSmall` with `*needed`
 * set when `buf` is too short; call with a null `buf` to size it.
 *
 * # Safety
 * `run` must come from this library; `buf` must hold `len` bytes.
 */
enum CylStatus cyl_run_summary_json(const struct CylRun *run,
                                    char *buf,
                                    size_t len,
                                    size_t *needed);

/**
 * # Safety
 * `run` must come from this library (or be null) and not be used afterwards.
 */
void cyl_run_free(struct CylRun *run);

/**
 * The kernel `F_m(s)` for `s > 0`.
 *
 * # Safety
 * `out` must be writable.
 */
enum CylStatus cyl_kernel_fm(uint32_t m, double s, double *out);

/**
 * The companion kernel `G_m(s)` for `s > 0`.
 *
 * # Safety
 * `out` must be writable.
 */
enum CylStatus cyl_kernel_gm(uint32_t m, double s, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CYLMODES_H */
