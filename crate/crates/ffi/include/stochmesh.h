#ifndef STOCHMESH_H
#define STOCHMESH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum StochmeshStatus {
  STOCHMESH_STATUS_OK = 0,
  STOCHMESH_STATUS_NULL_POINTER = 1,
  STOCHMESH_STATUS_INVALID_CONFIG = 2,
  STOCHMESH_STATUS_NUMERICAL = 3,
  STOCHMESH_STATUS_BUFFER_TOO_SMALL = 4,
  STOCHMESH_STATUS_IO = 5,
  STOCHMESH_STATUS_PANIC = 6,
  STOCHMESH_STATUS_INVALID_UTF8 = 7,
} StochmeshStatus;

/**
 * Opaque simulation handle.
 */
typedef struct StochmeshSimulation StochmeshSimulation;

/**
 * Mesh quality of the current state.
 */
typedef struct StochmeshQuality {
  double min_jacobian;
  double max_xi_deviation;
  double max_eta_deviation;
  bool fold_free;
} StochmeshQuality;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a simulation from TOML configuration text.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a writable pointer. On
 * success `*out` holds a handle that must be released with
 * [`stochmesh_simulation_free`]; on failure `*out` is set to null.
 */
enum StochmeshStatus stochmesh_simulation_from_toml(const char *toml,
                                                    struct StochmeshSimulation **out);

/**
 * Releases a simulation. Null is accepted and ignored.
 *
 * # Safety
 * `sim` must be null or a handle not yet freed.
 */
void stochmesh_simulation_free(struct StochmeshSimulation *sim);

/**
 * Advances the simulation by one time step.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum StochmeshStatus stochmesh_simulation_step(struct StochmeshSimulation *sim);

/**
 * Advances the simulation until its time reaches `t_target` (rounded to
 * whole steps). Targets at or before the current time do nothing.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum StochmeshStatus stochmesh_simulation_advance(struct StochmeshSimulation *sim, double t_target);

/**
 * Current simulation time, or NaN for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
double stochmesh_simulation_time(const struct StochmeshSimulation *sim);

/**
 * Writes the node counts along x and y.
 *
 * # Safety
 * `sim` must be a live handle; `nx` and `ny` writable pointers.
 */
enum StochmeshStatus stochmesh_simulation_grid_size(const struct StochmeshSimulation *sim,
                                                    size_t *nx,
                                                    size_t *ny);

/**
 * Copies the nodal values of xi and eta, x fastest, into caller buffers of
 * `len` elements each. Fails with `BUFFER_TOO_SMALL` if `len < nx * ny`.
 *
 * # Safety
 * `sim` must be a live handle; `xi` and `eta` must be valid for `len` writes.
 */
enum StochmeshStatus stochmesh_simulation_copy_fields(const struct StochmeshSimulation *sim,
                                                      double *xi,
                                                      double *eta,
                                                      size_t len);

/**
 * Computes the mesh quality of the current state.
 *
 * # Safety
 * `sim` must be a live handle and `out` writable.
 */
enum StochmeshStatus stochmesh_simulation_quality(const struct StochmeshSimulation *sim,
                                                  struct StochmeshQuality *out);

/**
 * Writes the current state as a snapshot CSV file.
 *
 * # Safety
 * `sim` must be a live handle and `path` a NUL-terminated string.
 */
enum StochmeshStatus stochmesh_simulation_write_csv(const struct StochmeshSimulation *sim,
                                                    const char *path);

/**
 * Message of the most recent failure on this thread, or null if none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *stochmesh_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *stochmesh_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STOCHMESH_H */
