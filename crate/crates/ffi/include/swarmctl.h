#ifndef SWARMCTL_H
#define SWARMCTL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Gradient checks pass at or below this relative error.
 */
#define SWARM_GRADCHECK_TOL 1e-3

typedef enum SwarmStatus {
  SWARM_STATUS_OK = 0,
  SWARM_STATUS_NULL_POINTER = 1,
  /**
   * Malformed text, unknown key or out-of-range parameter.
   */
  SWARM_STATUS_INVALID_PARAM = 2,
  SWARM_STATUS_SHAPE_MISMATCH = 3,
  /**
   * A forward or backward solve left the admissible region.
   */
  SWARM_STATUS_INTEGRATOR_ABORT = 4,
  /**
   * The optimizer stopped on a failed step; the result is still returned.
   */
  SWARM_STATUS_STEP_FAILURE = 5,
  SWARM_STATUS_GRADCHECK_FAILED = 6,
  SWARM_STATUS_BUFFER_TOO_SMALL = 7,
  SWARM_STATUS_PANIC = 8,
} SwarmStatus;

typedef enum SwarmTermination {
  SWARM_TERMINATION_TOL_REACHED = 0,
  SWARM_TERMINATION_K_MAX_REACHED = 1,
  SWARM_TERMINATION_STEP_FAILURE = 2,
} SwarmTermination;

/**
 * Run configuration (model, initial data, optimizer and oracle settings).
 */
typedef struct SwarmConfig SwarmConfig;

/**
 * Optimizer output: best control, its trajectory and the run summary.
 */
typedef struct SwarmOptimization SwarmOptimization;

/**
 * Sampled forward trajectory.
 */
typedef struct SwarmTrajectory SwarmTrajectory;

/**
 * Scalar results of an optimization run.
 */
typedef struct SwarmSummary {
  size_t iterations;
  size_t best_iteration;
  enum SwarmTermination termination;
  double initial_cost;
  double best_cost;
  double best_tracking;
  double best_energy;
  double best_grad_norm;
} SwarmSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length
 * including the terminator, so a NULL `buf` queries the size.
 *
 * # Safety
 * `buf` must be NULL or valid for `len` bytes.
 */
size_t swarm_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *swarm_version(void);

/**
 * Creates a configuration holding the defaults.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum SwarmStatus swarm_config_new(struct SwarmConfig **out);

/**
 * Parses a `key = value` config text.
 *
 * # Safety
 * `text` must be a NUL-terminated string, `out` valid for a pointer write.
 */
enum SwarmStatus swarm_config_parse(const char *text, struct SwarmConfig **out);

/**
 * Sets one key. Cross-field validation happens when the config is used.
 *
 * # Safety
 * `cfg` must be a live handle, `key` and `value` NUL-terminated strings.
 */
enum SwarmStatus swarm_config_set(struct SwarmConfig *cfg, const char *key, const char *value);

/**
 * # Safety
 * `cfg` must be NULL or a handle from this library not yet freed.
 */
void swarm_config_free(struct SwarmConfig *cfg);

/**
 * Integrates the uncontrolled dynamics.
 *
 * # Safety
 * `cfg` must be a live handle, `out` valid for a pointer write.
 */
enum SwarmStatus swarm_simulate(const struct SwarmConfig *cfg, struct SwarmTrajectory **out);

/**
 * Reports the number of stored nodes, particles, dimension and whether
 * velocities are present (second order). Any output pointer may be NULL.
 *
 * # Safety
 * `traj` must be a live handle; non-NULL outputs must be writable.
 */
enum SwarmStatus swarm_trajectory_shape(const struct SwarmTrajectory *traj,
                                        size_t *nodes,
                                        size_t *n,
                                        size_t *d,
                                        bool *second_order);

/**
 * Copies the node times (`nodes` values).
 *
 * # Safety
 * `traj` must be a live handle and `buf` valid for `len` doubles.
 */
enum SwarmStatus swarm_trajectory_times(const struct SwarmTrajectory *traj,
                                        double *buf,
                                        size_t len);

/**
 * Copies positions (`nodes * n * d` values).
 *
 * # Safety
 * `traj` must be a live handle and `buf` valid for `len` doubles.
 */
enum SwarmStatus swarm_trajectory_positions(const struct SwarmTrajectory *traj,
                                            double *buf,
                                            size_t len);

/**
 * Copies velocities (`nodes * n * d` values); second order only.
 *
 * # Safety
 * `traj` must be a live handle and `buf` valid for `len` doubles.
 */
enum SwarmStatus swarm_trajectory_velocities(const struct SwarmTrajectory *traj,
                                             double *buf,
                                             size_t len);

/**
 * # Safety
 * `traj` must be NULL or a handle from this library not yet freed.
 */
void swarm_trajectory_free(struct SwarmTrajectory *traj);

/**
 * Runs Barzilai-Borwein descent from `u = 0`.
 *
 * Returns `SWARM_STATUS_STEP_FAILURE` when a step breaks down; `*out` is
 * still set and holds the best iterate found before the failure.
 *
 * # Safety
 * `cfg` must be a live handle, `out` valid for a pointer write.
 */
enum SwarmStatus swarm_optimize(const struct SwarmConfig *cfg, struct SwarmOptimization **out);

/**
 * # Safety
 * `res` must be a live handle and `out` writable.
 */
enum SwarmStatus swarm_optimization_summary(const struct SwarmOptimization *res,
                                            struct SwarmSummary *out);

/**
 * Copies the best control (`nodes * n * d` values).
 *
 * # Safety
 * `res` must be a live handle and `buf` valid for `len` doubles.
 */
enum SwarmStatus swarm_optimization_control(const struct SwarmOptimization *res,
                                            double *buf,
                                            size_t len);

/**
 * Copies the total cost of every iterate (`iterations + 1` values).
 *
 * # Safety
 * `res` must be a live handle and `buf` valid for `len` doubles.
 */
enum SwarmStatus swarm_optimization_costs(const struct SwarmOptimization *res,
                                          double *buf,
                                          size_t len);

/**
 * Returns a new trajectory handle for the best control.
 *
 * # Safety
 * `res` must be a live handle, `out` valid for a pointer write.
 */
enum SwarmStatus swarm_optimization_trajectory(const struct SwarmOptimization *res,
                                               struct SwarmTrajectory **out);

/**
 * # Safety
 * `res` must be NULL or a handle from this library not yet freed.
 */
void swarm_optimization_free(struct SwarmOptimization *res);

/**
 * Compares the adjoint gradient with central differences at the seeded
 * probe control. Returns `SWARM_STATUS_GRADCHECK_FAILED` when the relative
 * error exceeds [`SWARM_GRADCHECK_TOL`]; the outputs are written either way.
 *
 * # Safety
 * `cfg` must be a live handle; non-NULL outputs must be writable.
 */
enum SwarmStatus swarm_gradcheck(const struct SwarmConfig *cfg,
                                 double *relative_error_out,
                                 size_t *coords_checked);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SWARMCTL_H */
