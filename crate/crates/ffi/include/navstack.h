#ifndef NAVSTACK_H
#define NAVSTACK_H

/* Generated by cbindgen from navstack-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Turn command codes: 0 straight, 1 left, 2 right.
 */
#define NAV_COMMAND_GO_STRAIGHT 0

#define NAV_COMMAND_TURN_LEFT 1

#define NAV_COMMAND_TURN_RIGHT 2

/**
 * Status codes returned by every fallible function.
 */
typedef enum NavStatus {
  NavStatus_Ok = 0,
  NavStatus_NullPointer = -1,
  NavStatus_InvalidArgument = -2,
  /**
   * Coordinates outside the supported domain (polar region,
   * antimeridian crossing, or non-finite values).
   */
  NavStatus_GeodesyDomain = -3,
} NavStatus;

/**
 * Opaque discrete PID controller with clamped integral and output range.
 */
typedef struct NavPid NavPid;

/**
 * Opaque route tracker owning its point list and progress.
 */
typedef struct NavRoute NavRoute;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Transforms a global target into the vehicle frame of the origin pose.
 * `out_x` is meters to the right, `out_y` meters forward.
 *
 * # Safety
 * `out_x_m` and `out_y_m` must be valid writable pointers.
 */
enum NavStatus navstack_route_point_to_local(double origin_lat_deg,
                                             double origin_lon_deg,
                                             double bearing_deg,
                                             double target_lat_deg,
                                             double target_lon_deg,
                                             double *out_x_m,
                                             double *out_y_m);

/**
 * Fuses the direct-agent and PID-agent controls with blend weights derived
 * from the three alphas.
 *
 * # Safety
 * `out_steering` and `out_throttle` must be valid writable pointers.
 */
enum NavStatus navstack_fuse_controls(double mlp_steering,
                                      double mlp_throttle,
                                      double pid_steering,
                                      double pid_throttle,
                                      double alpha1,
                                      double alpha2,
                                      double alpha3,
                                      double *out_steering,
                                      double *out_throttle);

/**
 * Turn command from the lookahead window's lateral positions.
 */
int32_t navstack_nav_command(double rp1_x_m, double rp2_x_m);

/**
 * The offline ranking score `(1 - iou) + mae_steering + mae_throttle`.
 */
double navstack_total_metric(double iou_seg, double mae_steering, double mae_throttle);

/**
 * Linear speed in m/s from wheel angular speeds (rad/s) and radius.
 */
double navstack_linear_speed(double omega_left, double omega_right, double wheel_radius_m);

/**
 * Creates a PID controller. Returns null when the output range is invalid.
 */
struct NavPid *navstack_pid_new(double kp,
                                double ki,
                                double kd,
                                double integral_bound,
                                double out_min,
                                double out_max);

/**
 * One PID update; fails on non-positive `dt_s`.
 *
 * # Safety
 * `pid` must be a live handle from [`navstack_pid_new`]; `out` must be a
 * valid writable pointer.
 */
enum NavStatus navstack_pid_step(struct NavPid *pid, double error, double dt_s, double *out);

/**
 * Clears the integral accumulator and derivative memory.
 *
 * # Safety
 * `pid` must be a live handle from [`navstack_pid_new`] or null.
 */
void navstack_pid_reset(struct NavPid *pid);

/**
 * Releases a PID handle. Null is ignored.
 *
 * # Safety
 * `pid` must be a handle from [`navstack_pid_new`] not yet freed.
 */
void navstack_pid_free(struct NavPid *pid);

/**
 * Creates a route tracker from `point_count` (lat, lon) degree pairs laid
 * out flat. Returns null for fewer than 2 points or a null pointer.
 *
 * # Safety
 * `lat_lon_pairs` must point to `2 * point_count` readable doubles.
 */
struct NavRoute *navstack_route_new(const double *lat_lon_pairs, uintptr_t point_count);

/**
 * Advances the tracker for the given pose, applying the 4 m switch rule
 * possibly several times. Writes the current index and whether the final
 * point has been reached.
 *
 * # Safety
 * `route` must be a live handle; out pointers must be writable or null.
 */
enum NavStatus navstack_route_advance(struct NavRoute *route,
                                      double lat_deg,
                                      double lon_deg,
                                      double bearing_deg,
                                      uintptr_t *out_index,
                                      bool *out_finished);

/**
 * The two-point lookahead window in the vehicle frame of the given pose,
 * written as `[rp1_x, rp1_y, rp2_x, rp2_y]`.
 *
 * # Safety
 * `route` must be a live handle; `out_window` must point to 4 writable
 * doubles.
 */
enum NavStatus navstack_route_window(const struct NavRoute *route,
                                     double lat_deg,
                                     double lon_deg,
                                     double bearing_deg,
                                     double *out_window);

/**
 * Releases a route handle. Null is ignored.
 *
 * # Safety
 * `route` must be a handle from [`navstack_route_new`] not yet freed.
 */
void navstack_route_free(struct NavRoute *route);

/**
 * Semantic version of this library as a static C string.
 */
const char *navstack_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NAVSTACK_H */
