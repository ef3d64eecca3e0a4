//! C ABI over the core navigation primitives.
//!
//! Everything here follows the same conventions: functions return a
//! [`NavStatus`] code (0 on success) and write results through out
//! pointers; stateful objects are opaque handles created by `*_new` and
//! released by `*_free`. The matching header is generated into
//! `include/navstack.h` at build time.

use std::ffi::c_char;

use navstack::controller::{
    fuse, linear_speed_mps, pid_step, weights_from_alphas, Control, PidGains, PidState,
    WheelFeedback,
};
use navstack::geodesy::{route_point_to_local, GeoPoint, Pose};
use navstack::metrics::total_metric;
use navstack::route::{command, NavCommand, Route, RouteTracker, RouteWindow};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NavStatus {
    Ok = 0,
    NullPointer = -1,
    InvalidArgument = -2,
    /// Coordinates outside the supported domain (polar region,
    /// antimeridian crossing, or non-finite values).
    GeodesyDomain = -3,
}

/// Turn command codes: 0 straight, 1 left, 2 right.
pub const NAV_COMMAND_GO_STRAIGHT: i32 = 0;
pub const NAV_COMMAND_TURN_LEFT: i32 = 1;
pub const NAV_COMMAND_TURN_RIGHT: i32 = 2;

unsafe fn write_out(ptr: *mut f64, value: f64) {
    if !ptr.is_null() {
        *ptr = value;
    }
}

/// Transforms a global target into the vehicle frame of the origin pose.
/// `out_x` is meters to the right, `out_y` meters forward.
///
/// # Safety
/// `out_x_m` and `out_y_m` must be valid writable pointers.
#[no_mangle]
pub unsafe extern "C" fn navstack_route_point_to_local(
    origin_lat_deg: f64,
    origin_lon_deg: f64,
    bearing_deg: f64,
    target_lat_deg: f64,
    target_lon_deg: f64,
    out_x_m: *mut f64,
    out_y_m: *mut f64,
) -> NavStatus {
    if out_x_m.is_null() || out_y_m.is_null() {
        return NavStatus::NullPointer;
    }
    let pose = Pose::new(
        GeoPoint {
            lat_deg: origin_lat_deg,
            lon_deg: origin_lon_deg,
        },
        bearing_deg,
    );
    let target = GeoPoint {
        lat_deg: target_lat_deg,
        lon_deg: target_lon_deg,
    };
    match route_point_to_local(&pose, target) {
        Ok(local) => {
            write_out(out_x_m, local.x_m);
            write_out(out_y_m, local.y_m);
            NavStatus::Ok
        }
        Err(_) => NavStatus::GeodesyDomain,
    }
}

/// Fuses the direct-agent and PID-agent controls with blend weights derived
/// from the three alphas.
///
/// # Safety
/// `out_steering` and `out_throttle` must be valid writable pointers.
#[no_mangle]
pub unsafe extern "C" fn navstack_fuse_controls(
    mlp_steering: f64,
    mlp_throttle: f64,
    pid_steering: f64,
    pid_throttle: f64,
    alpha1: f64,
    alpha2: f64,
    alpha3: f64,
    out_steering: *mut f64,
    out_throttle: *mut f64,
) -> NavStatus {
    if out_steering.is_null() || out_throttle.is_null() {
        return NavStatus::NullPointer;
    }
    let weights = match weights_from_alphas(alpha1, alpha2, alpha3) {
        Ok(w) => w,
        Err(_) => return NavStatus::InvalidArgument,
    };
    let fused = fuse(
        Control::new(mlp_steering, mlp_throttle),
        Control::new(pid_steering, pid_throttle),
        &weights,
    );
    write_out(out_steering, fused.steering);
    write_out(out_throttle, fused.throttle);
    NavStatus::Ok
}

/// Turn command from the lookahead window's lateral positions.
#[no_mangle]
pub extern "C" fn navstack_nav_command(rp1_x_m: f64, rp2_x_m: f64) -> i32 {
    use navstack::geodesy::LocalPoint;
    let window = RouteWindow {
        rp1: LocalPoint::new(rp1_x_m, 0.0),
        rp2: LocalPoint::new(rp2_x_m, 0.0),
    };
    match command(&window) {
        NavCommand::GoStraight => NAV_COMMAND_GO_STRAIGHT,
        NavCommand::TurnLeft => NAV_COMMAND_TURN_LEFT,
        NavCommand::TurnRight => NAV_COMMAND_TURN_RIGHT,
    }
}

/// The offline ranking score `(1 - iou) + mae_steering + mae_throttle`.
#[no_mangle]
pub extern "C" fn navstack_total_metric(iou_seg: f64, mae_steering: f64, mae_throttle: f64) -> f64 {
    total_metric(iou_seg, mae_steering, mae_throttle)
}

/// Linear speed in m/s from wheel angular speeds (rad/s) and radius.
#[no_mangle]
pub extern "C" fn navstack_linear_speed(
    omega_left: f64,
    omega_right: f64,
    wheel_radius_m: f64,
) -> f64 {
    linear_speed_mps(&WheelFeedback::new(omega_left, omega_right, wheel_radius_m))
}

/// Opaque discrete PID controller with clamped integral and output range.
pub struct NavPid {
    gains: PidGains,
    state: PidState,
    out_min: f64,
    out_max: f64,
}

/// Creates a PID controller. Returns null when the output range is invalid.
#[no_mangle]
pub extern "C" fn navstack_pid_new(
    kp: f64,
    ki: f64,
    kd: f64,
    integral_bound: f64,
    out_min: f64,
    out_max: f64,
) -> *mut NavPid {
    if !(out_min.is_finite() && out_max.is_finite())
        || out_min >= out_max
        || !integral_bound.is_finite()
        || integral_bound < 0.0
    {
        return std::ptr::null_mut();
    }
    Box::into_raw(Box::new(NavPid {
        gains: PidGains { kp, ki, kd },
        state: PidState::with_bound(integral_bound),
        out_min,
        out_max,
    }))
}

/// One PID update; fails on non-positive `dt_s`.
///
/// # Safety
/// `pid` must be a live handle from [`navstack_pid_new`]; `out` must be a
/// valid writable pointer.
#[no_mangle]
pub unsafe extern "C" fn navstack_pid_step(
    pid: *mut NavPid,
    error: f64,
    dt_s: f64,
    out: *mut f64,
) -> NavStatus {
    let Some(pid) = pid.as_mut() else {
        return NavStatus::NullPointer;
    };
    if out.is_null() {
        return NavStatus::NullPointer;
    }
    match pid_step(
        &mut pid.state,
        &pid.gains,
        error,
        dt_s,
        pid.out_min,
        pid.out_max,
    ) {
        Ok(value) => {
            write_out(out, value);
            NavStatus::Ok
        }
        Err(_) => NavStatus::InvalidArgument,
    }
}

/// Clears the integral accumulator and derivative memory.
///
/// # Safety
/// `pid` must be a live handle from [`navstack_pid_new`] or null.
#[no_mangle]
pub unsafe extern "C" fn navstack_pid_reset(pid: *mut NavPid) {
    if let Some(pid) = pid.as_mut() {
        pid.state.reset();
    }
}

/// Releases a PID handle. Null is ignored.
///
/// # Safety
/// `pid` must be a handle from [`navstack_pid_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn navstack_pid_free(pid: *mut NavPid) {
    if !pid.is_null() {
        drop(Box::from_raw(pid));
    }
}

/// Opaque route tracker owning its point list and progress.
pub struct NavRoute {
    route: Route,
    index: usize,
}

/// Creates a route tracker from `point_count` (lat, lon) degree pairs laid
/// out flat. Returns null for fewer than 2 points or a null pointer.
///
/// # Safety
/// `lat_lon_pairs` must point to `2 * point_count` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn navstack_route_new(
    lat_lon_pairs: *const f64,
    point_count: usize,
) -> *mut NavRoute {
    if lat_lon_pairs.is_null() || point_count < 2 {
        return std::ptr::null_mut();
    }
    let flat = std::slice::from_raw_parts(lat_lon_pairs, point_count * 2);
    let points: Vec<GeoPoint> = flat
        .chunks_exact(2)
        .map(|pair| GeoPoint {
            lat_deg: pair[0],
            lon_deg: pair[1],
        })
        .collect();
    match Route::new(points) {
        Ok(route) => Box::into_raw(Box::new(NavRoute { route, index: 0 })),
        Err(_) => std::ptr::null_mut(),
    }
}

/// Advances the tracker for the given pose, applying the 4 m switch rule
/// possibly several times. Writes the current index and whether the final
/// point has been reached.
///
/// # Safety
/// `route` must be a live handle; out pointers must be writable or null.
#[no_mangle]
pub unsafe extern "C" fn navstack_route_advance(
    route: *mut NavRoute,
    lat_deg: f64,
    lon_deg: f64,
    bearing_deg: f64,
    out_index: *mut usize,
    out_finished: *mut bool,
) -> NavStatus {
    let Some(handle) = route.as_mut() else {
        return NavStatus::NullPointer;
    };
    let pose = Pose::new(GeoPoint { lat_deg, lon_deg }, bearing_deg);
    let tracker = RouteTracker::resume(&handle.route, handle.index);
    match tracker.advance(&pose) {
        Ok((next, finished)) => {
            handle.index = next.current_index();
            if !out_index.is_null() {
                *out_index = handle.index;
            }
            if !out_finished.is_null() {
                *out_finished = finished;
            }
            NavStatus::Ok
        }
        Err(_) => NavStatus::GeodesyDomain,
    }
}

/// The two-point lookahead window in the vehicle frame of the given pose,
/// written as `[rp1_x, rp1_y, rp2_x, rp2_y]`.
///
/// # Safety
/// `route` must be a live handle; `out_window` must point to 4 writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn navstack_route_window(
    route: *const NavRoute,
    lat_deg: f64,
    lon_deg: f64,
    bearing_deg: f64,
    out_window: *mut f64,
) -> NavStatus {
    let Some(handle) = route.as_ref() else {
        return NavStatus::NullPointer;
    };
    if out_window.is_null() {
        return NavStatus::NullPointer;
    }
    let pose = Pose::new(GeoPoint { lat_deg, lon_deg }, bearing_deg);
    let tracker = RouteTracker::resume(&handle.route, handle.index);
    match tracker.window(&pose) {
        Ok(window) => {
            let out = std::slice::from_raw_parts_mut(out_window, 4);
            out[0] = window.rp1.x_m;
            out[1] = window.rp1.y_m;
            out[2] = window.rp2.x_m;
            out[3] = window.rp2.y_m;
            NavStatus::Ok
        }
        Err(_) => NavStatus::GeodesyDomain,
    }
}

/// Releases a route handle. Null is ignored.
///
/// # Safety
/// `route` must be a handle from [`navstack_route_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn navstack_route_free(route: *mut NavRoute) {
    if !route.is_null() {
        drop(Box::from_raw(route));
    }
}

/// Semantic version of this library as a static C string.
#[no_mangle]
pub extern "C" fn navstack_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
