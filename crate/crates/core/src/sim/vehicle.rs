//! Differential-drive vehicle model: a unicycle with first-order actuator
//! lag. Yaw rate is positive clockwise (turning right), matching the compass
//! bearing and the positive-right steering convention.

use serde::{Deserialize, Serialize};

use crate::controller::{Control, WheelFeedback};
use crate::geodesy::{self, GeodesyError, LocalOffset, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    pub wheel_radius_m: f64,
    pub track_width_m: f64,
    pub v_max_mps: f64,
    pub yaw_rate_max_rps: f64,
    /// Simulation step; matches the 4 Hz record rate.
    pub dt_s: f64,
    /// First-order lag time constant on both actuators.
    pub actuator_tau_s: f64,
    /// Radius of the collision footprint around the vehicle center.
    pub footprint_radius_m: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            wheel_radius_m: 0.15,
            track_width_m: 0.5,
            v_max_mps: 2.0,
            yaw_rate_max_rps: 1.0,
            dt_s: 0.25,
            actuator_tau_s: 0.5,
            footprint_radius_m: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub pose: Pose,
    pub v_mps: f64,
    pub yaw_rate_rps: f64,
}

impl VehicleState {
    pub fn at_rest(pose: Pose) -> Self {
        Self {
            pose,
            v_mps: 0.0,
            yaw_rate_rps: 0.0,
        }
    }
}

/// Advances the vehicle by one step: both actuators relax exponentially
/// toward their commanded targets, then the pose integrates the resulting
/// constant twist exactly (a circular arc, or a straight segment when the
/// yaw rate is negligible).
pub fn step(
    state: &VehicleState,
    control: Control,
    params: &VehicleParams,
) -> Result<VehicleState, GeodesyError> {
    let dt = params.dt_s;
    let blend = 1.0 - (-dt / params.actuator_tau_s).exp();
    let v = (state.v_mps + (control.throttle * params.v_max_mps - state.v_mps) * blend)
        .clamp(0.0, params.v_max_mps);
    let yaw = state.yaw_rate_rps
        + (control.steering * params.yaw_rate_max_rps - state.yaw_rate_rps) * blend;

    let theta0 = state.pose.bearing_deg.to_radians();
    let (east, north) = if yaw.abs() < 1e-9 {
        (v * theta0.sin() * dt, v * theta0.cos() * dt)
    } else {
        let theta1 = theta0 + yaw * dt;
        (
            v / yaw * (theta0.cos() - theta1.cos()),
            v / yaw * (theta1.sin() - theta0.sin()),
        )
    };
    let position = geodesy::offset_to_geo(
        state.pose.position,
        LocalOffset {
            dx_m: east,
            dy_m: north,
        },
    )?;
    let bearing = state.pose.bearing_deg + (yaw * dt).to_degrees();
    Ok(VehicleState {
        pose: Pose::new(position, bearing),
        v_mps: v,
        yaw_rate_rps: yaw,
    })
}

/// Wheel angular speeds for the current twist, floored at zero. Turning
/// right (positive yaw rate) speeds up the left wheel.
pub fn wheel_speeds(state: &VehicleState, params: &VehicleParams) -> WheelFeedback {
    let half_track = params.track_width_m / 2.0;
    WheelFeedback::new(
        (state.v_mps + state.yaw_rate_rps * half_track) / params.wheel_radius_m,
        (state.v_mps - state.yaw_rate_rps * half_track) / params.wheel_radius_m,
        params.wheel_radius_m,
    )
}
