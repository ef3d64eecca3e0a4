//! Waypoint-tracking control: aim-point geometry, the two PID controllers,
//! and the policy that fuses the direct (learned-agent) estimate with the
//! PID agent.
//!
//! Steering is positive to the right; the default lateral gains are negative
//! so that an aim point to the right (negative heading error) produces a
//! right turn. Throttle lives in `[0, 1]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesy::LocalPoint;

/// Minimum |steering| / throttle for an agent to be considered active.
pub const AGENT_ACTIVE_THRESHOLD: f64 = 0.1;
/// Gain applied to the waypoint spread when deriving the desired speed.
pub const DESIRED_SPEED_GAIN: f64 = 1.75;
/// Default wheel radius, meters.
pub const DEFAULT_WHEEL_RADIUS_M: f64 = 0.15;
/// Aim points closer to the origin than this are degenerate.
pub const DEGENERATE_AIM_NORM_M: f64 = 1e-6;
/// Default clamp on the PID integral accumulator, in error-units.
pub const DEFAULT_INTEGRAL_BOUND: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControllerError {
    #[error("aim point is degenerate (norm < {DEGENERATE_AIM_NORM_M} m)")]
    DegenerateAim,
    #[error("alpha weights must be positive, got {0}")]
    NonPositiveAlpha(f64),
    #[error("pid step requires dt > 0, got {0}")]
    NonPositiveDt(f64),
}

/// The three predicted waypoints in the vehicle frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoints {
    pub wp1: LocalPoint,
    pub wp2: LocalPoint,
    pub wp3: LocalPoint,
}

impl Waypoints {
    pub fn new(wp1: LocalPoint, wp2: LocalPoint, wp3: LocalPoint) -> Self {
        Self { wp1, wp2, wp3 }
    }

    pub fn origin() -> Self {
        let o = LocalPoint::new(0.0, 0.0);
        Self::new(o, o, o)
    }

    /// Flattens to `[x1, y1, x2, y2, x3, y3]` for metric computations.
    pub fn flat(&self) -> [f64; 6] {
        [
            self.wp1.x_m,
            self.wp1.y_m,
            self.wp2.x_m,
            self.wp2.y_m,
            self.wp3.x_m,
            self.wp3.y_m,
        ]
    }
}

/// Measured left/right wheel angular speeds, rad/s, never negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WheelFeedback {
    pub omega_l: f64,
    pub omega_r: f64,
    pub wheel_radius_m: f64,
}

impl WheelFeedback {
    pub fn new(omega_l: f64, omega_r: f64, wheel_radius_m: f64) -> Self {
        Self {
            omega_l: omega_l.max(0.0),
            omega_r: omega_r.max(0.0),
            wheel_radius_m,
        }
    }
}

/// Steering in `[-1, 1]` (positive = right) and throttle in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Control {
    pub steering: f64,
    pub throttle: f64,
}

impl Control {
    /// Builds a control, clamping both channels into range.
    pub fn new(steering: f64, throttle: f64) -> Self {
        Self {
            steering: steering.clamp(-1.0, 1.0),
            throttle: throttle.clamp(0.0, 1.0),
        }
    }

    pub fn stop() -> Self {
        Self {
            steering: 0.0,
            throttle: 0.0,
        }
    }
}

/// The controls proposed by the two decision-makers before fusion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentControls {
    pub mlp: Control,
    pub pid: Control,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

/// Default lateral gains: negative so a rightward aim steers right.
pub fn default_lateral_gains() -> PidGains {
    PidGains {
        kp: -0.8,
        ki: 0.0,
        kd: -0.2,
    }
}

/// Default longitudinal gains on the speed error.
pub fn default_longitudinal_gains() -> PidGains {
    PidGains {
        kp: 0.8,
        ki: 0.05,
        kd: 0.0,
    }
}

/// Per-episode PID state. Reset at episode start; single-writer.
#[derive(Debug, Clone, PartialEq)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: Option<f64>,
    pub integral_bound: f64,
}

impl Default for PidState {
    fn default() -> Self {
        Self {
            integral: 0.0,
            prev_error: None,
            integral_bound: DEFAULT_INTEGRAL_BOUND,
        }
    }
}

impl PidState {
    pub fn with_bound(integral_bound: f64) -> Self {
        Self {
            integral_bound,
            ..Self::default()
        }
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
        self.prev_error = None;
    }
}

/// Blend weights derived from the loss-adaptation alphas. Rows sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlWeights {
    pub beta00: f64,
    pub beta10: f64,
    pub beta01: f64,
    pub beta11: f64,
}

impl Default for ControlWeights {
    /// Equal alphas give an even 0.5/0.5 blend.
    fn default() -> Self {
        Self {
            beta00: 0.5,
            beta10: 0.5,
            beta01: 0.5,
            beta11: 0.5,
        }
    }
}

/// Midpoint of the first two waypoints.
pub fn aim_point(wp: &Waypoints) -> LocalPoint {
    LocalPoint::new(
        (wp.wp1.x_m + wp.wp2.x_m) / 2.0,
        (wp.wp1.y_m + wp.wp2.y_m) / 2.0,
    )
}

/// Heading error in degrees, zero when the aim point is dead ahead,
/// positive when the aim is to the left, normalized to `(-180, 180]`.
pub fn heading_error_deg(aim: LocalPoint) -> Result<f64, ControllerError> {
    if aim.norm_m() < DEGENERATE_AIM_NORM_M {
        return Err(ControllerError::DegenerateAim);
    }
    let theta_deg = aim.y_m.atan2(aim.x_m).to_degrees();
    Ok(wrap_half_open_deg(theta_deg - 90.0))
}

/// Wraps an angle into `(-180, 180]`.
fn wrap_half_open_deg(deg: f64) -> f64 {
    let w = (deg + 180.0).rem_euclid(360.0) - 180.0;
    if w == -180.0 {
        180.0
    } else {
        w
    }
}

/// Desired speed from the spread of the first two waypoints, m/s.
pub fn desired_speed_mps(wp: &Waypoints) -> f64 {
    desired_speed_with_gain(wp, DESIRED_SPEED_GAIN)
}

/// [`desired_speed_mps`] with a configured gain.
pub fn desired_speed_with_gain(wp: &Waypoints, gain: f64) -> f64 {
    gain * wp.wp1.distance_m(&wp.wp2)
}

/// Linear speed from wheel feedback, m/s.
pub fn linear_speed_mps(fb: &WheelFeedback) -> f64 {
    (fb.omega_l + fb.omega_r) / 2.0 * fb.wheel_radius_m
}

/// One discrete PID update, output clamped to `[out_min, out_max]`.
pub fn pid_step(
    state: &mut PidState,
    gains: &PidGains,
    error: f64,
    dt_s: f64,
    out_min: f64,
    out_max: f64,
) -> Result<f64, ControllerError> {
    if !dt_s.is_finite() || dt_s <= 0.0 {
        return Err(ControllerError::NonPositiveDt(dt_s));
    }
    state.integral =
        (state.integral + error * dt_s).clamp(-state.integral_bound, state.integral_bound);
    let derivative = match state.prev_error {
        Some(prev) => (error - prev) / dt_s,
        None => 0.0,
    };
    state.prev_error = Some(error);
    let out = gains.kp * error + gains.ki * state.integral + gains.kd * derivative;
    Ok(out.clamp(out_min, out_max))
}

/// Blend weights from the loss-adaptation alphas:
/// `beta00 = a2/(a2+a1)`, `beta01 = a3/(a3+a1)`, complements fill the rows.
pub fn weights_from_alphas(
    alpha1: f64,
    alpha2: f64,
    alpha3: f64,
) -> Result<ControlWeights, ControllerError> {
    for a in [alpha1, alpha2, alpha3] {
        if !a.is_finite() || a <= 0.0 {
            return Err(ControllerError::NonPositiveAlpha(a));
        }
    }
    let beta00 = alpha2 / (alpha2 + alpha1);
    let beta01 = alpha3 / (alpha3 + alpha1);
    Ok(ControlWeights {
        beta00,
        beta10: 1.0 - beta00,
        beta01,
        beta11: 1.0 - beta01,
    })
}

/// Fuses the direct estimate with the PID agent.
///
/// When both throttles clear the activity threshold, a steering takeover is
/// granted to whichever agent alone is steering decisively, otherwise
/// steering is beta-blended; throttle is always beta-blended in that branch.
/// When only one agent's throttle is active, that agent's control passes
/// through verbatim. When neither is active the vehicle stops.
pub fn fuse(mlp: Control, pid: Control, weights: &ControlWeights) -> Control {
    fuse_with_threshold(mlp, pid, weights, AGENT_ACTIVE_THRESHOLD)
}

/// [`fuse`] with a configured activity threshold.
pub fn fuse_with_threshold(
    mlp: Control,
    pid: Control,
    weights: &ControlWeights,
    threshold: f64,
) -> Control {
    let t = threshold;
    let (steering, throttle) = if mlp.throttle >= t && pid.throttle >= t {
        let steering = if mlp.steering.abs() >= t && pid.steering.abs() < t {
            mlp.steering
        } else if mlp.steering.abs() < t && pid.steering.abs() >= t {
            pid.steering
        } else {
            weights.beta00 * mlp.steering + weights.beta10 * pid.steering
        };
        let throttle = weights.beta01 * mlp.throttle + weights.beta11 * pid.throttle;
        (steering, throttle)
    } else if mlp.throttle >= t && pid.throttle < t {
        (mlp.steering, mlp.throttle)
    } else if mlp.throttle < t && pid.throttle >= t {
        (pid.steering, pid.throttle)
    } else {
        (0.0, 0.0)
    };
    // Clamped after blending.
    Control::new(steering, throttle)
}

/// The waypoint-tracking PID pair: lateral on the heading error, longitudinal
/// on the speed error. One instance per episode; not shared across episodes.
#[derive(Debug, Clone)]
pub struct PidAgent {
    pub lateral_gains: PidGains,
    pub longitudinal_gains: PidGains,
    pub speed_gain: f64,
    lateral_state: PidState,
    longitudinal_state: PidState,
}

impl PidAgent {
    pub fn new(
        lateral: PidGains,
        longitudinal: PidGains,
        integral_bound: f64,
        speed_gain: f64,
    ) -> Self {
        Self {
            lateral_gains: lateral,
            longitudinal_gains: longitudinal,
            speed_gain,
            lateral_state: PidState::with_bound(integral_bound),
            longitudinal_state: PidState::with_bound(integral_bound),
        }
    }

    pub fn reset(&mut self) {
        self.lateral_state.reset();
        self.longitudinal_state.reset();
    }

    /// Runs both controllers for one tick from the predicted waypoints and
    /// wheel feedback. A degenerate aim point yields zero heading error and
    /// the zero desired speed stops the vehicle.
    pub fn step(
        &mut self,
        waypoints: &Waypoints,
        wheels: &WheelFeedback,
        dt_s: f64,
    ) -> Result<Control, ControllerError> {
        let heading_error = heading_error_deg(aim_point(waypoints)).unwrap_or(0.0);
        let speed_error =
            desired_speed_with_gain(waypoints, self.speed_gain) - linear_speed_mps(wheels);
        let steering = pid_step(
            &mut self.lateral_state,
            &self.lateral_gains,
            heading_error,
            dt_s,
            -1.0,
            1.0,
        )?;
        let throttle = pid_step(
            &mut self.longitudinal_state,
            &self.longitudinal_gains,
            speed_error,
            dt_s,
            0.0,
            1.0,
        )?;
        Ok(Control::new(steering, throttle))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lp(x: f64, y: f64) -> LocalPoint {
        LocalPoint::new(x, y)
    }

    fn assert_near(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "left={a} right={b} tol={tol}");
    }

    #[test]
    fn aim_point_is_midpoint() {
        let wp = Waypoints::new(lp(0.0, 1.0), lp(0.0, 3.0), lp(0.0, 5.0));
        assert_eq!(aim_point(&wp), lp(0.0, 2.0));
        let wp = Waypoints::new(lp(1.0, 1.0), lp(-1.0, 3.0), lp(0.0, 5.0));
        assert_eq!(aim_point(&wp), lp(0.0, 2.0));
        let wp = Waypoints::new(lp(2.0, 2.0), lp(2.0, 2.0), lp(2.0, 2.0));
        assert_eq!(aim_point(&wp), lp(2.0, 2.0));
    }

    #[test]
    fn heading_error_examples() {
        assert_near(heading_error_deg(lp(0.0, 2.0)).unwrap(), 0.0, 1e-12);
        assert_near(heading_error_deg(lp(2.0, 2.0)).unwrap(), -45.0, 1e-12);
        assert_near(heading_error_deg(lp(-2.0, 2.0)).unwrap(), 45.0, 1e-12);
    }

    #[test]
    fn heading_error_degenerate_aim() {
        assert_eq!(
            heading_error_deg(lp(0.0, 0.0)),
            Err(ControllerError::DegenerateAim)
        );
        assert_eq!(
            heading_error_deg(lp(1e-9, -1e-9)),
            Err(ControllerError::DegenerateAim)
        );
    }

    #[test]
    fn desired_speed_examples() {
        let wp = Waypoints::new(lp(0.0, 1.0), lp(0.0, 3.0), lp(0.0, 5.0));
        assert_near(desired_speed_mps(&wp), 3.5, 1e-12);
        let wp = Waypoints::new(lp(1.0, 1.0), lp(1.0, 1.0), lp(1.0, 1.0));
        assert_eq!(desired_speed_mps(&wp), 0.0);
        let wp = Waypoints::new(lp(1.0, 0.0), lp(0.0, 1.0), lp(0.0, 2.0));
        assert_near(desired_speed_mps(&wp), 1.75 * 2.0f64.sqrt(), 1e-12);
    }

    #[test]
    fn linear_speed_examples() {
        let fb = WheelFeedback::new(8.3333333333, 8.3333333333, 0.15);
        assert_near(linear_speed_mps(&fb), 1.25, 1e-9);
        let fb = WheelFeedback::new(0.0, 0.0, 0.15);
        assert_eq!(linear_speed_mps(&fb), 0.0);
        let fb = WheelFeedback::new(10.0, 6.0, 0.15);
        assert_near(linear_speed_mps(&fb), 1.2, 1e-12);
    }

    #[test]
    fn pid_proportional_only() {
        let mut state = PidState::default();
        let gains = PidGains {
            kp: 1.0,
            ki: 0.0,
            kd: 0.0,
        };
        let out = pid_step(&mut state, &gains, 0.3, 0.25, -1.0, 1.0).unwrap();
        assert_near(out, 0.3, 1e-12);
    }

    #[test]
    fn pid_zero_error_zero_state() {
        let mut state = PidState::default();
        let gains = PidGains {
            kp: 0.5,
            ki: 0.2,
            kd: 0.1,
        };
        let out = pid_step(&mut state, &gains, 0.0, 0.25, -1.0, 1.0).unwrap();
        assert_eq!(out, 0.0);
    }

    #[test]
    fn pid_rejects_bad_dt() {
        let mut state = PidState::default();
        let gains = default_longitudinal_gains();
        assert!(matches!(
            pid_step(&mut state, &gains, 1.0, 0.0, 0.0, 1.0),
            Err(ControllerError::NonPositiveDt(_))
        ));
        assert!(matches!(
            pid_step(&mut state, &gains, 1.0, -0.25, 0.0, 1.0),
            Err(ControllerError::NonPositiveDt(_))
        ));
    }

    #[test]
    fn pid_integral_windup_is_bounded() {
        let mut state = PidState::with_bound(2.0);
        let gains = PidGains {
            kp: 0.0,
            ki: 1.0,
            kd: 0.0,
        };
        for _ in 0..1000 {
            pid_step(&mut state, &gains, 5.0, 0.25, -10.0, 10.0).unwrap();
        }
        assert_eq!(state.integral, 2.0);
        // And symmetric on the negative side.
        for _ in 0..1000 {
            pid_step(&mut state, &gains, -5.0, 0.25, -10.0, 10.0).unwrap();
        }
        assert_eq!(state.integral, -2.0);
    }

    #[test]
    fn weights_from_alphas_examples() {
        let w = weights_from_alphas(1.0, 1.0, 1.0).unwrap();
        assert_eq!(
            w,
            ControlWeights {
                beta00: 0.5,
                beta10: 0.5,
                beta01: 0.5,
                beta11: 0.5
            }
        );
        let w = weights_from_alphas(1.0, 3.0, 1.0).unwrap();
        assert_near(w.beta00, 0.75, 1e-12);
        assert_near(w.beta10, 0.25, 1e-12);
        assert_near(w.beta01, 0.5, 1e-12);

        assert!(matches!(
            weights_from_alphas(0.0, 1.0, 1.0),
            Err(ControllerError::NonPositiveAlpha(_))
        ));
        assert!(matches!(
            weights_from_alphas(1.0, -2.0, 1.0),
            Err(ControllerError::NonPositiveAlpha(_))
        ));
    }

    #[test]
    fn fuse_spec_examples() {
        let w = ControlWeights::default();
        // Direct agent takes over when the PID throttle is inactive.
        let out = fuse(Control::new(0.5, 0.5), Control::new(0.3, 0.05), &w);
        assert_eq!(out, Control::new(0.5, 0.5));
        // Neither throttle active: full stop.
        let out = fuse(Control::new(0.2, 0.05), Control::new(0.4, 0.02), &w);
        assert_eq!(out, Control::stop());
        // PID steering takeover inside the both-active branch.
        let out = fuse(Control::new(0.05, 0.5), Control::new(0.4, 0.5), &w);
        assert_near(out.steering, 0.4, 1e-12);
        assert_near(out.throttle, 0.5, 1e-12);
        // Plain blend.
        let out = fuse(Control::new(0.3, 0.5), Control::new(0.5, 0.5), &w);
        assert_near(out.steering, 0.4, 1e-12);
        assert_near(out.throttle, 0.5, 1e-12);
    }

    #[test]
    fn fuse_mlp_steering_takeover() {
        let w = ControlWeights::default();
        let out = fuse(Control::new(0.8, 0.5), Control::new(0.05, 0.5), &w);
        assert_eq!(out.steering, 0.8);
        assert_near(out.throttle, 0.5, 1e-12);
    }

    proptest! {
        #[test]
        fn fuse_stops_iff_both_throttles_inactive(
            ms in -1.0f64..1.0, mt in 0.0f64..1.0,
            ps in -1.0f64..1.0, pt in 0.0f64..1.0,
        ) {
            let out = fuse(Control::new(ms, mt), Control::new(ps, pt), &ControlWeights::default());
            let both_inactive = mt < AGENT_ACTIVE_THRESHOLD && pt < AGENT_ACTIVE_THRESHOLD;
            prop_assert_eq!(out == Control::stop(), both_inactive);
            prop_assert!((-1.0..=1.0).contains(&out.steering));
            prop_assert!((0.0..=1.0).contains(&out.throttle));
        }

        #[test]
        fn weights_rows_sum_to_one_and_scale_invariant(
            a1 in 0.01f64..100.0, a2 in 0.01f64..100.0, a3 in 0.01f64..100.0,
            scale in 0.01f64..100.0,
        ) {
            let w = weights_from_alphas(a1, a2, a3).unwrap();
            prop_assert_eq!(w.beta00 + w.beta10, 1.0);
            prop_assert_eq!(w.beta01 + w.beta11, 1.0);
            let ws = weights_from_alphas(a1 * scale, a2 * scale, a3 * scale).unwrap();
            prop_assert!((w.beta00 - ws.beta00).abs() < 1e-12);
            prop_assert!((w.beta01 - ws.beta01).abs() < 1e-12);
        }

        #[test]
        fn heading_error_is_odd_in_x(
            x in -50.0f64..50.0,
            y in -50.0f64..50.0,
        ) {
            prop_assume!(x.hypot(y) > 1e-3);
            let e1 = heading_error_deg(LocalPoint::new(x, y)).unwrap();
            let e2 = heading_error_deg(LocalPoint::new(-x, y)).unwrap();
            // Odd symmetry as angles: e1 + e2 = 0 modulo 360.
            let s = (e1 + e2).rem_euclid(360.0);
            let dist = s.min(360.0 - s);
            prop_assert!(dist < 1e-9, "e1={e1} e2={e2}");
        }

        #[test]
        fn zero_gain_pid_outputs_zero(
            e in -100.0f64..100.0,
            steps in 1usize..20,
        ) {
            let mut state = PidState::default();
            let gains = PidGains { kp: 0.0, ki: 0.0, kd: 0.0 };
            for _ in 0..steps {
                let out = pid_step(&mut state, &gains, e, 0.25, -1.0, 1.0).unwrap();
                prop_assert_eq!(out, 0.0);
            }
        }
    }
}
