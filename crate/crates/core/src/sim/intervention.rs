//! The automatic intervention supervisor.
//!
//! A kinematic rollout of the control about to be applied predicts
//! collisions a fixed horizon ahead; straying too far from the route
//! polyline also triggers. During an intervention a pure-pursuit supervisor
//! steers the vehicle back toward the route centerline; the intervention
//! ends once the vehicle is close to the polyline again and the model's
//! control no longer predicts a collision.

use serde::{Deserialize, Serialize};

use crate::controller::Control;
use crate::geodesy::GeodesyError;
use crate::sim::vehicle::{step, VehicleParams, VehicleState};
use crate::sim::world::World;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterventionCause {
    PredictedCollision,
    OffRoute,
}

/// One supervisor takeover, inclusive of both end ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterventionEvent {
    pub start_tick: u64,
    pub end_tick: u64,
    pub cause: InterventionCause,
}

impl InterventionEvent {
    pub fn duration_s(&self, dt_s: f64) -> f64 {
        (self.end_tick - self.start_tick + 1) as f64 * dt_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SupervisorConfig {
    /// Collision lookahead for the kinematic rollout.
    pub horizon_s: f64,
    /// Distance from the route polyline that counts as off-route.
    pub off_route_limit_m: f64,
    /// An intervention may end once the vehicle is back within this
    /// distance of the polyline.
    pub rejoin_tolerance_m: f64,
    /// Pure-pursuit lookahead along the polyline.
    pub lookahead_m: f64,
    /// Supervisor cruise speed while correcting.
    pub speed_mps: f64,
    /// The supervisor cuts its own throttle when its correction would hit
    /// an obstacle within this horizon.
    pub brake_guard_horizon_s: f64,
}

impl Default for SupervisorConfig {
    fn default() -> Self {
        Self {
            horizon_s: 2.0,
            off_route_limit_m: 5.0,
            rejoin_tolerance_m: 1.0,
            lookahead_m: 3.0,
            speed_mps: 0.6,
            brake_guard_horizon_s: 1.0,
        }
    }
}

/// Rolls `control` forward kinematically and reports whether the footprint
/// would intersect an obstacle within the horizon.
pub fn predicts_collision(
    world: &World,
    state: &VehicleState,
    control: Control,
    params: &VehicleParams,
    horizon_s: f64,
) -> Result<bool, GeodesyError> {
    let steps = (horizon_s / params.dt_s).ceil() as usize;
    let mut rolled = *state;
    for _ in 0..=steps {
        let at = world.local_of(rolled.pose.position)?;
        if world.obstacle_clearance(at.dx_m, at.dy_m) < params.footprint_radius_m {
            return Ok(true);
        }
        rolled = step(&rolled, control, params)?;
    }
    Ok(false)
}

/// Supervisor state machine, one per episode.
#[derive(Debug, Clone)]
pub struct Supervisor {
    config: SupervisorConfig,
    active_since: Option<(u64, InterventionCause)>,
    events: Vec<InterventionEvent>,
}

impl Supervisor {
    pub fn new(config: SupervisorConfig) -> Self {
        Self {
            config,
            active_since: None,
            events: Vec::new(),
        }
    }

    pub fn is_active(&self) -> bool {
        self.active_since.is_some()
    }

    pub fn current_cause(&self) -> Option<InterventionCause> {
        self.active_since.map(|(_, cause)| cause)
    }

    /// Decides the control actually applied this tick. Returns the control
    /// and whether the supervisor owned it.
    pub fn arbitrate(
        &mut self,
        world: &World,
        state: &VehicleState,
        model_control: Control,
        params: &VehicleParams,
        tick: u64,
    ) -> Result<(Control, bool), GeodesyError> {
        let at = world.local_of(state.pose.position)?;
        let on_route = world.distance_to_route(at.dx_m, at.dy_m);

        if let Some((start, cause)) = self.active_since {
            let clear =
                !predicts_collision(world, state, model_control, params, self.config.horizon_s)?;
            if on_route <= self.config.rejoin_tolerance_m && clear {
                // Hand control back; this tick already belongs to the model.
                self.active_since = None;
                self.events.push(InterventionEvent {
                    start_tick: start,
                    end_tick: tick.saturating_sub(1),
                    cause,
                });
                return Ok((model_control, false));
            }
            return Ok((self.correction_control(world, state, params)?, true));
        }

        let cause =
            if predicts_collision(world, state, model_control, params, self.config.horizon_s)? {
                Some(InterventionCause::PredictedCollision)
            } else if on_route > self.config.off_route_limit_m {
                Some(InterventionCause::OffRoute)
            } else {
                None
            };
        if let Some(cause) = cause {
            self.active_since = Some((tick, cause));
            return Ok((self.correction_control(world, state, params)?, true));
        }
        Ok((model_control, false))
    }

    /// Pure pursuit toward a point a fixed lookahead further along the
    /// route polyline, at the supervisor's cruise speed.
    fn correction_control(
        &self,
        world: &World,
        state: &VehicleState,
        params: &VehicleParams,
    ) -> Result<Control, GeodesyError> {
        let at = world.local_of(state.pose.position)?;
        let (tx, ty) = world.route_point_ahead(at.dx_m, at.dy_m, self.config.lookahead_m);
        // Target into the vehicle frame.
        let (sin_b, cos_b) = state.pose.bearing_deg.to_radians().sin_cos();
        let (dx, dy) = (tx - at.dx_m, ty - at.dy_m);
        let local_x = cos_b * dx - sin_b * dy;
        let local_y = sin_b * dx + cos_b * dy;
        let dist_sq = (local_x * local_x + local_y * local_y).max(1e-6);
        let curvature = 2.0 * local_x / dist_sq;
        let steering = if local_y < 0.0 {
            // Target behind: turn hard toward its side.
            if local_x >= 0.0 {
                1.0
            } else {
                -1.0
            }
        } else {
            curvature * self.config.speed_mps / params.yaw_rate_max_rps
        };
        let throttle = self.config.speed_mps / params.v_max_mps;
        let control = Control::new(steering, throttle);
        // The correction itself must not cause the collision it prevents:
        // coast if the pursuit path is about to hit something.
        if predicts_collision(
            world,
            state,
            control,
            params,
            self.config.brake_guard_horizon_s,
        )? {
            return Ok(Control::new(steering, 0.0));
        }
        Ok(control)
    }

    /// Closes any open event at episode end and returns all of them.
    pub fn finish(mut self, last_tick: u64) -> Vec<InterventionEvent> {
        if let Some((start, cause)) = self.active_since.take() {
            self.events.push(InterventionEvent {
                start_tick: start,
                end_tick: last_tick,
                cause,
            });
        }
        self.events
    }
}
