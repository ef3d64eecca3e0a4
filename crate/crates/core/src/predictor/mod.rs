//! Waypoint and control prediction.
//!
//! Three interchangeable sources fill the learned controller's slot:
//!
//! - [`pure_pursuit_predict`]: a deliberately simple oracle that aims along
//!   the bearing to the first route point and sidesteps obstacles by a
//!   lateral shift search over the BEV grid.
//! - [`playback_predict`]: replays a recorded trajectory, turning future
//!   positions into vehicle-frame waypoints (the same rule that defines
//!   waypoint ground truth at +1/+2/+3 s).
//! - [`stream`]: an external process speaking line-delimited JSON over its
//!   standard streams.

pub mod stream;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bev::{default_obstacle_classes, BevGrid, BEV_COLS, BEV_ROWS};
use crate::controller::{Control, Waypoints, WheelFeedback};
use crate::geodesy::{self, GeodesyError, LocalPoint, Pose};
use crate::record::TickRecord;
use crate::route::RouteWindow;

/// Sanity bound on a single waypoint delta, meters per axis.
pub const MAX_DELTA_M: f64 = 8.0;
/// The oracle caps its per-second arc step here; real speed targets are
/// well below the 2 m/s platform maximum.
pub const MAX_STEP_MPS: f64 = 2.5;

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("waypoint delta ({dx_m}, {dy_m}) exceeds +/-{MAX_DELTA_M} m")]
    DeltaOutOfRange { dx_m: f64, dy_m: f64 },
    #[error("fewer than 12 future ticks remain at tick {tick}")]
    EndOfRecord { tick: usize },
    #[error(transparent)]
    Geodesy(#[from] GeodesyError),
    #[error("external predictor stream closed")]
    StreamClosed,
    #[error("external predictor i/o: {0}")]
    StreamIo(#[from] std::io::Error),
    #[error("external predictor protocol: {0}")]
    Protocol(#[from] serde_json::Error),
}

/// Everything a predictor sees at one tick.
#[derive(Debug, Clone)]
pub struct ObservationBundle {
    pub bev: BevGrid,
    pub window: RouteWindow,
    pub wheels: WheelFeedback,
}

/// A single waypoint increment, bounded to one second of reach at maximum
/// speed with margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaypointDelta {
    pub dx_m: f64,
    pub dy_m: f64,
}

impl WaypointDelta {
    pub fn new(dx_m: f64, dy_m: f64) -> Result<Self, PredictorError> {
        if !dx_m.is_finite()
            || !dy_m.is_finite()
            || dx_m.abs() > MAX_DELTA_M
            || dy_m.abs() > MAX_DELTA_M
        {
            return Err(PredictorError::DeltaOutOfRange { dx_m, dy_m });
        }
        Ok(Self { dx_m, dy_m })
    }
}

/// Waypoints plus the direct control estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionOutput {
    pub waypoints: Waypoints,
    pub control: Control,
}

impl PredictionOutput {
    /// The stop fallback: waypoints collapsed onto the vehicle, zero control.
    pub fn stop() -> Self {
        Self {
            waypoints: Waypoints::origin(),
            control: Control::stop(),
        }
    }
}

/// The waypoint accumulation rule: each waypoint is the previous one plus a
/// predicted delta, starting from the vehicle position at (0, 0).
pub fn accumulate(current: LocalPoint, delta: WaypointDelta) -> LocalPoint {
    LocalPoint::new(current.x_m + delta.dx_m, current.y_m + delta.dy_m)
}

fn waypoints_from_deltas(deltas: [WaypointDelta; 3]) -> Waypoints {
    let wp1 = accumulate(LocalPoint::new(0.0, 0.0), deltas[0]);
    let wp2 = accumulate(wp1, deltas[1]);
    let wp3 = accumulate(wp2, deltas[2]);
    Waypoints::new(wp1, wp2, wp3)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PurePursuitConfig {
    /// BEV classes the path must keep clear of.
    pub obstacle_classes: Vec<u8>,
    /// Lateral search step.
    pub shift_step_m: f64,
    /// Largest lateral shift tried to either side.
    pub max_shift_m: f64,
    /// Curvature-to-steering gain.
    pub steer_gain: f64,
    /// Proportional throttle gain on the speed error.
    pub throttle_gain: f64,
}

impl Default for PurePursuitConfig {
    fn default() -> Self {
        Self {
            obstacle_classes: default_obstacle_classes(),
            shift_step_m: 0.375,
            max_shift_m: 3.0,
            steer_gain: 0.8,
            throttle_gain: 0.8,
        }
    }
}

/// True when the cell under the point or any of its 3x3 neighbors holds an
/// obstacle class. Points outside the grid are treated as free.
fn blocked(grid: &BevGrid, x_m: f64, y_m: f64, obstacle_classes: &[u8]) -> bool {
    let Some((row, col)) = BevGrid::cell_of(x_m, y_m) else {
        return false;
    };
    for dr in -1isize..=1 {
        for dc in -1isize..=1 {
            let r = row as isize + dr;
            let c = col as isize + dc;
            if (0..BEV_ROWS as isize).contains(&r)
                && (0..BEV_COLS as isize).contains(&c)
                && obstacle_classes.contains(&grid.class_at(r as usize, c as usize))
            {
                return true;
            }
        }
    }
    false
}

/// Emits three waypoints along the bearing to the first route point at arc
/// distances of one, two, and three seconds of travel, laterally shifted by
/// the smallest step that keeps every waypoint's BEV neighborhood free of
/// obstacles. A fully blocked corridor stops the vehicle.
pub fn pure_pursuit_predict(
    obs: &ObservationBundle,
    speed_target_mps: f64,
    cfg: &PurePursuitConfig,
) -> PredictionOutput {
    let rp1 = obs.window.rp1;
    let range = rp1.norm_m();
    let step = speed_target_mps.clamp(0.0, MAX_STEP_MPS);
    if range < 1e-6 || step <= 0.0 {
        return PredictionOutput::stop();
    }
    let dir = (rp1.x_m / range, rp1.y_m / range);
    // Right-hand perpendicular: positive shifts move the path rightward.
    let perp = (dir.1, -dir.0);
    let base: Vec<(f64, f64)> = (1..=3)
        .map(|i| (dir.0 * step * i as f64, dir.1 * step * i as f64))
        .collect();

    let path_free = |shift: f64| {
        base.iter().all(|&(x, y)| {
            !blocked(
                &obs.bev,
                x + shift * perp.0,
                y + shift * perp.1,
                &cfg.obstacle_classes,
            )
        })
    };

    let mut chosen: Option<f64> = None;
    if path_free(0.0) {
        chosen = Some(0.0);
    } else {
        let steps = (cfg.max_shift_m / cfg.shift_step_m).floor() as usize;
        for k in 1..=steps {
            let s = k as f64 * cfg.shift_step_m;
            match (path_free(-s), path_free(s)) {
                (true, true) => {
                    // Shift away from whichever side the nearer obstacle is on.
                    let side = nearest_obstacle_side(&obs.bev, &base, perp, &cfg.obstacle_classes);
                    chosen = Some(if side >= 0.0 { -s } else { s });
                    break;
                }
                (true, false) => {
                    chosen = Some(-s);
                    break;
                }
                (false, true) => {
                    chosen = Some(s);
                    break;
                }
                (false, false) => {}
            }
        }
    }
    let Some(shift) = chosen else {
        return PredictionOutput::stop();
    };

    let targets: Vec<(f64, f64)> = base
        .iter()
        .map(|&(x, y)| (x + shift * perp.0, y + shift * perp.1))
        .collect();
    let deltas = [
        WaypointDelta::new(targets[0].0, targets[0].1),
        WaypointDelta::new(targets[1].0 - targets[0].0, targets[1].1 - targets[0].1),
        WaypointDelta::new(targets[2].0 - targets[1].0, targets[2].1 - targets[1].1),
    ]
    .map(|d| d.expect("oracle deltas bounded by step cap and shift limit"));
    let waypoints = waypoints_from_deltas(deltas);

    // Direct control: pure-pursuit steering from the aim point, proportional
    // throttle toward the target speed.
    let aim = crate::controller::aim_point(&waypoints);
    let dist_sq = (aim.x_m * aim.x_m + aim.y_m * aim.y_m).max(1e-6);
    let curvature = 2.0 * aim.x_m / dist_sq;
    let speed = crate::controller::linear_speed_mps(&obs.wheels);
    let control = Control::new(
        curvature * cfg.steer_gain,
        cfg.throttle_gain * (speed_target_mps - speed),
    );
    PredictionOutput { waypoints, control }
}

/// Signed lateral position (along `perp`) of the obstacle cell nearest to
/// the base path; positive means the obstacle sits to the path's right.
fn nearest_obstacle_side(
    grid: &BevGrid,
    base: &[(f64, f64)],
    perp: (f64, f64),
    obstacle_classes: &[u8],
) -> f64 {
    let mut best: Option<(f64, f64)> = None;
    for row in 0..BEV_ROWS {
        for col in 0..BEV_COLS {
            if !obstacle_classes.contains(&grid.class_at(row, col)) {
                continue;
            }
            let (x, y) = BevGrid::cell_center(row, col);
            let d = base
                .iter()
                .map(|&(bx, by)| (x - bx).hypot(y - by))
                .fold(f64::INFINITY, f64::min);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, x * perp.0 + y * perp.1));
            }
        }
    }
    best.map_or(1.0, |(_, side)| side)
}

/// Waypoints from a recorded trajectory: the positions 4, 8 and 12 ticks
/// ahead (one, two, three seconds at 4 Hz) in the current tick's vehicle
/// frame. Fails near the record tail, which evaluation excludes.
pub fn playback_predict(ticks: &[TickRecord], index: usize) -> Result<Waypoints, PredictorError> {
    if index + 12 >= ticks.len() {
        return Err(PredictorError::EndOfRecord { tick: index });
    }
    let here = &ticks[index];
    let pose = Pose::new(here.gnss, here.bearing_deg);
    let mut future = [LocalPoint::new(0.0, 0.0); 3];
    for (slot, offset) in future.iter_mut().zip([4usize, 8, 12]) {
        *slot = geodesy::route_point_to_local(&pose, ticks[index + offset].gnss)?;
    }
    Ok(Waypoints::new(future[0], future[1], future[2]))
}
