//! Shared test oracles: independent re-implementations the integration and
//! acceptance suites check the crate against. Nothing here calls into the
//! code paths under test.

#![allow(dead_code)]

use navstack::bev::{BevGrid, CameraIntrinsics, DepthMap, SegMap, BEV_CELL_M, BEV_COLS, BEV_ROWS};
use navstack::geodesy::GeoPoint;

/// Local east/north tangent-plane oracle on the WGS-84 mean radius.
pub mod enu {
    use super::GeoPoint;

    /// WGS-84 semi-major axis, meters.
    pub const WGS84_A: f64 = 6_378_137.0;
    /// WGS-84 semi-minor axis, meters.
    pub const WGS84_B: f64 = 6_356_752.314_245;
    /// Mean radius R1 = (2a + b) / 3 derived from the WGS-84 radii.
    pub const MEAN_RADIUS_M: f64 = (2.0 * WGS84_A + WGS84_B) / 3.0;

    /// East/north meters from `origin` to `target` on the tangent plane.
    pub fn offset(origin: GeoPoint, target: GeoPoint) -> (f64, f64) {
        let dlat_rad = (target.lat_deg - origin.lat_deg).to_radians();
        let dlon_rad = (target.lon_deg - origin.lon_deg).to_radians();
        let east = MEAN_RADIUS_M * dlon_rad * origin.lat_deg.to_radians().cos();
        let north = MEAN_RADIUS_M * dlat_rad;
        (east, north)
    }

    /// Inverse of [`offset`], used to synthesize targets at exact ranges.
    pub fn displace(origin: GeoPoint, east_m: f64, north_m: f64) -> GeoPoint {
        let lat = origin.lat_deg + (north_m / MEAN_RADIUS_M).to_degrees();
        let lon = origin.lon_deg
            + (east_m / (MEAN_RADIUS_M * origin.lat_deg.to_radians().cos())).to_degrees();
        GeoPoint {
            lat_deg: lat,
            lon_deg: lon,
        }
    }
}

/// Straight transcription of the control-fusion branch table.
#[allow(clippy::too_many_arguments)]
pub fn fuse_reference(
    mlp_st: f64,
    mlp_th: f64,
    pid_st: f64,
    pid_th: f64,
    beta00: f64,
    beta10: f64,
    beta01: f64,
    beta11: f64,
) -> (f64, f64) {
    if mlp_th >= 0.1 && pid_th >= 0.1 {
        let steering = if mlp_st.abs() >= 0.1 && pid_st.abs() < 0.1 {
            mlp_st
        } else if mlp_st.abs() < 0.1 && pid_st.abs() >= 0.1 {
            pid_st
        } else {
            beta00 * mlp_st + beta10 * pid_st
        };
        let throttle = beta01 * mlp_th + beta11 * pid_th;
        (steering, throttle)
    } else if mlp_th >= 0.1 && pid_th < 0.1 {
        (mlp_st, mlp_th)
    } else if mlp_th < 0.1 && pid_th >= 0.1 {
        (pid_st, pid_th)
    } else {
        (0.0, 0.0)
    }
}

/// Straight transcription of the window-to-command rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandRef {
    Left,
    Right,
    Straight,
}

pub fn command_reference(rp1_x: f64, rp2_x: f64) -> CommandRef {
    if rp1_x <= -4.0 || rp2_x <= -8.0 {
        CommandRef::Left
    } else if rp1_x >= 4.0 || rp2_x >= 8.0 {
        CommandRef::Right
    } else {
        CommandRef::Straight
    }
}

/// Brute-force per-pixel BEV projector: back-projects and rasterizes each
/// pixel directly into a flat grid, keeping the highest point per cell and
/// breaking height ties toward the smaller class id. Deliberately written
/// with plain comparisons rather than the library's helpers.
#[allow(clippy::manual_range_contains)]
pub fn bev_reference(depth: &DepthMap, seg: &SegMap, intr: &CameraIntrinsics) -> Vec<u8> {
    let mut height_of: Vec<f64> = vec![f64::NEG_INFINITY; BEV_ROWS * BEV_COLS];
    let mut class_of: Vec<u8> = vec![0; BEV_ROWS * BEV_COLS];
    let mut touched: Vec<bool> = vec![false; BEV_ROWS * BEV_COLS];
    let pitch = intr.cam_pitch_deg.to_radians();
    for pixel_row in 0..depth.rows {
        for pixel_col in 0..depth.cols {
            let d = depth.depth(pixel_row, pixel_col) as f64;
            if !(d.is_finite() && d > 0.0) {
                continue;
            }
            let cam_x = (pixel_col as f64 - intr.cx) * d / intr.fx;
            let cam_y = (pixel_row as f64 - intr.cy) * d / intr.fy;
            let x = cam_x;
            let y = d * pitch.cos() - cam_y * pitch.sin();
            let z = intr.cam_height_m - cam_y * pitch.cos() - d * pitch.sin();
            if z < -0.5 || z > 3.0 {
                continue;
            }
            if x < -24.0 || x >= 24.0 || y < 0.0 || y >= 24.0 {
                continue;
            }
            let grid_row = 127 - (y / BEV_CELL_M).floor() as i64;
            let grid_col = 128 + (x / BEV_CELL_M).floor() as i64;
            assert!((0..128).contains(&grid_row) && (0..256).contains(&grid_col));
            let idx = grid_row as usize * BEV_COLS + grid_col as usize;
            let class_id = seg.class_at(pixel_row, pixel_col);
            let better = !touched[idx]
                || z > height_of[idx]
                || (z == height_of[idx] && class_id < class_of[idx]);
            if better {
                touched[idx] = true;
                height_of[idx] = z;
                class_of[idx] = class_id;
            }
        }
    }
    class_of
}

/// Brute-force lateral shift search matching the oracle predictor's contract.
/// Returns the chosen shift, or None when every candidate path is blocked.
pub fn shift_search_reference(
    grid: &BevGrid,
    dir: (f64, f64),
    step_m: f64,
    obstacle_classes: &[u8],
    shift_step_m: f64,
    max_shift_m: f64,
) -> Option<f64> {
    let perp = (dir.1, -dir.0);
    let base: Vec<(f64, f64)> = (1..=3)
        .map(|i| (dir.0 * step_m * i as f64, dir.1 * step_m * i as f64))
        .collect();
    let cell_blocked = |x: f64, y: f64| -> bool {
        match BevGrid::cell_of(x, y) {
            None => false,
            Some((row, col)) => {
                for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        let (r, c) = (row as i64 + dr, col as i64 + dc);
                        if (0..BEV_ROWS as i64).contains(&r)
                            && (0..BEV_COLS as i64).contains(&c)
                            && obstacle_classes.contains(&grid.class_at(r as usize, c as usize))
                        {
                            return true;
                        }
                    }
                }
                false
            }
        }
    };
    let free = |shift: f64| {
        base.iter()
            .all(|&(x, y)| !cell_blocked(x + shift * perp.0, y + shift * perp.1))
    };
    if free(0.0) {
        return Some(0.0);
    }
    let mut k = 1;
    while k as f64 * shift_step_m <= max_shift_m + 1e-9 {
        let s = k as f64 * shift_step_m;
        let left_ok = free(-s);
        let right_ok = free(s);
        if left_ok && right_ok {
            // Tie: shift away from the nearer obstacle's side.
            let mut nearest: Option<(f64, f64)> = None;
            for row in 0..BEV_ROWS {
                for col in 0..BEV_COLS {
                    if !obstacle_classes.contains(&grid.class_at(row, col)) {
                        continue;
                    }
                    let (cx, cy) = BevGrid::cell_center(row, col);
                    let d = base
                        .iter()
                        .map(|&(bx, by)| ((cx - bx).powi(2) + (cy - by).powi(2)).sqrt())
                        .fold(f64::INFINITY, f64::min);
                    let side = cx * perp.0 + cy * perp.1;
                    if nearest.is_none_or(|(nd, _)| d < nd) {
                        nearest = Some((d, side));
                    }
                }
            }
            let side = nearest.map_or(1.0, |(_, s)| s);
            return Some(if side >= 0.0 { -s } else { s });
        }
        if left_ok {
            return Some(-s);
        }
        if right_ok {
            return Some(s);
        }
        k += 1;
    }
    None
}

/// Reference binary cross-entropy + soft dice, written as two explicit
/// passes.
#[allow(clippy::manual_clamp)]
pub fn seg_loss_reference(pred: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(pred.len(), truth.len());
    let clamp = |p: f64| p.max(1e-7).min(1.0 - 1e-7);
    let mut ce_sum = 0.0;
    for i in 0..pred.len() {
        let p = clamp(pred[i]);
        let y = truth[i];
        ce_sum += -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..pred.len() {
        num += clamp(pred[i]) * truth[i];
        den += clamp(pred[i]) + truth[i];
    }
    ce_sum / pred.len() as f64 + (1.0 - 2.0 * num / den)
}

/// Reference class-wise IoU via per-class set counting.
pub fn iou_reference(pred: &[u8], truth: &[u8], class_count: usize) -> f64 {
    let mut total = 0.0;
    let mut present = 0;
    for c in 0..class_count as u8 {
        let mut inter = 0usize;
        let mut uni = 0usize;
        for i in 0..pred.len() {
            let in_pred = pred[i] == c;
            let in_truth = truth[i] == c;
            if in_pred && in_truth {
                inter += 1;
            }
            if in_pred || in_truth {
                uni += 1;
            }
        }
        if uni > 0 {
            total += inter as f64 / uni as f64;
            present += 1;
        }
    }
    total / present as f64
}

/// Reference mean absolute error.
pub fn mae_reference(pred: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(pred.len(), truth.len());
    let sum: f64 = pred.iter().zip(truth).map(|(&a, &b)| (a - b).abs()).sum();
    sum / pred.len() as f64
}

/// Closed-loop fixtures shared by the integration and acceptance suites.
pub mod fixtures {
    use std::path::Path;

    use navstack::bev::class;
    use navstack::controller::PidGains;
    use navstack::geodesy::GeoPoint;
    use navstack::harness::RunConfig;
    use navstack::sim::{ObstacleSpec, StartSpec, WorldSpec};

    pub const ORIGIN: GeoPoint = GeoPoint {
        lat_deg: 34.70,
        lon_deg: 137.41,
    };

    /// A straight 100 m route north with 12.5 m point spacing, 12 m wide
    /// road, optionally with a car parked on the left edge of the corridor
    /// at the halfway mark.
    pub fn straight_world_spec(with_car: bool) -> WorldSpec {
        let obstacles = if with_car {
            // Parked on the left between two route points, nose protruding
            // past the lane center so the straight corridor is blocked.
            vec![ObstacleSpec::Rect {
                rect: [-1.7, 42.0, 0.4, 46.0],
                class_id: class::CAR,
                height_m: 1.5,
            }]
        } else {
            vec![]
        };
        WorldSpec {
            origin: ORIGIN,
            bounds_m: [-20.0, -10.0, 20.0, 115.0],
            cell_m: 0.25,
            ground_class: class::ROAD,
            regions: vec![],
            obstacles,
            start: StartSpec {
                x_m: 0.0,
                y_m: 0.0,
                bearing_deg: 0.0,
            },
            route_file: None,
            route_local: Some((1..=8).map(|i| [0.0, 12.5 * i as f64]).collect()),
        }
    }

    /// Writes the world file and returns a run config tuned for the
    /// closed-loop scenarios (softer lateral gains than the defaults, which
    /// are sized for degree-scale errors).
    pub fn straight_run_config(dir: &Path, with_car: bool, seed: u64) -> RunConfig {
        let world_path = dir.join("world.json");
        std::fs::write(
            &world_path,
            serde_json::to_string_pretty(&straight_world_spec(with_car)).unwrap(),
        )
        .unwrap();
        let mut config = RunConfig {
            world: world_path,
            seed: Some(seed),
            out_dir: dir.join(format!("run-{seed}")),
            episode_limit_ticks: 600,
            ..RunConfig::default()
        };
        config.controller.lateral = PidGains {
            kp: -0.02,
            ki: 0.0,
            kd: 0.0,
        };
        config
    }
}
