//! Sensor models: camera depth/segmentation rendering, the top-down BEV
//! shortcut, and GNSS/bearing/depth noise injection.
//!
//! All randomness flows through the caller's seeded generator in a fixed
//! draw order, so identical seeds reproduce identical observations.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::bev::{class, BevGrid, CameraIntrinsics, DepthMap, SegMap, BEV_COLS, BEV_ROWS};
use crate::geodesy::{self, GeoPoint, GeodesyError, LocalOffset, Pose};
use crate::sim::world::World;
use crate::sim::VehicleState;

/// Noise magnitudes; zero sigmas reproduce ground truth exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorNoise {
    pub gnss_sigma_m: f64,
    pub bearing_sigma_deg: f64,
    pub depth_relative_sigma: f64,
}

impl Default for SensorNoise {
    fn default() -> Self {
        Self {
            gnss_sigma_m: 0.0,
            bearing_sigma_deg: 0.0,
            depth_relative_sigma: 0.0,
        }
    }
}

/// One tick's sensor output.
#[derive(Debug, Clone)]
pub struct Sensed {
    pub gnss: GeoPoint,
    pub bearing_deg: f64,
    pub depth: Option<DepthMap>,
    pub seg: Option<SegMap>,
}

/// Renders depth (meters along the optical axis) and class rasters from the
/// camera pose: analytic ray casts against the ground plane and every
/// obstacle box. Pixels above the horizon with nothing to hit are sky with
/// infinite (invalid) depth.
pub fn render_depth_seg(
    world: &World,
    pose: &Pose,
    intr: &CameraIntrinsics,
) -> Result<(DepthMap, SegMap), GeodesyError> {
    let cam = world.local_of(pose.position)?;
    let origin = [cam.dx_m, cam.dy_m, intr.cam_height_m];
    let (sin_p, cos_p) = intr.cam_pitch_deg.to_radians().sin_cos();
    let (sin_b, cos_b) = pose.bearing_deg.to_radians().sin_cos();

    let mut depth = DepthMap::filled(intr.height, intr.width, f32::INFINITY);
    let mut seg_data = vec![class::SKY; intr.height * intr.width];

    for row in 0..intr.height {
        for col in 0..intr.width {
            // Pixel ray scaled to unit optical-axis component, so the ray
            // parameter is the stored depth.
            let xc = (col as f64 - intr.cx) / intr.fx;
            let yc = (row as f64 - intr.cy) / intr.fy;
            let vx = xc;
            let vy = cos_p - yc * sin_p;
            let vz = -yc * cos_p - sin_p;
            let dir = [vx * cos_b + vy * sin_b, -vx * sin_b + vy * cos_b, vz];

            let mut hit_s = f64::INFINITY;
            let mut hit_class = class::SKY;
            if dir[2] < -1e-12 {
                hit_s = -origin[2] / dir[2];
                let gx = origin[0] + hit_s * dir[0];
                let gy = origin[1] + hit_s * dir[1];
                hit_class = world.ground_class_at(gx, gy);
            }
            for b in &world.boxes {
                if let Some(s) = b.ray_hit(origin, dir) {
                    if s < hit_s {
                        hit_s = s;
                        hit_class = b.class_id;
                    }
                }
            }
            if hit_s.is_finite() {
                depth.set(row, col, hit_s as f32);
                seg_data[row * intr.width + col] = hit_class;
            }
        }
    }
    let seg = SegMap::new(intr.height, intr.width, seg_data)
        .expect("renderer only emits palette classes");
    Ok((depth, seg))
}

/// Ground-truth BEV built directly from the world's top-down class grid at
/// the vehicle's true pose; the fast substitute for the camera pipeline.
pub fn topdown_bev(world: &World, pose: &Pose) -> Result<BevGrid, GeodesyError> {
    let at = world.local_of(pose.position)?;
    let (sin_b, cos_b) = pose.bearing_deg.to_radians().sin_cos();
    let mut grid = BevGrid::empty();
    for row in 0..BEV_ROWS {
        for col in 0..BEV_COLS {
            let (x, y) = BevGrid::cell_center(row, col);
            // Vehicle frame to world east/north.
            let e = at.dx_m + cos_b * x + sin_b * y;
            let n = at.dy_m - sin_b * x + cos_b * y;
            grid.set(row, col, world.class_at(e, n));
        }
    }
    Ok(grid)
}

/// Samples one tick of observations. Draw order is fixed: GNSS east, GNSS
/// north, bearing, then per-pixel depth noise when a camera render is
/// requested.
pub fn sense(
    world: &World,
    state: &VehicleState,
    intr: &CameraIntrinsics,
    noise: &SensorNoise,
    rng: &mut ChaCha8Rng,
    render_camera: bool,
) -> Result<Sensed, GeodesyError> {
    let gnss = if noise.gnss_sigma_m > 0.0 {
        let normal = Normal::new(0.0, noise.gnss_sigma_m).expect("finite sigma");
        let offset = LocalOffset {
            dx_m: normal.sample(rng),
            dy_m: normal.sample(rng),
        };
        geodesy::offset_to_geo(state.pose.position, offset)?
    } else {
        state.pose.position
    };
    let bearing_deg = if noise.bearing_sigma_deg > 0.0 {
        let normal = Normal::new(0.0, noise.bearing_sigma_deg).expect("finite sigma");
        geodesy::normalize_bearing_deg(state.pose.bearing_deg + normal.sample(rng))
    } else {
        state.pose.bearing_deg
    };

    let (depth, seg) = if render_camera {
        let (mut depth, seg) = render_depth_seg(world, &state.pose, intr)?;
        if noise.depth_relative_sigma > 0.0 {
            let normal = Normal::new(0.0, noise.depth_relative_sigma).expect("finite sigma");
            for v in depth.data.iter_mut() {
                if v.is_finite() {
                    let factor = (1.0 + normal.sample(rng)).max(1e-3);
                    *v = (*v as f64 * factor) as f32;
                }
            }
        }
        (Some(depth), Some(seg))
    } else {
        (None, None)
    };

    Ok(Sensed {
        gnss,
        bearing_deg,
        depth,
        seg,
    })
}
