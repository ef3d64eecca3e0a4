//! The synthetic episode world: a ground-class grid over a bounded area,
//! analytic obstacle shapes (axis-aligned rectangles and fattened
//! polylines), the start pose, and the route.
//!
//! World files are JSON; geometry is expressed in a local east/north frame
//! anchored at the `origin` geo point, meters.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bev::{class, CLASS_COUNT};
use crate::geodesy::{self, GeoPoint, GeodesyError, LocalOffset, Pose};
use crate::route::{Route, RouteError};

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("failed to read world file: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse world file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error(transparent)]
    Geodesy(#[from] GeodesyError),
    #[error("invalid world: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RegionSpec {
    /// `[x_min, y_min, x_max, y_max]` in local meters.
    pub rect: [f64; 4],
    pub class_id: u8,
}

/// Obstacles are either axis-aligned rectangles or polylines fattened to a
/// width; both carry a class id and a height used by the depth renderer.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObstacleSpec {
    Rect {
        rect: [f64; 4],
        class_id: u8,
        height_m: f64,
    },
    Polyline {
        points: Vec<[f64; 2]>,
        width_m: f64,
        class_id: u8,
        height_m: f64,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StartSpec {
    pub x_m: f64,
    pub y_m: f64,
    pub bearing_deg: f64,
}

/// The on-disk world schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldSpec {
    pub origin: GeoPoint,
    /// `[x_min, y_min, x_max, y_max]` in local meters.
    pub bounds_m: [f64; 4],
    #[serde(default = "default_cell_m")]
    pub cell_m: f64,
    #[serde(default = "default_ground_class")]
    pub ground_class: u8,
    #[serde(default)]
    pub regions: Vec<RegionSpec>,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    pub start: StartSpec,
    /// Path to a route file, relative to the world file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route_file: Option<String>,
    /// Inline route as local east/north points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route_local: Option<Vec<[f64; 2]>>,
}

fn default_cell_m() -> f64 {
    0.25
}

fn default_ground_class() -> u8 {
    class::ROAD
}

/// An oriented box footprint with a height: the analytic form used for ray
/// intersection and clearance queries.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ObstacleBox {
    cx: f64,
    cy: f64,
    half_u: f64,
    half_v: f64,
    cos_t: f64,
    sin_t: f64,
    pub class_id: u8,
    pub height_m: f64,
}

impl ObstacleBox {
    fn from_rect(rect: [f64; 4], class_id: u8, height_m: f64) -> Self {
        Self {
            cx: (rect[0] + rect[2]) / 2.0,
            cy: (rect[1] + rect[3]) / 2.0,
            half_u: (rect[2] - rect[0]).abs() / 2.0,
            half_v: (rect[3] - rect[1]).abs() / 2.0,
            cos_t: 1.0,
            sin_t: 0.0,
            class_id,
            height_m,
        }
    }

    fn from_segment(a: [f64; 2], b: [f64; 2], width_m: f64, class_id: u8, height_m: f64) -> Self {
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len = dx.hypot(dy).max(1e-9);
        Self {
            cx: (a[0] + b[0]) / 2.0,
            cy: (a[1] + b[1]) / 2.0,
            // Extend the ends by a half width so joints are covered.
            half_u: len / 2.0 + width_m / 2.0,
            half_v: width_m / 2.0,
            cos_t: dx / len,
            sin_t: dy / len,
            class_id,
            height_m,
        }
    }

    /// Local box-frame coordinates of a world point.
    fn box_frame(&self, x: f64, y: f64) -> (f64, f64) {
        let (rx, ry) = (x - self.cx, y - self.cy);
        (
            rx * self.cos_t + ry * self.sin_t,
            -rx * self.sin_t + ry * self.cos_t,
        )
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (u, v) = self.box_frame(x, y);
        u.abs() <= self.half_u && v.abs() <= self.half_v
    }

    /// Distance from a point to the footprint; negative inside.
    pub fn clearance(&self, x: f64, y: f64) -> f64 {
        let (u, v) = self.box_frame(x, y);
        let du = u.abs() - self.half_u;
        let dv = v.abs() - self.half_v;
        if du <= 0.0 && dv <= 0.0 {
            du.max(dv)
        } else {
            du.max(0.0).hypot(dv.max(0.0))
        }
    }

    /// Smallest positive ray parameter where `origin + s * dir` enters the
    /// box volume `footprint x [0, height]`, if any.
    pub fn ray_hit(&self, origin: [f64; 3], dir: [f64; 3]) -> Option<f64> {
        // Rotate the horizontal components into the box frame.
        let (ou, ov) = self.box_frame(origin[0], origin[1]);
        let du = dir[0] * self.cos_t + dir[1] * self.sin_t;
        let dv = -dir[0] * self.sin_t + dir[1] * self.cos_t;
        let mut t_min = 0.0f64;
        let mut t_max = f64::INFINITY;
        for (o, d, lo, hi) in [
            (ou, du, -self.half_u, self.half_u),
            (ov, dv, -self.half_v, self.half_v),
            (origin[2], dir[2], 0.0, self.height_m),
        ] {
            if d.abs() < 1e-12 {
                if o < lo || o > hi {
                    return None;
                }
                continue;
            }
            let (t0, t1) = ((lo - o) / d, (hi - o) / d);
            let (t0, t1) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
            t_min = t_min.max(t0);
            t_max = t_max.min(t1);
            if t_min > t_max {
                return None;
            }
        }
        (t_min > 0.0).then_some(t_min)
    }
}

/// A loaded, validated world.
#[derive(Debug, Clone)]
pub struct World {
    pub origin: GeoPoint,
    pub bounds_m: [f64; 4],
    pub cell_m: f64,
    nx: usize,
    ny: usize,
    /// Ground classes only (regions painted over the base class).
    ground_grid: Vec<u8>,
    /// Ground plus obstacle footprints; what a top-down observer sees.
    class_grid: Vec<u8>,
    pub(crate) boxes: Vec<ObstacleBox>,
    pub start: Pose,
    pub route: Route,
    route_local: Vec<(f64, f64)>,
}

/// Ground classes a route is allowed to traverse.
pub(crate) const TRAVERSABLE: [u8; 3] = [class::ROAD, class::SIDEWALK, class::TERRAIN];

impl World {
    pub fn load(path: &Path) -> Result<Self, WorldError> {
        let text = std::fs::read_to_string(path)?;
        let spec: WorldSpec = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_spec(spec, base)
    }

    pub fn from_spec(spec: WorldSpec, base_dir: &Path) -> Result<Self, WorldError> {
        let [x0, y0, x1, y1] = spec.bounds_m;
        let finite = spec.bounds_m.iter().all(|v| v.is_finite()) && spec.cell_m.is_finite();
        if !finite || x1 <= x0 || y1 <= y0 || spec.cell_m <= 0.0 {
            return Err(WorldError::Invalid(format!(
                "bad bounds {:?} or cell size {}",
                spec.bounds_m, spec.cell_m
            )));
        }
        if spec.ground_class as usize >= CLASS_COUNT {
            return Err(WorldError::Invalid(format!(
                "ground class {} outside palette",
                spec.ground_class
            )));
        }
        let nx = ((x1 - x0) / spec.cell_m).ceil() as usize;
        let ny = ((y1 - y0) / spec.cell_m).ceil() as usize;
        let mut ground_grid = vec![spec.ground_class; nx * ny];

        let paint = |grid: &mut Vec<u8>, rect: [f64; 4], class_id: u8| {
            let ix0 = (((rect[0] - x0) / spec.cell_m).floor().max(0.0)) as usize;
            let iy0 = (((rect[1] - y0) / spec.cell_m).floor().max(0.0)) as usize;
            let ix1 = ((((rect[2] - x0) / spec.cell_m).ceil()) as usize).min(nx);
            let iy1 = ((((rect[3] - y0) / spec.cell_m).ceil()) as usize).min(ny);
            for iy in iy0..iy1 {
                for ix in ix0..ix1 {
                    grid[iy * nx + ix] = class_id;
                }
            }
        };

        for region in &spec.regions {
            if region.class_id as usize >= CLASS_COUNT {
                return Err(WorldError::Invalid(format!(
                    "region class {} outside palette",
                    region.class_id
                )));
            }
            paint(&mut ground_grid, region.rect, region.class_id);
        }

        let mut boxes = Vec::new();
        for obstacle in &spec.obstacles {
            match obstacle {
                ObstacleSpec::Rect {
                    rect,
                    class_id,
                    height_m,
                } => boxes.push(ObstacleBox::from_rect(*rect, *class_id, *height_m)),
                ObstacleSpec::Polyline {
                    points,
                    width_m,
                    class_id,
                    height_m,
                } => {
                    if points.len() < 2 {
                        return Err(WorldError::Invalid(
                            "polyline obstacle needs at least 2 points".into(),
                        ));
                    }
                    for pair in points.windows(2) {
                        boxes.push(ObstacleBox::from_segment(
                            pair[0], pair[1], *width_m, *class_id, *height_m,
                        ));
                    }
                }
            }
        }
        for b in &boxes {
            if b.class_id as usize >= CLASS_COUNT {
                return Err(WorldError::Invalid(format!(
                    "obstacle class {} outside palette",
                    b.class_id
                )));
            }
            if !b.height_m.is_finite() || b.height_m <= 0.0 {
                return Err(WorldError::Invalid(
                    "obstacle height must be positive".into(),
                ));
            }
        }

        // Top-down view: obstacle footprints stamped over the ground.
        let mut class_grid = ground_grid.clone();
        for iy in 0..ny {
            for ix in 0..nx {
                let x = x0 + (ix as f64 + 0.5) * spec.cell_m;
                let y = y0 + (iy as f64 + 0.5) * spec.cell_m;
                let mut best: Option<(f64, u8)> = None;
                for b in &boxes {
                    if b.contains(x, y) && best.is_none_or(|(h, _)| b.height_m > h) {
                        best = Some((b.height_m, b.class_id));
                    }
                }
                if let Some((_, c)) = best {
                    class_grid[iy * nx + ix] = c;
                }
            }
        }

        let route = match (&spec.route_file, &spec.route_local) {
            (Some(file), _) => Route::from_json_file(&base_dir.join(file))?,
            (None, Some(points)) => {
                let geo = points
                    .iter()
                    .map(|&[x, y]| {
                        geodesy::offset_to_geo(spec.origin, LocalOffset { dx_m: x, dy_m: y })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Route::new(geo)?
            }
            (None, None) => {
                return Err(WorldError::Invalid(
                    "world needs route_file or route_local".into(),
                ))
            }
        };

        let start = Pose::new(
            geodesy::offset_to_geo(
                spec.origin,
                LocalOffset {
                    dx_m: spec.start.x_m,
                    dy_m: spec.start.y_m,
                },
            )?,
            spec.start.bearing_deg,
        );

        let mut world = Self {
            origin: spec.origin,
            bounds_m: spec.bounds_m,
            cell_m: spec.cell_m,
            nx,
            ny,
            ground_grid,
            class_grid,
            boxes,
            start,
            route: route.clone(),
            route_local: Vec::new(),
        };
        world.route_local = world.reference_polyline(&route)?;
        world.validate()?;
        Ok(world)
    }

    /// The reference path for off-route checks and supervisor corrections:
    /// the start position followed by every route point.
    fn reference_polyline(&self, route: &Route) -> Result<Vec<(f64, f64)>, GeodesyError> {
        let start = self.local_of(self.start.position)?;
        let mut polyline = vec![(start.dx_m, start.dy_m)];
        for &p in route.points() {
            let o = self.local_of(p)?;
            polyline.push((o.dx_m, o.dy_m));
        }
        Ok(polyline)
    }

    fn validate(&self) -> Result<(), WorldError> {
        for (i, &(x, y)) in self.route_local.iter().enumerate() {
            let c = self.class_at(x, y);
            if !TRAVERSABLE.contains(&c) {
                let what = if i == 0 {
                    "start position".to_string()
                } else {
                    format!("route point {}", i - 1)
                };
                return Err(WorldError::Invalid(format!(
                    "{what} at ({x:.1}, {y:.1}) lies on non-traversable class {c}"
                )));
            }
        }
        Ok(())
    }

    /// Replaces the route (e.g. a config override), revalidating
    /// traversability.
    pub fn set_route(&mut self, route: Route) -> Result<(), WorldError> {
        self.route_local = self.reference_polyline(&route)?;
        self.route = route;
        self.validate()
    }

    /// Local east/north meters of a geo point relative to the world origin.
    pub fn local_of(&self, point: GeoPoint) -> Result<LocalOffset, GeodesyError> {
        geodesy::geo_to_offset(self.origin, point)
    }

    pub fn geo_of(&self, x_m: f64, y_m: f64) -> Result<GeoPoint, GeodesyError> {
        geodesy::offset_to_geo(
            self.origin,
            LocalOffset {
                dx_m: x_m,
                dy_m: y_m,
            },
        )
    }

    fn cell_index(&self, x: f64, y: f64) -> Option<usize> {
        let [x0, y0, x1, y1] = self.bounds_m;
        if !(x0..x1).contains(&x) || !(y0..y1).contains(&y) {
            return None;
        }
        let ix = ((x - x0) / self.cell_m) as usize;
        let iy = ((y - y0) / self.cell_m) as usize;
        Some(iy.min(self.ny - 1) * self.nx + ix.min(self.nx - 1))
    }

    /// Top-down class at a local position: obstacles over ground, NONE
    /// outside the bounds.
    pub fn class_at(&self, x: f64, y: f64) -> u8 {
        self.cell_index(x, y)
            .map_or(class::NONE, |i| self.class_grid[i])
    }

    /// Ground class ignoring obstacles (what a ray hitting the ground sees).
    pub fn ground_class_at(&self, x: f64, y: f64) -> u8 {
        self.cell_index(x, y)
            .map_or(class::NONE, |i| self.ground_grid[i])
    }

    /// Distance from a local position to the nearest obstacle footprint;
    /// negative inside one, infinite in an obstacle-free world.
    pub fn obstacle_clearance(&self, x: f64, y: f64) -> f64 {
        self.boxes
            .iter()
            .map(|b| b.clearance(x, y))
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance from a local position to the route polyline.
    pub fn distance_to_route(&self, x: f64, y: f64) -> f64 {
        self.route_local
            .windows(2)
            .map(|seg| point_segment_distance((x, y), seg[0], seg[1]))
            .fold(f64::INFINITY, f64::min)
    }

    /// The point `lookahead_m` further along the route polyline than the
    /// projection of the given position, clamped to the route end.
    pub fn route_point_ahead(&self, x: f64, y: f64, lookahead_m: f64) -> (f64, f64) {
        // Arclength of the projection of (x, y) onto the polyline.
        let mut best = (f64::INFINITY, 0.0);
        let mut walked = 0.0;
        for seg in self.route_local.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let len = (b.0 - a.0).hypot(b.1 - a.1);
            let t = segment_projection((x, y), a, b);
            let px = a.0 + t * (b.0 - a.0);
            let py = a.1 + t * (b.1 - a.1);
            let d = (x - px).hypot(y - py);
            if d < best.0 {
                best = (d, walked + t * len);
            }
            walked += len;
        }
        let target = best.1 + lookahead_m;
        // Walk the polyline out to the target arclength.
        let mut remaining = target;
        for seg in self.route_local.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let len = (b.0 - a.0).hypot(b.1 - a.1);
            if remaining <= len || len < 1e-12 {
                let t = (remaining / len.max(1e-12)).clamp(0.0, 1.0);
                return (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1));
            }
            remaining -= len;
        }
        *self.route_local.last().unwrap()
    }
}

fn segment_projection(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len_sq = dx * dx + dy * dy;
    if len_sq < 1e-18 {
        return 0.0;
    }
    (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len_sq).clamp(0.0, 1.0)
}

fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let t = segment_projection(p, a, b);
    let (px, py) = (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1));
    (p.0 - px).hypot(p.1 - py)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn test_origin() -> GeoPoint {
        GeoPoint {
            lat_deg: 34.70,
            lon_deg: 137.41,
        }
    }

    fn basic_spec() -> WorldSpec {
        WorldSpec {
            origin: test_origin(),
            bounds_m: [-20.0, -10.0, 20.0, 120.0],
            cell_m: 0.25,
            ground_class: class::ROAD,
            regions: vec![],
            obstacles: vec![],
            start: StartSpec {
                x_m: 0.0,
                y_m: 0.0,
                bearing_deg: 0.0,
            },
            route_file: None,
            route_local: Some(vec![[0.0, 12.0], [0.0, 24.0], [0.0, 36.0]]),
        }
    }

    #[test]
    fn loads_a_minimal_world() {
        let world = World::from_spec(basic_spec(), Path::new(".")).unwrap();
        assert_eq!(world.class_at(0.0, 5.0), class::ROAD);
        assert_eq!(world.class_at(100.0, 5.0), class::NONE);
        assert_eq!(world.route.len(), 3);
        assert!(world.obstacle_clearance(0.0, 0.0).is_infinite());
    }

    #[test]
    fn regions_and_obstacles_paint_the_grid() {
        let mut spec = basic_spec();
        spec.regions.push(RegionSpec {
            rect: [-20.0, -10.0, -2.0, 120.0],
            class_id: class::TERRAIN,
        });
        spec.obstacles.push(ObstacleSpec::Rect {
            rect: [-1.0, 50.0, 1.0, 54.0],
            class_id: class::CAR,
            height_m: 1.5,
        });
        spec.route_local = Some(vec![[4.0, 12.0], [4.0, 24.0]]);
        let world = World::from_spec(spec, Path::new(".")).unwrap();
        assert_eq!(world.class_at(-10.0, 0.0), class::TERRAIN);
        assert_eq!(world.class_at(0.0, 52.0), class::CAR);
        assert_eq!(world.ground_class_at(0.0, 52.0), class::ROAD);
        assert!((world.obstacle_clearance(0.0, 49.0) - 1.0).abs() < 1e-9);
        assert!(world.obstacle_clearance(0.0, 52.0) < 0.0);
    }

    #[test]
    fn route_on_obstacle_is_rejected() {
        let mut spec = basic_spec();
        spec.obstacles.push(ObstacleSpec::Rect {
            rect: [-2.0, 10.0, 2.0, 14.0],
            class_id: class::CAR,
            height_m: 1.5,
        });
        let err = World::from_spec(spec, Path::new(".")).unwrap_err();
        assert!(matches!(err, WorldError::Invalid(_)), "{err}");
    }

    #[test]
    fn polyline_obstacle_acts_as_wall() {
        let mut spec = basic_spec();
        spec.obstacles.push(ObstacleSpec::Polyline {
            points: vec![[5.0, 0.0], [5.0, 100.0]],
            width_m: 0.4,
            class_id: class::WALL,
            height_m: 2.0,
        });
        let world = World::from_spec(spec, Path::new(".")).unwrap();
        assert_eq!(world.class_at(5.0, 50.0), class::WALL);
        assert!(world.obstacle_clearance(5.0, 50.0) < 0.0);
        assert!((world.obstacle_clearance(7.0, 50.0) - 1.8).abs() < 1e-9);
    }

    #[test]
    fn distance_to_route_polyline() {
        let world = World::from_spec(basic_spec(), Path::new(".")).unwrap();
        assert!((world.distance_to_route(3.0, 20.0) - 3.0).abs() < 1e-9);
        assert!((world.distance_to_route(0.0, 40.0) - 4.0).abs() < 1e-9);
    }

    #[test]
    fn route_point_ahead_walks_the_polyline() {
        let world = World::from_spec(basic_spec(), Path::new(".")).unwrap();
        let (x, y) = world.route_point_ahead(1.0, 14.0, 3.0);
        assert!((x - 0.0).abs() < 1e-9);
        assert!((y - 17.0).abs() < 1e-9);
        // Beyond the end it clamps to the last point.
        let (x, y) = world.route_point_ahead(0.0, 35.0, 50.0);
        assert!((x - 0.0).abs() < 1e-9);
        assert!((y - 36.0).abs() < 1e-9);
    }

    #[test]
    fn ray_hits_box_from_outside() {
        let b = ObstacleBox::from_rect([-1.0, 10.0, 1.0, 12.0], class::CAR, 1.5);
        // Looking straight down the y axis from the origin at 0.9 m height.
        let s = b.ray_hit([0.0, 0.0, 0.9], [0.0, 1.0, 0.0]).unwrap();
        assert!((s - 10.0).abs() < 1e-9);
        // A ray above the box misses it.
        assert!(b.ray_hit([0.0, 0.0, 2.0], [0.0, 1.0, 0.0]).is_none());
        // A descending ray clips the top surface.
        let s = b.ray_hit([0.0, 0.0, 3.0], [0.0, 1.0, -0.14]).unwrap();
        assert!(s > 10.0 && s < 12.01, "s={s}");
    }

    #[test]
    fn world_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("world.json");
        std::fs::write(&path, serde_json::to_string_pretty(&basic_spec()).unwrap()).unwrap();
        let world = World::load(&path).unwrap();
        assert_eq!(world.route.len(), 3);
    }
}
