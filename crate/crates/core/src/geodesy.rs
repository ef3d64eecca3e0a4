//! Global-to-local geodesy.
//!
//! Positions are WGS-84 style latitude/longitude in decimal degrees. Local
//! offsets are computed on a sphere parameterized by the earth's equatorial
//! and meridional circumferences: one degree of longitude spans
//! `C_e * cos(lat) / 360` meters and one degree of latitude spans `C_m / 360`
//! meters. Bearings are compass bearings, degrees clockwise from true north,
//! normalized to `[0, 360)`.
//!
//! The vehicle frame is x-right / y-forward: a target straight ahead of the
//! vehicle maps to `(0, +d)`.
//!
//! All operations are pure functions on immutable values.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Equatorial circumference of the earth, meters.
pub const EQUATORIAL_CIRCUMFERENCE_M: f64 = 40_075_000.0;
/// Meridional circumference of the earth, meters.
pub const MERIDIONAL_CIRCUMFERENCE_M: f64 = 40_008_000.0;
/// Latitudes at or beyond this magnitude are rejected: the cos(lat) scaling
/// degenerates and the experiment areas are nowhere near the poles.
pub const POLAR_LAT_LIMIT_DEG: f64 = 89.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeodesyError {
    #[error("latitude {0}° is inside the polar region (|lat| >= {POLAR_LAT_LIMIT_DEG}°)")]
    PolarRegion(f64),
    #[error("longitude difference {0}° crosses the antimeridian (no wraparound support)")]
    Antimeridian(f64),
    #[error("coordinate out of range: lat {lat_deg}°, lon {lon_deg}°")]
    OutOfRange { lat_deg: f64, lon_deg: f64 },
    #[error("non-finite coordinate")]
    NonFinite,
}

/// A global position in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat_deg: f64,
    pub lon_deg: f64,
}

impl GeoPoint {
    pub fn new(lat_deg: f64, lon_deg: f64) -> Result<Self, GeodesyError> {
        if !lat_deg.is_finite() || !lon_deg.is_finite() {
            return Err(GeodesyError::NonFinite);
        }
        if !(-90.0..=90.0).contains(&lat_deg) || !(-180.0..=180.0).contains(&lon_deg) {
            return Err(GeodesyError::OutOfRange { lat_deg, lon_deg });
        }
        Ok(Self { lat_deg, lon_deg })
    }

    pub fn is_valid(&self) -> bool {
        GeoPoint::new(self.lat_deg, self.lon_deg).is_ok()
    }
}

/// Global position plus compass bearing (degrees clockwise from true north).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: GeoPoint,
    pub bearing_deg: f64,
}

impl Pose {
    /// Builds a pose, normalizing the bearing into `[0, 360)`.
    pub fn new(position: GeoPoint, bearing_deg: f64) -> Self {
        Self {
            position,
            bearing_deg: normalize_bearing_deg(bearing_deg),
        }
    }
}

/// East/north displacement in meters between two global positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalOffset {
    /// Meters east.
    pub dx_m: f64,
    /// Meters north.
    pub dy_m: f64,
}

impl LocalOffset {
    pub fn norm_m(&self) -> f64 {
        self.dx_m.hypot(self.dy_m)
    }
}

/// A point in the vehicle frame: x positive to the right, y positive forward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalPoint {
    pub x_m: f64,
    pub y_m: f64,
}

impl LocalPoint {
    pub fn new(x_m: f64, y_m: f64) -> Self {
        Self { x_m, y_m }
    }

    pub fn norm_m(&self) -> f64 {
        self.x_m.hypot(self.y_m)
    }

    pub fn distance_m(&self, other: &LocalPoint) -> f64 {
        (self.x_m - other.x_m).hypot(self.y_m - other.y_m)
    }
}

/// Normalizes an angle in degrees into `[0, 360)`.
pub fn normalize_bearing_deg(deg: f64) -> f64 {
    let n = deg.rem_euclid(360.0);
    // rem_euclid can return 360.0 when deg is a tiny negative number.
    if n >= 360.0 {
        0.0
    } else {
        n
    }
}

fn check_point(p: &GeoPoint) -> Result<(), GeodesyError> {
    if !p.lat_deg.is_finite() || !p.lon_deg.is_finite() {
        return Err(GeodesyError::NonFinite);
    }
    if p.lat_deg.abs() >= POLAR_LAT_LIMIT_DEG {
        return Err(GeodesyError::PolarRegion(p.lat_deg));
    }
    Ok(())
}

/// East/north meters from `origin` to `target`.
///
/// One degree of longitude is scaled by the cosine of the origin latitude
/// (converted to radians before the cosine). Longitude differences beyond
/// 180° are rejected rather than wrapped.
pub fn geo_to_offset(origin: GeoPoint, target: GeoPoint) -> Result<LocalOffset, GeodesyError> {
    check_point(&origin)?;
    check_point(&target)?;
    let dlon_deg = target.lon_deg - origin.lon_deg;
    if dlon_deg.abs() > 180.0 {
        return Err(GeodesyError::Antimeridian(dlon_deg));
    }
    let dlat_deg = target.lat_deg - origin.lat_deg;
    let east_scale = EQUATORIAL_CIRCUMFERENCE_M * origin.lat_deg.to_radians().cos() / 360.0;
    let north_scale = MERIDIONAL_CIRCUMFERENCE_M / 360.0;
    Ok(LocalOffset {
        dx_m: dlon_deg * east_scale,
        dy_m: dlat_deg * north_scale,
    })
}

/// Inverse of [`geo_to_offset`]: displaces `origin` by east/north meters.
pub fn offset_to_geo(origin: GeoPoint, offset: LocalOffset) -> Result<GeoPoint, GeodesyError> {
    check_point(&origin)?;
    if !offset.dx_m.is_finite() || !offset.dy_m.is_finite() {
        return Err(GeodesyError::NonFinite);
    }
    let east_scale = EQUATORIAL_CIRCUMFERENCE_M * origin.lat_deg.to_radians().cos() / 360.0;
    let north_scale = MERIDIONAL_CIRCUMFERENCE_M / 360.0;
    Ok(GeoPoint {
        lat_deg: origin.lat_deg + offset.dy_m / north_scale,
        lon_deg: origin.lon_deg + offset.dx_m / east_scale,
    })
}

/// Rotates an east/north offset into the x-right / y-forward vehicle frame.
///
/// The bearing is the compass heading of the vehicle's forward axis, so a
/// target due ahead lands on `(0, +d)` and a target to the east of a
/// north-facing vehicle lands on `(+d, 0)`.
pub fn offset_to_vehicle_frame(offset: LocalOffset, bearing_deg: f64) -> LocalPoint {
    let (sin_b, cos_b) = bearing_deg.to_radians().sin_cos();
    LocalPoint {
        x_m: cos_b * offset.dx_m - sin_b * offset.dy_m,
        y_m: sin_b * offset.dx_m + cos_b * offset.dy_m,
    }
}

/// Inverse of [`offset_to_vehicle_frame`]: vehicle-frame point back to an
/// east/north offset.
pub fn vehicle_frame_to_offset(point: LocalPoint, bearing_deg: f64) -> LocalOffset {
    let (sin_b, cos_b) = bearing_deg.to_radians().sin_cos();
    LocalOffset {
        dx_m: cos_b * point.x_m + sin_b * point.y_m,
        dy_m: -sin_b * point.x_m + cos_b * point.y_m,
    }
}

/// Full global-to-local transform: a route point into the vehicle frame of
/// `pose`.
pub fn route_point_to_local(pose: &Pose, rp: GeoPoint) -> Result<LocalPoint, GeodesyError> {
    let offset = geo_to_offset(pose.position, rp)?;
    Ok(offset_to_vehicle_frame(offset, pose.bearing_deg))
}
