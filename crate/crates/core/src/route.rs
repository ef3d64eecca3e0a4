//! Route management: the ordered point list, the two-point lookahead window,
//! the 4 m switching rule, and turn-command derivation.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesy::{self, GeoPoint, GeodesyError, LocalPoint, Pose};

/// A route point is considered reached within this radius, meters.
pub const SWITCH_RADIUS_M: f64 = 4.0;
/// Nominal spacing between consecutive route points, meters.
pub const NOMINAL_SPACING_M: f64 = 12.0;
/// Spacing outside this band produces a warning.
pub const SPACING_WARN_MIN_M: f64 = 6.0;
pub const SPACING_WARN_MAX_M: f64 = 20.0;

/// Window thresholds for the turn-command rule, meters.
pub const NEAR_TURN_THRESHOLD_M: f64 = 4.0;
pub const FAR_TURN_THRESHOLD_M: f64 = 8.0;

#[derive(Debug, Error)]
pub enum RouteError {
    #[error("a route needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error(transparent)]
    Geodesy(#[from] GeodesyError),
    #[error("failed to read route file: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse route file: {0}")]
    Parse(#[from] serde_json::Error),
}

/// High-level command derived from the lookahead window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NavCommand {
    TurnLeft,
    TurnRight,
    GoStraight,
}

/// The two upcoming route points in the vehicle frame. At the route end the
/// last point is duplicated so the window stays defined through the finish.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteWindow {
    pub rp1: LocalPoint,
    pub rp2: LocalPoint,
}

/// Ordered list of route points, nominally 12 m apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    points: Vec<GeoPoint>,
}

impl Route {
    pub fn new(points: Vec<GeoPoint>) -> Result<Self, RouteError> {
        if points.len() < 2 {
            return Err(RouteError::TooFewPoints(points.len()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[GeoPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Consecutive spacings outside the warn band, as printable messages.
    pub fn spacing_warnings(&self) -> Vec<String> {
        let mut warnings = Vec::new();
        for (i, pair) in self.points.windows(2).enumerate() {
            match geodesy::geo_to_offset(pair[0], pair[1]) {
                Ok(off) => {
                    let d = off.norm_m();
                    if !(SPACING_WARN_MIN_M..=SPACING_WARN_MAX_M).contains(&d) {
                        warnings.push(format!(
                            "route spacing {d:.2} m between points {i} and {} is outside \
                             [{SPACING_WARN_MIN_M}, {SPACING_WARN_MAX_M}] m",
                            i + 1
                        ));
                    }
                }
                Err(e) => warnings.push(format!(
                    "route spacing between points {i} and {} not computable: {e}",
                    i + 1
                )),
            }
        }
        warnings
    }

    /// Reads a route from a JSON array of `{lat_deg, lon_deg}` objects.
    pub fn from_json_file(path: &Path) -> Result<Self, RouteError> {
        let text = std::fs::read_to_string(path)?;
        let points: Vec<GeoPoint> = serde_json::from_str(&text)?;
        Self::new(points)
    }

    /// Writes the route as JSON with at least 7 fractional digits per degree.
    pub fn to_json_file(&self, path: &Path) -> Result<(), RouteError> {
        let mut out = String::from("[\n");
        for (i, p) in self.points.iter().enumerate() {
            out.push_str(&format!(
                "  {{\"lat_deg\": {:.8}, \"lon_deg\": {:.8}}}{}\n",
                p.lat_deg,
                p.lon_deg,
                if i + 1 < self.points.len() { "," } else { "" }
            ));
        }
        out.push_str("]\n");
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Progress along a route. Updated functionally: `advance` returns the next
/// tracker value rather than mutating in place.
#[derive(Debug, Clone, Copy)]
pub struct RouteTracker<'a> {
    route: &'a Route,
    current_index: usize,
    switch_radius_m: f64,
}

impl<'a> RouteTracker<'a> {
    pub fn new(route: &'a Route) -> Self {
        Self {
            route,
            current_index: 0,
            switch_radius_m: SWITCH_RADIUS_M,
        }
    }

    /// A tracker resumed at a saved index (clamped to the route end), for
    /// callers that persist progress outside the borrow.
    pub fn resume(route: &'a Route, current_index: usize) -> Self {
        Self {
            route,
            current_index: current_index.min(route.len() - 1),
            switch_radius_m: SWITCH_RADIUS_M,
        }
    }

    pub fn current_index(&self) -> usize {
        self.current_index
    }

    fn distance_to(&self, pose: &Pose, index: usize) -> Result<f64, GeodesyError> {
        Ok(geodesy::geo_to_offset(pose.position, self.route.points[index])?.norm_m())
    }

    /// Switches past every route point within the switch radius (several per
    /// tick, so the tracker is not stranded by a teleport correction) and
    /// reports whether the final point has been reached.
    pub fn advance(&self, pose: &Pose) -> Result<(Self, bool), GeodesyError> {
        let last = self.route.len() - 1;
        let mut index = self.current_index;
        loop {
            let d = self.distance_to(pose, index)?;
            if d >= self.switch_radius_m {
                return Ok((
                    Self {
                        current_index: index,
                        ..*self
                    },
                    false,
                ));
            }
            if index == last {
                return Ok((
                    Self {
                        current_index: index,
                        ..*self
                    },
                    true,
                ));
            }
            index += 1;
        }
    }

    /// The current and next route points in the vehicle frame; at the route
    /// end the last point fills both slots.
    pub fn window(&self, pose: &Pose) -> Result<RouteWindow, GeodesyError> {
        let next = (self.current_index + 1).min(self.route.len() - 1);
        Ok(RouteWindow {
            rp1: geodesy::route_point_to_local(pose, self.route.points[self.current_index])?,
            rp2: geodesy::route_point_to_local(pose, self.route.points[next])?,
        })
    }
}

/// Turn command from the window, evaluated left branch first.
pub fn command(window: &RouteWindow) -> NavCommand {
    if window.rp1.x_m <= -NEAR_TURN_THRESHOLD_M || window.rp2.x_m <= -FAR_TURN_THRESHOLD_M {
        NavCommand::TurnLeft
    } else if window.rp1.x_m >= NEAR_TURN_THRESHOLD_M || window.rp2.x_m >= FAR_TURN_THRESHOLD_M {
        NavCommand::TurnRight
    } else {
        NavCommand::GoStraight
    }
}
