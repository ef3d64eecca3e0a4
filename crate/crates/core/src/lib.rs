//! Route-following navigation and control stack with a closed-loop simulator.
//!
//! The crate is organized around the path an observation takes through the
//! system:
//!
//! - [`geodesy`] converts global GNSS fixes and a compass bearing into the
//!   vehicle's local right/forward frame.
//! - [`route`] tracks progress along an ordered list of route points, exposes
//!   the two-point lookahead window, and derives turn commands from it.
//! - [`bev`] back-projects depth rasters into point clouds and builds the
//!   top-view semantic grid used for obstacle reasoning.
//! - [`predictor`] produces the three future waypoints and a direct control
//!   estimate, either from a built-in obstacle-avoiding oracle, from a
//!   recorded trajectory, or from an external process over a line-delimited
//!   JSON protocol.
//! - [`controller`] turns waypoints into steering/throttle through a pair of
//!   PID controllers and fuses them with the direct estimate.
//! - [`sim`] is the differential-drive vehicle, the synthetic world and
//!   sensor models, and the automatic supervisor that intervenes before
//!   collisions.
//! - [`metrics`] holds the loss/score functions and drivability statistics.
//! - [`record`] and [`harness`] tie everything into reproducible episodes
//!   with JSON Lines driving records.

pub mod bev;
pub mod controller;
pub mod geodesy;
pub mod harness;
pub mod metrics;
pub mod predictor;
pub mod record;
pub mod route;
pub mod sim;
