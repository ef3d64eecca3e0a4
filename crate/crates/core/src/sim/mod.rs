//! Closed-loop differential-drive vehicle simulation: kinematics, the
//! synthetic world, sensor rendering with noise injection, and the
//! automatic supervisor that replaces a human safety driver.

mod intervention;
mod sense;
mod vehicle;
mod world;

pub use intervention::{InterventionCause, InterventionEvent, Supervisor, SupervisorConfig};
pub use sense::{render_depth_seg, sense, topdown_bev, Sensed, SensorNoise};
pub use vehicle::{step, wheel_speeds, VehicleParams, VehicleState};
pub use world::{ObstacleSpec, RegionSpec, StartSpec, World, WorldError, WorldSpec};
