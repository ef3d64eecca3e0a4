//! Run configuration: everything an episode needs, loaded from JSON. A copy
//! is written into each run directory and echoed in the record header so a
//! run can be reproduced bit-exactly from its outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bev::{BevError, CameraIntrinsics};
use crate::controller::{
    default_lateral_gains, default_longitudinal_gains, ControllerError, PidGains,
    AGENT_ACTIVE_THRESHOLD, DEFAULT_INTEGRAL_BOUND, DESIRED_SPEED_GAIN,
};
use crate::geodesy::GeodesyError;
use crate::metrics::MetricsError;
use crate::predictor::{PredictorError, PurePursuitConfig};
use crate::record::RecordError;
use crate::route::RouteError;
use crate::sim::{SensorNoise, SupervisorConfig, VehicleParams, WorldError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error(transparent)]
    Geodesy(#[from] GeodesyError),
    #[error(transparent)]
    Bev(#[from] BevError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// 2 for configuration problems, 3 for runtime episode failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::World(_) | HarnessError::Route(_) => 2,
            _ => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorChoice {
    #[default]
    Oracle,
    Playback,
    ExternalStream,
}

impl std::str::FromStr for PredictorChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(Self::Oracle),
            "playback" => Ok(Self::Playback),
            "external-stream" => Ok(Self::ExternalStream),
            other => Err(format!(
                "unknown predictor {other:?} (expected oracle, playback, or external-stream)"
            )),
        }
    }
}

/// Where the per-tick BEV grid comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BevSource {
    /// Render depth + segmentation from the camera and back-project (the
    /// full pipeline).
    Camera,
    /// Sample the world's top-down class grid directly (fast).
    #[default]
    Topdown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerConfig {
    pub lateral: PidGains,
    pub longitudinal: PidGains,
    pub integral_bound: f64,
    /// Minimum |steering| / throttle for an agent to count as active.
    pub agent_threshold: f64,
    /// Gain on the waypoint spread when deriving desired speed.
    pub speed_gain: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            lateral: default_lateral_gains(),
            longitudinal: default_longitudinal_gains(),
            integral_bound: DEFAULT_INTEGRAL_BOUND,
            agent_threshold: AGENT_ACTIVE_THRESHOLD,
            speed_gain: DESIRED_SPEED_GAIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// World file path, resolved relative to the config file's directory.
    pub world: PathBuf,
    /// Optional route override; otherwise the world's route is used.
    pub route: Option<PathBuf>,
    pub predictor: PredictorChoice,
    /// Record replayed when `predictor` is `playback`.
    pub playback_record: Option<PathBuf>,
    /// Command line spawned when `predictor` is `external-stream`.
    pub external_cmd: Vec<String>,
    /// Mandatory; every run is seeded.
    pub seed: Option<u64>,
    pub noise: SensorNoise,
    pub controller: ControllerConfig,
    /// `[alpha0..alpha3]`; the last three derive the fusion weights.
    pub alphas: [f64; 4],
    pub speed_target_mps: f64,
    pub episode_limit_ticks: u64,
    pub bev_source: BevSource,
    pub intrinsics: CameraIntrinsics,
    pub vehicle: VehicleParams,
    pub supervisor: SupervisorConfig,
    pub oracle: PurePursuitConfig,
    /// Write per-tick depth/seg rasters next to the record.
    pub save_rasters: bool,
    /// Episode output directory.
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            world: PathBuf::from("world.json"),
            route: None,
            predictor: PredictorChoice::Oracle,
            playback_record: None,
            external_cmd: Vec::new(),
            seed: None,
            noise: SensorNoise::default(),
            controller: ControllerConfig::default(),
            alphas: [1.0; 4],
            speed_target_mps: 1.25,
            episode_limit_ticks: 2000,
            bev_source: BevSource::default(),
            intrinsics: CameraIntrinsics::default(),
            vehicle: VehicleParams::default(),
            supervisor: SupervisorConfig::default(),
            oracle: PurePursuitConfig::default(),
            save_rasters: false,
            out_dir: PathBuf::from("runs/episode"),
        }
    }
}

impl RunConfig {
    /// Loads a config and resolves its relative paths against the config
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("cannot parse {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        config.world = resolve(base, &config.world);
        config.route = config.route.as_ref().map(|p| resolve(base, p));
        config.playback_record = config.playback_record.as_ref().map(|p| resolve(base, p));
        config.out_dir = resolve(base, &config.out_dir);
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.seed.is_none() {
            return Err(HarnessError::Config("seed is mandatory".into()));
        }
        if !self.world.exists() {
            return Err(HarnessError::Config(format!(
                "world file {} does not exist",
                self.world.display()
            )));
        }
        if let Some(route) = &self.route {
            if !route.exists() {
                return Err(HarnessError::Config(format!(
                    "route file {} does not exist",
                    route.display()
                )));
            }
        }
        match self.predictor {
            PredictorChoice::Playback => {
                let record = self.playback_record.as_ref().ok_or_else(|| {
                    HarnessError::Config("playback predictor needs playback_record".into())
                })?;
                if !record.exists() {
                    return Err(HarnessError::Config(format!(
                        "playback record {} does not exist",
                        record.display()
                    )));
                }
            }
            PredictorChoice::ExternalStream => {
                if self.external_cmd.is_empty() {
                    return Err(HarnessError::Config(
                        "external-stream predictor needs external_cmd".into(),
                    ));
                }
            }
            PredictorChoice::Oracle => {}
        }
        if !self.speed_target_mps.is_finite() || self.speed_target_mps <= 0.0 {
            return Err(HarnessError::Config(format!(
                "speed_target_mps must be positive, got {}",
                self.speed_target_mps
            )));
        }
        if self.episode_limit_ticks == 0 {
            return Err(HarnessError::Config(
                "episode_limit_ticks must be > 0".into(),
            ));
        }
        for a in self.alphas {
            if !a.is_finite() || a <= 0.0 {
                return Err(HarnessError::Config(format!(
                    "alphas must be positive, got {a}"
                )));
            }
        }
        self.intrinsics
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(())
    }
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}
