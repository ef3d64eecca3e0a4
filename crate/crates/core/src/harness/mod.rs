//! Episode runner, run configuration, and record evaluation: the glue that
//! ties the stack into reproducible experiments.

mod config;
mod episode;
mod evaluate;

pub use config::{BevSource, ControllerConfig, HarnessError, PredictorChoice, RunConfig};
pub use episode::{run_episode, EpisodeResult};
pub use evaluate::{evaluate_records, write_report_csv};
