//! Line-delimited JSON predictor protocol over standard streams.
//!
//! One request object per tick goes to the external process's stdin; one
//! response object with waypoints and control comes back per line. The BEV
//! grid travels base64-encoded so a learned model can be plugged in without
//! recompiling this crate.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, Command, Stdio};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::bev::{BevGrid, BEV_CELL_M, BEV_COLS, BEV_ROWS};
use crate::controller::{Control, Waypoints};
use crate::geodesy::LocalPoint;
use crate::predictor::{ObservationBundle, PredictionOutput, PredictorError};

#[derive(Debug, Serialize, Deserialize)]
pub struct BevPayload {
    pub rows: usize,
    pub cols: usize,
    pub cell_m: f64,
    /// Row-major class ids, base64.
    pub classes_b64: String,
}

impl BevPayload {
    pub fn encode(grid: &BevGrid) -> Self {
        Self {
            rows: BEV_ROWS,
            cols: BEV_COLS,
            cell_m: BEV_CELL_M,
            classes_b64: BASE64.encode(&grid.data),
        }
    }
}

/// One request line.
#[derive(Debug, Serialize, Deserialize)]
pub struct StreamRequest {
    pub t: u64,
    pub speed_target_mps: f64,
    pub rp1: [f64; 2],
    pub rp2: [f64; 2],
    pub omega_l: f64,
    pub omega_r: f64,
    pub wheel_radius_m: f64,
    pub bev: BevPayload,
}

/// One response line.
#[derive(Debug, Serialize, Deserialize)]
pub struct StreamResponse {
    pub waypoints: [[f64; 2]; 3],
    pub steering: f64,
    pub throttle: f64,
}

impl From<StreamResponse> for PredictionOutput {
    fn from(r: StreamResponse) -> Self {
        let wp = |i: usize| LocalPoint::new(r.waypoints[i][0], r.waypoints[i][1]);
        PredictionOutput {
            waypoints: Waypoints::new(wp(0), wp(1), wp(2)),
            control: Control::new(r.steering, r.throttle),
        }
    }
}

/// Request/response predictor over any pair of byte streams.
pub struct StreamPredictor<R: BufRead, W: Write> {
    reader: R,
    writer: W,
}

impl<R: BufRead, W: Write> StreamPredictor<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        Self { reader, writer }
    }

    pub fn predict(
        &mut self,
        obs: &ObservationBundle,
        tick: u64,
        speed_target_mps: f64,
    ) -> Result<PredictionOutput, PredictorError> {
        let request = StreamRequest {
            t: tick,
            speed_target_mps,
            rp1: [obs.window.rp1.x_m, obs.window.rp1.y_m],
            rp2: [obs.window.rp2.x_m, obs.window.rp2.y_m],
            omega_l: obs.wheels.omega_l,
            omega_r: obs.wheels.omega_r,
            wheel_radius_m: obs.wheels.wheel_radius_m,
            bev: BevPayload::encode(&obs.bev),
        };
        serde_json::to_writer(&mut self.writer, &request)?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        let mut line = String::new();
        if self.reader.read_line(&mut line)? == 0 {
            return Err(PredictorError::StreamClosed);
        }
        let response: StreamResponse = serde_json::from_str(&line)?;
        Ok(response.into())
    }
}

/// A spawned external predictor process; the child is killed on drop.
pub struct ProcessPredictor {
    child: Child,
    inner: StreamPredictor<BufReader<std::process::ChildStdout>, std::process::ChildStdin>,
}

impl ProcessPredictor {
    /// Spawns `argv[0]` with the remaining arguments, wiring its standard
    /// streams to the protocol.
    pub fn spawn(argv: &[String]) -> Result<Self, PredictorError> {
        let (program, args) = argv.split_first().ok_or(PredictorError::StreamClosed)?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        let stdin = child.stdin.take().ok_or(PredictorError::StreamClosed)?;
        let stdout = child.stdout.take().ok_or(PredictorError::StreamClosed)?;
        Ok(Self {
            child,
            inner: StreamPredictor::new(BufReader::new(stdout), stdin),
        })
    }

    pub fn predict(
        &mut self,
        obs: &ObservationBundle,
        tick: u64,
        speed_target_mps: f64,
    ) -> Result<PredictionOutput, PredictorError> {
        self.inner.predict(obs, tick, speed_target_mps)
    }
}

impl Drop for ProcessPredictor {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
