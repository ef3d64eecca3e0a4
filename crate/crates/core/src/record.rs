//! The JSON Lines driving record: a header line with the full run
//! configuration, then one observation line per 4 Hz tick.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesy::GeoPoint;
use crate::harness::RunConfig;
use crate::route::NavCommand;
use crate::sim::InterventionCause;

pub const RECORD_SCHEMA: &str = "navstack-record/1";

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("record i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad record line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("missing header line")]
    MissingHeader,
    #[error("record is empty")]
    Empty,
}

/// First line of every record: enough to reproduce the run bit-exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordHeader {
    pub schema: String,
    pub seed: u64,
    pub config: RunConfig,
}

/// The route window as logged per tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RpWindowRecord {
    pub index: usize,
    pub rp1: [f64; 2],
    pub rp2: [f64; 2],
    pub command: NavCommand,
}

/// One observation set at one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub t: u64,
    pub gnss: GeoPoint,
    pub bearing_deg: f64,
    pub omega_l: f64,
    pub omega_r: f64,
    /// Applied steering after fusion and any supervisor override.
    pub steering: f64,
    pub throttle: f64,
    pub rp_window: RpWindowRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seg_path: Option<String>,
    pub waypoints_pred: [[f64; 2]; 3],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub waypoints_gt: Option<[[f64; 2]; 3]>,
    pub intervention_flag: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intervention_cause: Option<InterventionCause>,
}

pub fn write_record(
    path: &Path,
    header: &RecordHeader,
    ticks: &[TickRecord],
) -> Result<(), RecordError> {
    let file = std::fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer(&mut out, header)
        .map_err(|e| RecordError::Parse { line: 0, source: e })?;
    out.write_all(b"\n")?;
    for (i, tick) in ticks.iter().enumerate() {
        serde_json::to_writer(&mut out, tick).map_err(|e| RecordError::Parse {
            line: i + 1,
            source: e,
        })?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_record(path: &Path) -> Result<(RecordHeader, Vec<TickRecord>), RecordError> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut lines = reader.lines();
    let header_line = lines.next().ok_or(RecordError::Empty)??;
    let header: RecordHeader =
        serde_json::from_str(&header_line).map_err(|_| RecordError::MissingHeader)?;
    let mut ticks = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let tick: TickRecord = serde_json::from_str(&line).map_err(|e| RecordError::Parse {
            line: i + 2,
            source: e,
        })?;
        ticks.push(tick);
    }
    Ok((header, ticks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::RunConfig;

    fn sample_tick(t: u64) -> TickRecord {
        TickRecord {
            t,
            gnss: GeoPoint {
                lat_deg: 34.7,
                lon_deg: 137.41,
            },
            bearing_deg: 12.5,
            omega_l: 8.0,
            omega_r: 8.2,
            steering: 0.05,
            throttle: 0.6,
            rp_window: RpWindowRecord {
                index: 1,
                rp1: [0.5, 11.0],
                rp2: [0.5, 23.0],
                command: NavCommand::GoStraight,
            },
            depth_path: None,
            seg_path: None,
            waypoints_pred: [[0.0, 1.25], [0.0, 2.5], [0.0, 3.75]],
            waypoints_gt: None,
            intervention_flag: false,
            intervention_cause: None,
        }
    }

    #[test]
    fn record_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.jsonl");
        let header = RecordHeader {
            schema: RECORD_SCHEMA.to_string(),
            seed: 99,
            config: RunConfig::default(),
        };
        let ticks = vec![sample_tick(0), sample_tick(1)];
        write_record(&path, &header, &ticks).unwrap();
        let (h, loaded) = read_record(&path).unwrap();
        assert_eq!(h.seed, 99);
        assert_eq!(h.schema, RECORD_SCHEMA);
        assert_eq!(loaded, ticks);
        // One JSON object per line, header first.
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().next().unwrap().contains("\"schema\""));
    }

    #[test]
    fn tickless_file_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        let header = RecordHeader {
            schema: RECORD_SCHEMA.to_string(),
            seed: 1,
            config: RunConfig::default(),
        };
        write_record(&path, &header, &[]).unwrap();
        let (_, ticks) = read_record(&path).unwrap();
        assert!(ticks.is_empty());
    }

    #[test]
    fn garbage_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.jsonl");
        std::fs::write(&path, "not json\n").unwrap();
        assert!(read_record(&path).is_err());
    }
}
