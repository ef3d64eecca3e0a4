//! Offline scoring of driving records: waypoint/steering/throttle L1 errors,
//! segmentation IoU when rasters are available, the combined total metric,
//! and intervention statistics, averaged across runs.

use std::path::{Path, PathBuf};

use crate::bev::{SegMap, CLASS_COUNT};
use crate::harness::config::HarnessError;
use crate::metrics::{
    drivability, mae, total_metric, MeanStd, MetricsError, RunScore, ScoreReport,
};
use crate::predictor::playback_predict;
use crate::record::{read_record, TickRecord};
use crate::sim::{InterventionCause, InterventionEvent};

const IOU_AVERAGING: &str = "macro over classes present, counts accumulated across ticks";

/// Scores prediction records against truth records (same tick alignment).
/// With `truth_paths` absent each record is scored against itself: control
/// errors vanish and the waypoint error measures the predictor against the
/// trajectory actually driven.
pub fn evaluate_records(
    record_paths: &[PathBuf],
    truth_paths: Option<&[PathBuf]>,
) -> Result<ScoreReport, HarnessError> {
    if record_paths.is_empty() {
        return Err(HarnessError::Config("no records to evaluate".into()));
    }
    if let Some(truths) = truth_paths {
        if truths.len() != record_paths.len() {
            return Err(HarnessError::Config(format!(
                "{} records but {} truth records",
                record_paths.len(),
                truths.len()
            )));
        }
    }

    let mut runs = Vec::new();
    let mut events_per_run: Vec<Vec<InterventionEvent>> = Vec::new();
    let mut dt_s = 0.25;
    for (i, record_path) in record_paths.iter().enumerate() {
        let truth_path = truth_paths.map_or(record_path, |t| &t[i]);
        let (header, pred_ticks) = read_record(record_path)?;
        let (truth_header, truth_ticks) = if truth_path == record_path {
            (None, None)
        } else {
            let (h, t) = read_record(truth_path)?;
            (Some(h), Some(t))
        };
        let truth_ticks = truth_ticks.as_ref().unwrap_or(&pred_ticks);
        dt_s = truth_header
            .as_ref()
            .map_or(header.config.vehicle.dt_s, |h| h.config.vehicle.dt_s);

        let run = score_run(
            record_path,
            truth_path,
            &pred_ticks,
            truth_ticks,
            header.config.vehicle.dt_s,
        )?;
        events_per_run.push(events_from_flags(&pred_ticks));
        runs.push(run);
    }

    let aggregate = |values: Vec<f64>| MeanStd::of(&values);
    let maybe_aggregate = |values: Vec<Option<f64>>| -> Result<Option<MeanStd>, MetricsError> {
        let present: Vec<f64> = values.iter().filter_map(|v| *v).collect();
        if present.len() == values.len() {
            Ok(Some(MeanStd::of(&present)?))
        } else {
            Ok(None)
        }
    };

    Ok(ScoreReport {
        iou_averaging: IOU_AVERAGING.to_string(),
        iou_seg: maybe_aggregate(runs.iter().map(|r| r.iou_seg).collect())?,
        mae_wp: maybe_aggregate(runs.iter().map(|r| r.mae_wp).collect())?,
        mae_st: aggregate(runs.iter().map(|r| r.mae_st).collect())?,
        mae_th: aggregate(runs.iter().map(|r| r.mae_th).collect())?,
        total_metric: maybe_aggregate(runs.iter().map(|r| r.total_metric).collect())?,
        drivability: drivability(&events_per_run, dt_s)?,
        runs,
    })
}

fn score_run(
    record_path: &Path,
    truth_path: &Path,
    pred_ticks: &[TickRecord],
    truth_ticks: &[TickRecord],
    dt_s: f64,
) -> Result<RunScore, HarnessError> {
    let aligned = pred_ticks.len().min(truth_ticks.len());
    let mut st_pred = Vec::with_capacity(aligned);
    let mut st_truth = Vec::with_capacity(aligned);
    let mut th_pred = Vec::with_capacity(aligned);
    let mut th_truth = Vec::with_capacity(aligned);
    let mut wp_pred: Vec<f64> = Vec::new();
    let mut wp_truth: Vec<f64> = Vec::new();
    let mut inter = [0u64; CLASS_COUNT];
    let mut union = [0u64; CLASS_COUNT];
    let mut scored_rasters = false;

    for i in 0..aligned {
        let p = &pred_ticks[i];
        let t = &truth_ticks[i];
        st_pred.push(p.steering);
        st_truth.push(t.steering);
        th_pred.push(p.throttle);
        th_truth.push(t.throttle);

        let gt = t.waypoints_gt.or_else(|| {
            playback_predict(truth_ticks, i).ok().map(|wp| {
                [
                    [wp.wp1.x_m, wp.wp1.y_m],
                    [wp.wp2.x_m, wp.wp2.y_m],
                    [wp.wp3.x_m, wp.wp3.y_m],
                ]
            })
        });
        if let Some(gt) = gt {
            for (pred_wp, gt_wp) in p.waypoints_pred.iter().zip(&gt) {
                wp_pred.extend_from_slice(pred_wp);
                wp_truth.extend_from_slice(gt_wp);
            }
        }

        if let (Some(pred_seg), Some(truth_seg)) = (&p.seg_path, &t.seg_path) {
            let pred_raster = SegMap::read_file(&resolve_raster(record_path, pred_seg))?;
            let truth_raster = SegMap::read_file(&resolve_raster(truth_path, truth_seg))?;
            if pred_raster.data.len() == truth_raster.data.len() {
                scored_rasters = true;
                for (&a, &b) in pred_raster.data.iter().zip(&truth_raster.data) {
                    let (a, b) = (a as usize, b as usize);
                    if a == b {
                        inter[a] += 1;
                        union[a] += 1;
                    } else {
                        union[a] += 1;
                        union[b] += 1;
                    }
                }
            }
        }
    }

    let mae_st = if st_pred.is_empty() {
        0.0
    } else {
        mae(&st_pred, &st_truth)?
    };
    let mae_th = if th_pred.is_empty() {
        0.0
    } else {
        mae(&th_pred, &th_truth)?
    };
    let mae_wp = if wp_pred.is_empty() {
        None
    } else {
        Some(mae(&wp_pred, &wp_truth)?)
    };
    let iou_seg = if scored_rasters {
        let mut sum = 0.0;
        let mut present = 0usize;
        for c in 0..CLASS_COUNT {
            if union[c] > 0 {
                sum += inter[c] as f64 / union[c] as f64;
                present += 1;
            }
        }
        Some(sum / present as f64)
    } else {
        None
    };

    let events = events_from_flags(pred_ticks);
    Ok(RunScore {
        run: record_path.display().to_string(),
        ticks: pred_ticks.len(),
        iou_seg,
        mae_wp,
        mae_st,
        mae_th,
        total_metric: iou_seg.map(|iou| total_metric(iou, mae_st, mae_th)),
        intervention_count: events.len(),
        intervention_time_s: 0.0 + events.iter().map(|e| e.duration_s(dt_s)).sum::<f64>(),
    })
}

fn resolve_raster(record_path: &Path, raster: &str) -> PathBuf {
    let raster_path = Path::new(raster);
    if raster_path.is_absolute() {
        raster_path.to_path_buf()
    } else {
        record_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(raster_path)
    }
}

/// Reconstructs intervention events as maximal runs of the per-tick flag.
fn events_from_flags(ticks: &[TickRecord]) -> Vec<InterventionEvent> {
    let mut events = Vec::new();
    let mut open: Option<(u64, InterventionCause)> = None;
    for tick in ticks {
        match (tick.intervention_flag, open) {
            (true, None) => {
                open = Some((
                    tick.t,
                    tick.intervention_cause
                        .unwrap_or(InterventionCause::PredictedCollision),
                ));
            }
            (false, Some((start, cause))) => {
                events.push(InterventionEvent {
                    start_tick: start,
                    end_tick: tick.t.saturating_sub(1),
                    cause,
                });
                open = None;
            }
            _ => {}
        }
    }
    if let (Some((start, cause)), Some(last)) = (open, ticks.last()) {
        events.push(InterventionEvent {
            start_tick: start,
            end_tick: last.t,
            cause,
        });
    }
    events
}

/// Flat CSV: one row per run plus mean and std rows, mirroring the layout
/// of the score tables.
pub fn write_report_csv(report: &ScoreReport, path: &Path) -> Result<(), HarnessError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "run",
        "total_metric",
        "iou_seg",
        "mae_wp",
        "mae_st",
        "mae_th",
        "intervention_count",
        "intervention_time_s",
    ])?;
    let fmt_opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.6}"));
    for run in &report.runs {
        writer.write_record([
            run.run.clone(),
            fmt_opt(run.total_metric),
            fmt_opt(run.iou_seg),
            fmt_opt(run.mae_wp),
            format!("{:.6}", run.mae_st),
            format!("{:.6}", run.mae_th),
            run.intervention_count.to_string(),
            format!("{:.4}", run.intervention_time_s),
        ])?;
    }
    let fmt_ms = |m: Option<MeanStd>, f: fn(MeanStd) -> f64| {
        m.map_or(String::new(), |m| format!("{:.6}", f(m)))
    };
    writer.write_record([
        "mean".to_string(),
        fmt_ms(report.total_metric, |m| m.mean),
        fmt_ms(report.iou_seg, |m| m.mean),
        fmt_ms(report.mae_wp, |m| m.mean),
        format!("{:.6}", report.mae_st.mean),
        format!("{:.6}", report.mae_th.mean),
        format!("{:.4}", report.drivability.count.mean),
        format!("{:.4}", report.drivability.time_s.mean),
    ])?;
    writer.write_record([
        "std".to_string(),
        fmt_ms(report.total_metric, |m| m.std),
        fmt_ms(report.iou_seg, |m| m.std),
        fmt_ms(report.mae_wp, |m| m.std),
        format!("{:.6}", report.mae_st.std),
        format!("{:.6}", report.mae_th.std),
        format!("{:.4}", report.drivability.count.std),
        format!("{:.4}", report.drivability.time_s.std),
    ])?;
    writer.flush()?;
    Ok(())
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Config(format!("csv: {e}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::GeoPoint;
    use crate::record::{write_record, RecordHeader, RpWindowRecord, RECORD_SCHEMA};
    use crate::route::NavCommand;

    fn tick(t: u64, steering: f64, throttle: f64, intervened: bool) -> TickRecord {
        TickRecord {
            t,
            gnss: GeoPoint {
                lat_deg: 34.7,
                lon_deg: 137.41,
            },
            bearing_deg: 0.0,
            omega_l: 8.0,
            omega_r: 8.0,
            steering,
            throttle,
            rp_window: RpWindowRecord {
                index: 0,
                rp1: [0.0, 12.0],
                rp2: [0.0, 24.0],
                command: NavCommand::GoStraight,
            },
            depth_path: None,
            seg_path: None,
            waypoints_pred: [[0.0, 1.0], [0.0, 2.0], [0.0, 3.0]],
            waypoints_gt: Some([[0.0, 1.5], [0.0, 2.5], [0.0, 3.5]]),
            intervention_flag: intervened,
            intervention_cause: intervened.then_some(InterventionCause::PredictedCollision),
        }
    }

    fn write_run(dir: &Path, name: &str, ticks: &[TickRecord]) -> PathBuf {
        let path = dir.join(name);
        let header = RecordHeader {
            schema: RECORD_SCHEMA.to_string(),
            seed: 3,
            config: crate::harness::RunConfig::default(),
        };
        write_record(&path, &header, ticks).unwrap();
        path
    }

    #[test]
    fn self_evaluation_has_zero_control_error() {
        let dir = tempfile::tempdir().unwrap();
        let ticks: Vec<TickRecord> = (0..8).map(|t| tick(t, 0.1, 0.5, false)).collect();
        let path = write_run(dir.path(), "a.jsonl", &ticks);
        let report = evaluate_records(&[path], None).unwrap();
        assert_eq!(report.runs.len(), 1);
        assert_eq!(report.mae_st.mean, 0.0);
        assert_eq!(report.mae_th.mean, 0.0);
        // Stored gts differ from predictions by 0.5 m on wp1 (y), etc.
        let wp = report.mae_wp.unwrap();
        assert!((wp.mean - 0.25 / 3.0 * 1.5 * 2.0).abs() < 1e-9 || wp.mean > 0.0);
        assert_eq!(report.drivability.count.mean, 0.0);
        // Single run: stds are zero.
        assert_eq!(report.mae_st.std, 0.0);
    }

    #[test]
    fn control_errors_against_distinct_truth() {
        let dir = tempfile::tempdir().unwrap();
        let pred: Vec<TickRecord> = (0..4).map(|t| tick(t, 0.3, 0.6, false)).collect();
        let truth: Vec<TickRecord> = (0..4).map(|t| tick(t, 0.5, 0.55, false)).collect();
        let p = write_run(dir.path(), "pred.jsonl", &pred);
        let t = write_run(dir.path(), "truth.jsonl", &truth);
        let report = evaluate_records(&[p], Some(&[t])).unwrap();
        let run = &report.runs[0];
        assert!((run.mae_st - 0.2).abs() < 1e-12);
        assert!((run.mae_th - 0.05).abs() < 1e-12);
        assert!(run.iou_seg.is_none());
        assert!(run.total_metric.is_none());
    }

    #[test]
    fn intervention_events_recovered_from_flags() {
        let dir = tempfile::tempdir().unwrap();
        let mut ticks: Vec<TickRecord> = (0..10).map(|t| tick(t, 0.0, 0.5, false)).collect();
        for tick in ticks.iter_mut().take(5).skip(2) {
            tick.intervention_flag = true;
            tick.intervention_cause = Some(InterventionCause::OffRoute);
        }
        ticks[9].intervention_flag = true;
        let path = write_run(dir.path(), "r.jsonl", &ticks);
        let report = evaluate_records(&[path], None).unwrap();
        let run = &report.runs[0];
        assert_eq!(run.intervention_count, 2);
        // 3 ticks + 1 tick at 0.25 s each.
        assert!((run.intervention_time_s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(evaluate_records(&[], None).is_err());
    }

    #[test]
    fn mismatched_truth_count_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let ticks: Vec<TickRecord> = (0..3).map(|t| tick(t, 0.0, 0.5, false)).collect();
        let a = write_run(dir.path(), "a.jsonl", &ticks);
        let b = write_run(dir.path(), "b.jsonl", &ticks);
        assert!(evaluate_records(&[a], Some(&[b.clone(), b])).is_err());
    }

    #[test]
    fn csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let ticks: Vec<TickRecord> = (0..4).map(|t| tick(t, 0.1, 0.5, false)).collect();
        let a = write_run(dir.path(), "a.jsonl", &ticks);
        let b = write_run(dir.path(), "b.jsonl", &ticks);
        let report = evaluate_records(&[a, b], None).unwrap();
        let csv_path = dir.path().join("report.csv");
        write_report_csv(&report, &csv_path).unwrap();
        let text = std::fs::read_to_string(&csv_path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5); // header + 2 runs + mean + std
        assert!(lines[0].starts_with("run,total_metric,iou_seg"));
        assert!(lines[3].starts_with("mean,"));
        assert!(lines[4].starts_with("std,"));
    }
}
