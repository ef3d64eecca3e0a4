//! Loss and scoring functions plus drivability statistics.
//!
//! These are pure evaluation functions: segmentation cross-entropy + dice,
//! L1 error, class-wise IoU, the combined total metric that ranks models,
//! the weighted multi-task loss, and intervention statistics across runs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::InterventionEvent;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before logs.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("shape mismatch: prediction has {pred} elements, truth has {truth}")]
    ShapeMismatch { pred: usize, truth: usize },
    #[error("empty input")]
    Empty,
}

/// Per-task losses and their adaptive weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskLosses {
    pub l_seg: f64,
    pub l_wp: f64,
    pub l_st: f64,
    pub l_th: f64,
    /// `[alpha0, alpha1, alpha2, alpha3]` weighting seg, waypoint, steering,
    /// throttle losses respectively.
    pub alphas: [f64; 4],
}

/// Binary cross-entropy plus soft dice over a per-class probability raster
/// against a one-hot truth raster (both flattened, same layout).
///
/// The cross-entropy is averaged over all elements; the dice term uses the
/// soft intersection `sum(pred * truth)`.
pub fn seg_loss(pred: &[f64], truth: &[f64]) -> Result<f64, MetricsError> {
    if pred.len() != truth.len() {
        return Err(MetricsError::ShapeMismatch {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = pred.len() as f64;
    let mut ce = 0.0;
    let mut intersection = 0.0;
    let mut pred_mass = 0.0;
    let mut truth_mass = 0.0;
    for (&p, &y) in pred.iter().zip(truth) {
        let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        ce -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
        intersection += p * y;
        pred_mass += p;
        truth_mass += y;
    }
    let dice = 1.0 - 2.0 * intersection / (pred_mass + truth_mass);
    Ok(ce / n + dice)
}

/// Mean absolute error. With a single element this is plain `|pred - truth|`.
pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64, MetricsError> {
    if pred.len() != truth.len() {
        return Err(MetricsError::ShapeMismatch {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(MetricsError::Empty);
    }
    let abs: Vec<f64> = pred
        .iter()
        .zip(truth)
        .map(|(&p, &y)| (p - y).abs())
        .collect();
    Ok(pairwise_sum(&abs) / abs.len() as f64)
}

/// Class-wise intersection over union between two class-id rasters, averaged
/// over the classes present in either raster; classes absent from both are
/// skipped.
pub fn iou(pred: &[u8], truth: &[u8], class_count: usize) -> Result<f64, MetricsError> {
    if pred.len() != truth.len() {
        return Err(MetricsError::ShapeMismatch {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut inter = vec![0u64; class_count];
    let mut union = vec![0u64; class_count];
    for (&p, &y) in pred.iter().zip(truth) {
        let (p, y) = (p as usize, y as usize);
        debug_assert!(p < class_count && y < class_count);
        if p == y {
            inter[p] += 1;
            union[p] += 1;
        } else {
            union[p] += 1;
            union[y] += 1;
        }
    }
    let mut sum = 0.0;
    let mut present = 0usize;
    for c in 0..class_count {
        if union[c] > 0 {
            sum += inter[c] as f64 / union[c] as f64;
            present += 1;
        }
    }
    if present == 0 {
        return Err(MetricsError::Empty);
    }
    Ok(sum / present as f64)
}

/// The offline ranking score: `(1 - iou) + mae_steering + mae_throttle`,
/// lower is better.
pub fn total_metric(iou_seg: f64, mae_st: f64, mae_th: f64) -> f64 {
    (1.0 - iou_seg) + mae_st + mae_th
}

/// Weighted multi-task loss.
pub fn mtl_loss(losses: &TaskLosses) -> f64 {
    let [a0, a1, a2, a3] = losses.alphas;
    a0 * losses.l_seg + a1 * losses.l_wp + a2 * losses.l_st + a3 * losses.l_th
}

/// Mean and sample standard deviation (zero for a single sample).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(samples: &[f64]) -> Result<Self, MetricsError> {
        if samples.is_empty() {
            return Err(MetricsError::Empty);
        }
        let n = samples.len() as f64;
        let mean = pairwise_sum(samples) / n;
        let std = if samples.len() < 2 {
            0.0
        } else {
            let sq: Vec<f64> = samples.iter().map(|&x| (x - mean) * (x - mean)).collect();
            (pairwise_sum(&sq) / (n - 1.0)).sqrt()
        };
        Ok(Self { mean, std })
    }
}

/// Intervention statistics across runs: per-run counts and total seconds,
/// each reduced to mean +/- sample std.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrivabilityStats {
    pub runs: usize,
    pub count: MeanStd,
    pub time_s: MeanStd,
}

/// Aggregates intervention events per run: durations are summed within each
/// run first, then count and time are averaged across runs.
pub fn drivability(
    events_per_run: &[Vec<InterventionEvent>],
    dt_s: f64,
) -> Result<DrivabilityStats, MetricsError> {
    if events_per_run.is_empty() {
        return Err(MetricsError::Empty);
    }
    let counts: Vec<f64> = events_per_run.iter().map(|e| e.len() as f64).collect();
    let times: Vec<f64> = events_per_run
        .iter()
        .map(|events| 0.0 + events.iter().map(|e| e.duration_s(dt_s)).sum::<f64>())
        .collect();
    Ok(DrivabilityStats {
        runs: events_per_run.len(),
        count: MeanStd::of(&counts)?,
        time_s: MeanStd::of(&times)?,
    })
}

/// Per-run scores in the evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunScore {
    pub run: String,
    pub ticks: usize,
    pub iou_seg: Option<f64>,
    pub mae_wp: Option<f64>,
    pub mae_st: f64,
    pub mae_th: f64,
    /// `(1 - iou) + mae_st + mae_th`; absent when no rasters were scored.
    pub total_metric: Option<f64>,
    pub intervention_count: usize,
    pub intervention_time_s: f64,
}

/// Aggregated evaluation across runs: per-run rows plus mean +/- sample std
/// for every metric. `iou_averaging` documents the averaging choice, which
/// affects absolute comparability of IoU numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub iou_averaging: String,
    pub runs: Vec<RunScore>,
    pub iou_seg: Option<MeanStd>,
    pub mae_wp: Option<MeanStd>,
    pub mae_st: MeanStd,
    pub mae_th: MeanStd,
    pub total_metric: Option<MeanStd>,
    pub drivability: DrivabilityStats,
}

/// Deterministic pairwise summation; the reduction tree depends only on the
/// slice length, so parallel callers that merge per-chunk sums reproduce the
/// serial result.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}
