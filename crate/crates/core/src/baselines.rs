//! Supervised threshold detectors with thresholds tuned on labeled data.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::trace::{Presence, PresenceSeries};

/// Denominator floor of the percentage metric, in watts.
pub const PERCENT_FLOOR_W: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdKind {
    /// Present while mean power exceeds the threshold.
    Absolute,
    /// Toggle when the largest sample-to-sample change exceeds the threshold.
    Change,
    /// Toggle when that change relative to the previous window's mean power does.
    Percentage,
}

impl ThresholdKind {
    pub const ALL: [ThresholdKind; 3] = [ThresholdKind::Absolute, ThresholdKind::Change, ThresholdKind::Percentage];

    pub fn as_str(self) -> &'static str {
        match self {
            ThresholdKind::Absolute => "absolute",
            ThresholdKind::Change => "change",
            ThresholdKind::Percentage => "percentage",
        }
    }
}

impl fmt::Display for ThresholdKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ThresholdKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown threshold model {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdModel {
    pub kind: ThresholdKind,
    /// Watts for absolute and change models, a fraction for percentage.
    pub threshold: f64,
    /// Starting state of the transition models.
    pub initial_state: Presence,
}

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold.is_finite() && threshold > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("threshold must be positive, got {threshold}")))
    }
}

impl ThresholdModel {
    pub fn new(kind: ThresholdKind, threshold: f64, initial_state: Presence) -> Result<Self> {
        check_threshold(threshold)?;
        Ok(Self {
            kind,
            threshold,
            initial_state,
        })
    }

    pub fn infer(&self, features: &FeatureMatrix) -> Result<PresenceSeries> {
        let metric = model_metric(self.kind, features);
        let states = apply(self.kind, &metric, self.threshold, self.initial_state);
        PresenceSeries::new(features.window_starts().to_vec(), states)
    }
}

pub fn infer_absolute(mean_power: &[f64], threshold: f64) -> Result<Vec<Presence>> {
    check_threshold(threshold)?;
    Ok(absolute(mean_power, threshold))
}

fn absolute(mean_power: &[f64], threshold: f64) -> Vec<Presence> {
    mean_power
        .iter()
        .map(|&p| if p > threshold { Presence::Present } else { Presence::Absent })
        .collect()
}

/// Two-state machine that flips whenever the window metric exceeds `threshold`.
/// The flipping window already carries the new state.
pub fn infer_transition(metric: &[f64], threshold: f64, initial_state: Presence) -> Result<Vec<Presence>> {
    check_threshold(threshold)?;
    Ok(transition(metric, threshold, initial_state))
}

fn transition(metric: &[f64], threshold: f64, initial_state: Presence) -> Vec<Presence> {
    let mut state = initial_state;
    metric
        .iter()
        .map(|&m| {
            if m > threshold {
                state = state.toggled();
            }
            state
        })
        .collect()
}

fn apply(kind: ThresholdKind, metric: &[f64], threshold: f64, initial_state: Presence) -> Vec<Presence> {
    match kind {
        ThresholdKind::Absolute => absolute(metric, threshold),
        ThresholdKind::Change | ThresholdKind::Percentage => transition(metric, threshold, initial_state),
    }
}

/// Per-window MAC divided by the previous window's mean power (its own for the first).
pub fn percentage_metric(mac: &[f64], mean_power: &[f64]) -> Vec<f64> {
    (0..mac.len())
        .map(|k| {
            let base = mean_power[k.saturating_sub(1)];
            mac[k] / base.max(PERCENT_FLOOR_W)
        })
        .collect()
}

/// The per-window quantity a model thresholds.
pub fn model_metric(kind: ThresholdKind, features: &FeatureMatrix) -> Vec<f64> {
    let rows = features.rows();
    let mean: Vec<f64> = rows.iter().map(|r| r.mean_power).collect();
    match kind {
        ThresholdKind::Absolute => mean,
        ThresholdKind::Change => rows.iter().map(|r| r.mac).collect(),
        ThresholdKind::Percentage => {
            let mac: Vec<f64> = rows.iter().map(|r| r.mac).collect();
            percentage_metric(&mac, &mean)
        }
    }
}

/// 0.5 W steps up to the metric maximum, or 0.01 steps up to 2 for percentage.
pub fn default_grid(kind: ThresholdKind, metric: &[f64]) -> Vec<f64> {
    let (step, top) = match kind {
        ThresholdKind::Percentage => (0.01, 2.0),
        _ => (0.5, metric.iter().copied().fold(0.0, f64::max)),
    };
    let count = (top / step + 1e-9).floor() as usize;
    (1..=count.max(1)).map(|i| i as f64 * step).collect()
}

fn accuracy(pred: &[Presence], truth: &[Presence]) -> f64 {
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    hits as f64 / truth.len() as f64
}

/// Exhaustive search for the threshold with the best overall accuracy.
/// Ties go to the smallest threshold.
pub fn optimize_threshold(
    kind: ThresholdKind,
    features: &FeatureMatrix,
    truth: &PresenceSeries,
    grid: &[f64],
    initial_state: Presence,
) -> Result<(ThresholdModel, f64)> {
    if truth.window_starts() != features.window_starts() {
        return Err(Error::IndexMismatch("truth windows do not match feature windows".into()));
    }
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    for &t in grid {
        check_threshold(t)?;
    }
    let metric = model_metric(kind, features);
    let scores: Vec<f64> = grid
        .par_iter()
        .map(|&t| accuracy(&apply(kind, &metric, t, initial_state), truth.states()))
        .collect();
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&i, &j| grid[i].total_cmp(&grid[j]));
    let mut best = order[0];
    for &i in &order[1..] {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    Ok((ThresholdModel::new(kind, grid[best], initial_state)?, scores[best]))
}
