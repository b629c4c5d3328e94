//! Per-window power features.
//!
//! Power level (window mean), edge effect (maximum absolute change) and three
//! ripple measures: mean absolute difference, mean absolute height difference
//! between consecutive local extrema, and sample standard deviation. Every
//! window is self-contained: a window of `k` samples has `k - 1` first
//! differences and nothing is carried over from the previous window.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{windowize, PowerTrace, Timestamp, WindowSpec};

/// One feature space of the multi-view example space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum View {
    MeanPower,
    Mac,
    Mad,
    Mahd,
    Sd,
}

impl View {
    pub const ALL: [View; 5] = [View::MeanPower, View::Mac, View::Mad, View::Mahd, View::Sd];

    pub fn as_str(self) -> &'static str {
        match self {
            View::MeanPower => "mean_power",
            View::Mac => "mac",
            View::Mad => "mad",
            View::Mahd => "mahd",
            View::Sd => "sd",
        }
    }
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for View {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        View::ALL
            .into_iter()
            .find(|v| v.as_str() == s.trim())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown view '{s}'")))
    }
}

/// Power level, MAC, MAD and SD. MAHD is computed but left out by default.
pub const DEFAULT_VIEWS: [View; 4] = [View::MeanPower, View::Mac, View::Mad, View::Sd];

/// Parse a comma-separated view list such as `mean_power,mac,mad,sd`.
pub fn parse_views(s: &str) -> Result<Vec<View>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(View::from_str)
        .collect()
}

fn require_two(window: &[f64]) -> Result<()> {
    if window.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: window.len(),
        });
    }
    Ok(())
}

fn abs_diffs(window: &[f64]) -> impl Iterator<Item = f64> + '_ {
    window.windows(2).map(|w| (w[1] - w[0]).abs())
}

pub fn mean(window: &[f64]) -> Result<f64> {
    require_two(window)?;
    Ok(window.iter().sum::<f64>() / window.len() as f64)
}

/// Maximum absolute change between consecutive samples.
pub fn mac(window: &[f64]) -> Result<f64> {
    require_two(window)?;
    Ok(abs_diffs(window).fold(0.0, f64::max))
}

/// Mean absolute first difference over the `k - 1` differences of the window.
pub fn mad(window: &[f64]) -> Result<f64> {
    require_two(window)?;
    Ok(abs_diffs(window).sum::<f64>() / (window.len() - 1) as f64)
}

/// Values at the change points of a window: both endpoints plus every strict
/// local extremum, where a plateau counts once at its first index.
fn change_point_values(window: &[f64]) -> Vec<f64> {
    // collapse plateaus to (first index, value) runs
    let mut runs: Vec<(usize, f64)> = Vec::with_capacity(window.len());
    for (i, &x) in window.iter().enumerate() {
        if runs.last().is_none_or(|&(_, v)| v != x) {
            runs.push((i, x));
        }
    }
    let last = window.len() - 1;
    let mut points = vec![window[0]];
    for r in 1..runs.len().saturating_sub(1) {
        let (prev, cur, next) = (runs[r - 1].1, runs[r].1, runs[r + 1].1);
        if (cur > prev && cur > next) || (cur < prev && cur < next) {
            points.push(cur);
        }
    }
    points.push(window[last]);
    points
}

/// Mean absolute height difference between consecutive change points.
pub fn mahd(window: &[f64]) -> Result<f64> {
    require_two(window)?;
    let points = change_point_values(window);
    Ok(abs_diffs(&points).sum::<f64>() / (points.len() - 1) as f64)
}

/// Sample standard deviation (denominator `k - 1`).
pub fn sd(window: &[f64]) -> Result<f64> {
    let m = mean(window)?;
    let ss: f64 = window.iter().map(|x| (x - m) * (x - m)).sum();
    Ok((ss / (window.len() - 1) as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub mean_power: f64,
    pub mac: f64,
    pub mad: f64,
    pub mahd: f64,
    pub sd: f64,
}

impl FeatureVector {
    pub fn from_window(window: &[f64]) -> Result<Self> {
        Ok(Self {
            mean_power: mean(window)?,
            mac: mac(window)?,
            mad: mad(window)?,
            mahd: mahd(window)?,
            sd: sd(window)?,
        })
    }

    pub fn get(&self, view: View) -> f64 {
        match view {
            View::MeanPower => self.mean_power,
            View::Mac => self.mac,
            View::Mad => self.mad,
            View::Mahd => self.mahd,
            View::Sd => self.sd,
        }
    }
}

/// One feature row per window plus the ordered view selection.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    window_starts: Vec<Timestamp>,
    gapped: Vec<bool>,
    rows: Vec<FeatureVector>,
    views: Vec<View>,
}

impl FeatureMatrix {
    pub fn new(
        window_starts: Vec<Timestamp>,
        gapped: Vec<bool>,
        rows: Vec<FeatureVector>,
        views: Vec<View>,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput);
        }
        if window_starts.len() != rows.len() {
            return Err(Error::LengthMismatch {
                left: window_starts.len(),
                right: rows.len(),
            });
        }
        if gapped.len() != rows.len() {
            return Err(Error::LengthMismatch {
                left: gapped.len(),
                right: rows.len(),
            });
        }
        check_views(&views)?;
        Ok(Self {
            window_starts,
            gapped,
            rows,
            views,
        })
    }

    pub fn window_starts(&self) -> &[Timestamp] {
        &self.window_starts
    }

    pub fn gapped(&self) -> &[bool] {
        &self.gapped
    }

    pub fn rows(&self) -> &[FeatureVector] {
        &self.rows
    }

    pub fn views(&self) -> &[View] {
        &self.views
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, view: View) -> Vec<f64> {
        self.rows.iter().map(|r| r.get(view)).collect()
    }

    /// Selected columns in view order.
    pub fn view_columns(&self) -> Vec<Vec<f64>> {
        self.views.iter().map(|&v| self.column(v)).collect()
    }

    /// Selected feature values of one window, in view order.
    pub fn selected_row(&self, i: usize) -> Vec<f64> {
        self.views.iter().map(|&v| self.rows[i].get(v)).collect()
    }

    pub fn with_views(&self, views: Vec<View>) -> Result<Self> {
        check_views(&views)?;
        Ok(Self {
            views,
            ..self.clone()
        })
    }
}

fn check_views(views: &[View]) -> Result<()> {
    if views.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "at least two views are required, got {}",
            views.len()
        )));
    }
    for (i, v) in views.iter().enumerate() {
        if views[..i].contains(v) {
            return Err(Error::InvalidConfig(format!("view '{v}' selected twice")));
        }
    }
    Ok(())
}

/// Window the trace and compute every feature per window.
pub fn build_views(trace: &PowerTrace, spec: &WindowSpec, views: &[View]) -> Result<FeatureMatrix> {
    let windows = windowize(trace, spec)?;
    let rows = windows
        .par_iter()
        .map(|w| FeatureVector::from_window(&w.samples))
        .collect::<Result<Vec<_>>>()?;
    FeatureMatrix::new(
        windows.iter().map(|w| w.start).collect(),
        windows.iter().map(|w| w.gapped).collect(),
        rows,
        views.to_vec(),
    )
}
