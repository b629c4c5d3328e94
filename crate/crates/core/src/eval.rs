//! Detection rates, hour-of-day absence profiles and per-iteration error curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::selftrain::IterationDiagnostics;
use crate::trace::{Presence, PresenceSeries};

/// Accuracy conditioned on the true state, plus overall.
///
/// A class missing from the truth gets rate 1.0 and its `*_defined` flag
/// cleared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionRates {
    pub absence: f64,
    pub presence: f64,
    pub overall: f64,
    pub absence_defined: bool,
    pub presence_defined: bool,
    /// Fraction of truly absent windows.
    pub absent_share: f64,
}

fn check_aligned(pred: &PresenceSeries, truth: &PresenceSeries) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    if pred.window_starts() != truth.window_starts() {
        return Err(Error::IndexMismatch("prediction and truth windows differ".into()));
    }
    Ok(())
}

pub fn detection_rates(pred: &PresenceSeries, truth: &PresenceSeries) -> Result<DetectionRates> {
    check_aligned(pred, truth)?;
    if truth.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut hits = [0usize; 2];
    let mut totals = [0usize; 2];
    for (p, t) in pred.states().iter().zip(truth.states()) {
        let i = t.bit() as usize;
        totals[i] += 1;
        hits[i] += usize::from(p == t);
    }
    let rate = |i: usize| if totals[i] == 0 { 1.0 } else { hits[i] as f64 / totals[i] as f64 };
    let n = truth.len() as f64;
    Ok(DetectionRates {
        absence: rate(0),
        presence: rate(1),
        overall: (hits[0] + hits[1]) as f64 / n,
        absence_defined: totals[0] > 0,
        presence_defined: totals[1] > 0,
        absent_share: totals[0] as f64 / n,
    })
}

/// Fraction of each UTC hour's windows marked absent; `None` for hours without windows.
pub fn hourly_absence(series: &PresenceSeries) -> Result<[Option<f64>; 24]> {
    if series.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut absent = [0usize; 24];
    let mut total = [0usize; 24];
    for (t, s) in series.iter() {
        let h = (t.rem_euclid(86_400) / 3_600) as usize;
        total[h] += 1;
        absent[h] += usize::from(s == Presence::Absent);
    }
    Ok(std::array::from_fn(|h| (total[h] > 0).then(|| absent[h] as f64 / total[h] as f64)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// 1-based training round.
    pub iteration: usize,
    pub misclassification: f64,
    /// Stopping indicator computed at the end of this round.
    pub stop_indicator: bool,
}

/// Misclassification of each round's vote against the truth.
pub fn iteration_curve(diag: &IterationDiagnostics, truth: &PresenceSeries) -> Result<Vec<CurvePoint>> {
    let labelings = diag.labelings.as_ref().ok_or(Error::LabelingsNotRetained)?;
    labelings
        .iter()
        .enumerate()
        .map(|(k, labels)| {
            let pred = PresenceSeries::new(truth.window_starts().to_vec(), labels.clone())?;
            let rates = detection_rates(&pred, truth)?;
            Ok(CurvePoint {
                iteration: k + 1,
                misclassification: 1.0 - rates.overall,
                stop_indicator: diag.records.get(k + 1).is_some_and(|r| r.stopped),
            })
        })
        .collect()
}

pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("iteration,misclassification,stop_indicator\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.iteration, p.misclassification, p.stop_indicator as u8));
    }
    out
}

/// One results row: rates of one model for one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub user: String,
    pub model: String,
    pub absence: f64,
    pub presence: f64,
    pub overall: f64,
}

impl MetricsReport {
    pub fn new(user: impl Into<String>, model: impl Into<String>, rates: &DetectionRates) -> Self {
        Self {
            user: user.into(),
            model: model.into(),
            absence: rates.absence,
            presence: rates.presence,
            overall: rates.overall,
        }
    }
}
