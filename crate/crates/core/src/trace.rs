//! Time-series and labeling data model shared by every stage, plus windowing.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seconds since the Unix epoch.
pub type Timestamp = i64;

/// Binary occupancy state. Doubles as the class label of the classifiers:
/// `Present` is class 1, `Absent` is class 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Presence {
    Absent,
    Present,
}

impl Presence {
    pub fn from_bit(bit: u8) -> Option<Self> {
        match bit {
            0 => Some(Presence::Absent),
            1 => Some(Presence::Present),
            _ => None,
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Presence::Absent => 0,
            Presence::Present => 1,
        }
    }

    pub fn is_present(self) -> bool {
        self == Presence::Present
    }

    pub fn toggled(self) -> Self {
        match self {
            Presence::Absent => Presence::Present,
            Presence::Present => Presence::Absent,
        }
    }
}

impl fmt::Display for Presence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Presence::Absent => "absent",
            Presence::Present => "present",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub timestamp: Timestamp,
    pub watts: f64,
}

/// Power samples of one user, strictly increasing in time, all finite and non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerTrace {
    user_id: String,
    samples: Vec<Sample>,
    nominal_period: i64,
}

impl PowerTrace {
    pub fn new(user_id: impl Into<String>, samples: Vec<Sample>, nominal_period: i64) -> Result<Self> {
        if nominal_period <= 0 {
            return Err(Error::InvalidTrace(format!(
                "nominal period must be positive, got {nominal_period}"
            )));
        }
        for (i, s) in samples.iter().enumerate() {
            if !s.watts.is_finite() || s.watts < 0.0 {
                return Err(Error::InvalidTrace(format!(
                    "sample {i} at t={} has invalid power {}",
                    s.timestamp, s.watts
                )));
            }
            if i > 0 && samples[i - 1].timestamp >= s.timestamp {
                return Err(Error::InvalidTrace(format!(
                    "timestamps not strictly increasing at sample {i} (t={})",
                    s.timestamp
                )));
            }
        }
        Ok(Self {
            user_id: user_id.into(),
            samples,
            nominal_period,
        })
    }

    /// Gapless trace starting at `start` with one sample every `period` seconds.
    pub fn from_watts(
        user_id: impl Into<String>,
        start: Timestamp,
        period: i64,
        watts: &[f64],
    ) -> Result<Self> {
        let samples = watts
            .iter()
            .enumerate()
            .map(|(i, &w)| Sample {
                timestamp: start + i as i64 * period,
                watts: w,
            })
            .collect();
        Self::new(user_id, samples, period)
    }

    pub fn user_id(&self) -> &str {
        &self.user_id
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn nominal_period(&self) -> i64 {
        self.nominal_period
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    /// Window width in seconds.
    pub width: i64,
    /// Distance between consecutive window starts in seconds.
    pub stride: i64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self::non_overlapping(60)
    }
}

impl WindowSpec {
    pub fn non_overlapping(width: i64) -> Self {
        Self { width, stride: width }
    }

    pub fn validate(&self, nominal_period: i64) -> Result<()> {
        if self.width <= 0 || self.stride <= 0 {
            return Err(Error::InvalidWindow(format!(
                "width and stride must be positive (width={}, stride={})",
                self.width, self.stride
            )));
        }
        if self.width < 2 * nominal_period {
            return Err(Error::WindowTooSmall {
                width: self.width,
                period: nominal_period,
            });
        }
        if self.width % nominal_period != 0 {
            return Err(Error::InvalidWindow(format!(
                "width {}s is not a multiple of the sampling period {}s",
                self.width, nominal_period
            )));
        }
        Ok(())
    }
}

/// Samples falling in `[start, start + width)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub start: Timestamp,
    pub samples: Vec<f64>,
    /// Fewer samples than the nominal period implies.
    pub gapped: bool,
}

/// Cut a trace into windows anchored at its first timestamp.
///
/// Windows with fewer than two samples are skipped and a trailing partial
/// window is dropped.
pub fn windowize(trace: &PowerTrace, spec: &WindowSpec) -> Result<Vec<Window>> {
    if trace.is_empty() {
        return Err(Error::EmptyInput);
    }
    let period = trace.nominal_period();
    spec.validate(period)?;

    let samples = trace.samples();
    let first = samples[0].timestamp;
    let span = samples[samples.len() - 1].timestamp - first + period;
    if span < spec.width {
        return Ok(Vec::new());
    }
    let count = ((span - spec.width) / spec.stride + 1) as usize;
    let expected = (spec.width / period) as usize;

    let mut windows = Vec::with_capacity(count);
    let mut lo = 0usize;
    for k in 0..count {
        let start = first + k as i64 * spec.stride;
        let end = start + spec.width;
        lo += samples[lo..].partition_point(|s| s.timestamp < start);
        let hi = lo + samples[lo..].partition_point(|s| s.timestamp < end);
        let values: Vec<f64> = samples[lo..hi].iter().map(|s| s.watts).collect();
        if values.len() >= 2 {
            windows.push(Window {
                start,
                gapped: values.len() < expected,
                samples: values,
            });
        }
    }
    Ok(windows)
}

/// One presence state per window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresenceSeries {
    window_starts: Vec<Timestamp>,
    states: Vec<Presence>,
}

impl PresenceSeries {
    pub fn new(window_starts: Vec<Timestamp>, states: Vec<Presence>) -> Result<Self> {
        if window_starts.len() != states.len() {
            return Err(Error::LengthMismatch {
                left: window_starts.len(),
                right: states.len(),
            });
        }
        if window_starts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidTrace(
                "window starts must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            window_starts,
            states,
        })
    }

    pub fn window_starts(&self) -> &[Timestamp] {
        &self.window_starts
    }

    pub fn states(&self) -> &[Presence] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Timestamp, Presence)> + '_ {
        self.window_starts.iter().copied().zip(self.states.iter().copied())
    }

    /// State of the window that contains `t`, assuming windows of `width` seconds.
    pub fn state_at(&self, t: Timestamp, width: i64) -> Option<Presence> {
        let idx = self.window_starts.partition_point(|&s| s <= t);
        if idx == 0 {
            return None;
        }
        let i = idx - 1;
        (t < self.window_starts[i] + width).then(|| self.states[i])
    }
}

/// Observed set sizes of a partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetSizes {
    pub l1: f64,
    pub l2: f64,
    pub u: f64,
}

impl SetSizes {
    pub fn labeled(&self) -> f64 {
        self.l1 + self.l2
    }

    pub fn total(&self) -> f64 {
        self.l1 + self.l2 + self.u
    }
}

/// Disjoint split of window indices into L1 (present), L2 (absent) and U (unlabeled).
///
/// Stored as one slot per index, so disjointness and coverage hold by
/// construction; [`LabelPartition::check_invariants`] re-derives them from
/// the materialised sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelPartition {
    slots: Vec<Option<Presence>>,
}

impl LabelPartition {
    pub fn from_slots(slots: Vec<Option<Presence>>) -> Self {
        Self { slots }
    }

    pub fn fully_labeled(labels: &[Presence]) -> Self {
        Self {
            slots: labels.iter().map(|&p| Some(p)).collect(),
        }
    }

    /// Build from explicit index sets, rejecting overlaps and gaps.
    pub fn from_sets(n_total: usize, l1: &[usize], l2: &[usize], u: &[usize]) -> Result<Self> {
        let mut slots: Vec<Option<Option<Presence>>> = vec![None; n_total];
        let sets = [
            (l1, Some(Presence::Present)),
            (l2, Some(Presence::Absent)),
            (u, None),
        ];
        for (set, label) in sets {
            for &i in set {
                let slot = slots.get_mut(i).ok_or_else(|| {
                    Error::IndexMismatch(format!("index {i} outside 0..{n_total}"))
                })?;
                if slot.is_some() {
                    return Err(Error::IndexMismatch(format!("index {i} assigned twice")));
                }
                *slot = Some(label);
            }
        }
        let slots = slots
            .into_iter()
            .enumerate()
            .map(|(i, s)| s.ok_or_else(|| Error::IndexMismatch(format!("index {i} not covered"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { slots })
    }

    pub fn n_total(&self) -> usize {
        self.slots.len()
    }

    pub fn label(&self, i: usize) -> Option<Presence> {
        self.slots[i]
    }

    pub fn slots(&self) -> &[Option<Presence>] {
        &self.slots
    }

    fn indices(&self, want: Option<Presence>) -> Vec<usize> {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(i, &s)| (s == want).then_some(i))
            .collect()
    }

    pub fn l1(&self) -> Vec<usize> {
        self.indices(Some(Presence::Present))
    }

    pub fn l2(&self) -> Vec<usize> {
        self.indices(Some(Presence::Absent))
    }

    pub fn u(&self) -> Vec<usize> {
        self.indices(None)
    }

    pub fn class(&self, class: Presence) -> Vec<usize> {
        self.indices(Some(class))
    }

    pub fn sizes(&self) -> SetSizes {
        let mut l1 = 0usize;
        let mut l2 = 0usize;
        for s in &self.slots {
            match s {
                Some(Presence::Present) => l1 += 1,
                Some(Presence::Absent) => l2 += 1,
                None => {}
            }
        }
        SetSizes {
            l1: l1 as f64,
            l2: l2 as f64,
            u: (self.slots.len() - l1 - l2) as f64,
        }
    }

    /// Pairwise disjointness and full coverage of the three index sets.
    pub fn check_invariants(&self) -> bool {
        let (l1, l2, u) = (self.l1(), self.l2(), self.u());
        let mut seen = vec![false; self.n_total()];
        for &i in l1.iter().chain(&l2).chain(&u) {
            if i >= seen.len() || seen[i] {
                return false;
            }
            seen[i] = true;
        }
        l1.len() + l2.len() + u.len() == self.n_total() && seen.into_iter().all(|s| s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gapless(n: usize) -> PowerTrace {
        let watts: Vec<f64> = (0..n).map(|i| (i % 7) as f64).collect();
        PowerTrace::from_watts("u", 1_000, 1, &watts).unwrap()
    }

    #[test]
    fn ten_minutes_make_ten_windows() {
        let w = windowize(&gapless(600), &WindowSpec::default()).unwrap();
        assert_eq!(w.len(), 10);
        assert!(w.iter().all(|w| w.samples.len() == 60 && !w.gapped));
        assert_eq!(w[3].start, 1_000 + 180);
    }

    #[test]
    fn trailing_partial_window_is_dropped() {
        let w = windowize(&gapless(90), &WindowSpec::default()).unwrap();
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn gapped_windows_are_flagged() {
        // drop seconds 70..100 and 130 from a 180 s trace
        let samples: Vec<Sample> = (0..180)
            .filter(|t| !(70..100).contains(t) && *t != 130)
            .map(|t| Sample {
                timestamp: t,
                watts: 1.0,
            })
            .collect();
        let trace = PowerTrace::new("u", samples.clone(), 1).unwrap();
        let w = windowize(&trace, &WindowSpec::default()).unwrap();
        assert_eq!(w.len(), 3);
        for win in &w {
            let brute = samples
                .iter()
                .filter(|s| s.timestamp >= win.start && s.timestamp < win.start + 60)
                .count();
            assert_eq!(win.samples.len(), brute);
            assert_eq!(win.gapped, brute < 60);
        }
        assert_eq!(w.iter().map(|w| w.gapped).collect::<Vec<_>>(), [false, true, true]);
    }

    #[test]
    fn empty_trace_is_rejected() {
        let trace = PowerTrace::new("u", vec![], 1).unwrap();
        let err = windowize(&trace, &WindowSpec::default()).unwrap_err();
        assert_eq!(err.to_string(), "empty input");
    }

    #[test]
    fn one_sample_window_is_too_small() {
        let err = windowize(&gapless(10), &WindowSpec::non_overlapping(1)).unwrap_err();
        assert!(err.to_string().starts_with("window too small"));
    }

    #[test]
    fn overlapping_stride() {
        let spec = WindowSpec { width: 60, stride: 30 };
        let w = windowize(&gapless(120), &spec).unwrap();
        // floor((120 - 60) / 30) + 1
        assert_eq!(w.len(), 3);
        assert_eq!(w[1].samples[0], (30 % 7) as f64);
    }

    #[test]
    fn trace_rejects_bad_samples() {
        let bad = vec![
            Sample { timestamp: 0, watts: 1.0 },
            Sample { timestamp: 0, watts: 1.0 },
        ];
        assert!(PowerTrace::new("u", bad, 1).is_err());
        let neg = vec![Sample { timestamp: 0, watts: -1.0 }];
        assert!(PowerTrace::new("u", neg, 1).is_err());
        let nan = vec![Sample { timestamp: 0, watts: f64::NAN }];
        assert!(PowerTrace::new("u", nan, 1).is_err());
    }

    #[test]
    fn partition_from_sets_validates() {
        let p = LabelPartition::from_sets(5, &[0, 2], &[1], &[3, 4]).unwrap();
        assert!(p.check_invariants());
        assert_eq!(p.sizes(), SetSizes { l1: 2.0, l2: 1.0, u: 2.0 });
        assert!(LabelPartition::from_sets(3, &[0, 1], &[1], &[2]).is_err());
        assert!(LabelPartition::from_sets(3, &[0], &[1], &[]).is_err());
        assert!(LabelPartition::from_sets(2, &[0], &[1], &[2]).is_err());
    }

    #[test]
    fn state_lookup() {
        let s = PresenceSeries::new(vec![0, 60, 120], vec![Presence::Absent, Presence::Present, Presence::Absent])
            .unwrap();
        assert_eq!(s.state_at(61, 60), Some(Presence::Present));
        assert_eq!(s.state_at(180, 60), None);
        assert_eq!(s.state_at(-1, 60), None);
    }

    proptest! {
        #[test]
        fn windowize_is_additive_over_aligned_concatenation(
            a in proptest::collection::vec(0.0f64..500.0, 120..400),
            b in proptest::collection::vec(0.0f64..500.0, 120..400),
        ) {
            let width = 60usize;
            let a = &a[..a.len() / width * width];
            let start_b = a.len() as i64;
            let whole: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
            let spec = WindowSpec::default();
            let joined = windowize(&PowerTrace::from_watts("u", 0, 1, &whole).unwrap(), &spec).unwrap();
            let mut parts = windowize(&PowerTrace::from_watts("u", 0, 1, a).unwrap(), &spec).unwrap();
            parts.extend(windowize(&PowerTrace::from_watts("u", start_b, 1, &b).unwrap(), &spec).unwrap());
            prop_assert_eq!(joined, parts);
        }

        #[test]
        fn partition_sets_stay_disjoint(slots in proptest::collection::vec(0u8..3, 0..200)) {
            let slots: Vec<Option<Presence>> = slots.into_iter().map(Presence::from_bit).collect();
            let p = LabelPartition::from_slots(slots);
            prop_assert!(p.check_invariants());
            let s = p.sizes();
            prop_assert_eq!(s.total() as usize, p.n_total());
        }
    }
}
