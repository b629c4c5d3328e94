//! Gaussian-kernel naive-Bayes classification per view and the cross-view vote.
//!
//! Each view gets its own classifier: class priors from the current labeled
//! set and one univariate kernel density estimate per class. Scores are
//! compared in log space so that feature values far out in the tails of both
//! classes still produce a decision.
//!
//! Large classes are evaluated on a linearly binned grid (`h / 16` node
//! spacing, kernel truncated at `8h`) with linear interpolation between
//! nodes. Where the gridded density falls below what a single sample at `7h`
//! would contribute, the log density is recomputed exactly over the binned
//! weights, so tail comparisons stay meaningful.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::View;
use crate::trace::{LabelPartition, Presence};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Bandwidth used for a zero-variance class, before the 1% of mean term.
pub const BANDWIDTH_FLOOR: f64 = 0.1;

/// Classes at or below this size are evaluated exactly.
const EXACT_LIMIT: usize = 256;
const NODES_PER_BANDWIDTH: f64 = 16.0;
const TAIL_BANDWIDTHS: f64 = 8.0;
const MAX_NODES: usize = 16_384;

fn validate(samples: &[f64], h: f64) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::EmptyClass);
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidBandwidth(h));
    }
    Ok(())
}

fn exact_log_density(samples: &[f64], h: f64, x: f64) -> f64 {
    let inv = 1.0 / (2.0 * h * h);
    let peak = samples
        .iter()
        .map(|s| -(x - s) * (x - s) * inv)
        .fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = samples
        .iter()
        .map(|s| (-(x - s) * (x - s) * inv - peak).exp())
        .sum();
    peak + sum.ln() - (samples.len() as f64).ln() - h.ln() - LN_SQRT_2PI
}

/// Natural log of the Gaussian kernel density estimate at `x`.
pub fn kde_log_density(samples: &[f64], h: f64, x: f64) -> Result<f64> {
    validate(samples, h)?;
    Ok(exact_log_density(samples, h, x))
}

/// `(1/n) * sum K_h(x - x_i)` with `K_h(u) = exp(-u^2 / 2h^2) / (h * sqrt(2*pi))`.
pub fn kde_density(samples: &[f64], h: f64, x: f64) -> Result<f64> {
    kde_log_density(samples, h, x).map(f64::exp)
}

/// Rule-of-thumb bandwidth `1.06 * sd * n^(-1/5)`.
///
/// A class with zero spread gets `max(0.1, 0.01 * max(1, mean))`.
pub fn select_bandwidth(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    if sd == 0.0 {
        return Ok(degenerate_bandwidth(mean));
    }
    Ok(1.06 * sd * n.powf(-0.2))
}

fn degenerate_bandwidth(mean: f64) -> f64 {
    BANDWIDTH_FLOOR.max(0.01 * mean.abs().max(1.0))
}

fn class_bandwidth(samples: &[f64]) -> Result<f64> {
    match samples {
        [] => Err(Error::EmptyClass),
        [only] => Ok(degenerate_bandwidth(*only)),
        _ => select_bandwidth(samples),
    }
}

#[derive(Debug, Clone)]
struct BinnedKde {
    origin: f64,
    step: f64,
    weights: Vec<f64>,
    occupied: Vec<usize>,
    density: Vec<f64>,
    log_norm: f64,
    log_n: f64,
    inv_two_h2: f64,
    floor: f64,
}

impl BinnedKde {
    fn build(samples: &[f64], h: f64) -> Self {
        let (min, max) = samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        let origin = min - TAIL_BANDWIDTHS * h;
        let span = (max + TAIL_BANDWIDTHS * h) - origin;
        let mut step = h / NODES_PER_BANDWIDTH;
        let mut m = (span / step).ceil() as usize + 2;
        if m > MAX_NODES {
            m = MAX_NODES;
            step = span / (m - 2) as f64;
        }

        let mut weights = vec![0.0; m];
        for &x in samples {
            let pos = (x - origin) / step;
            let j = (pos.floor() as usize).min(m - 2);
            let frac = pos - j as f64;
            weights[j] += 1.0 - frac;
            weights[j + 1] += frac;
        }
        let occupied: Vec<usize> = (0..m).filter(|&j| weights[j] > 0.0).collect();

        let n = samples.len() as f64;
        let inv_two_h2 = 1.0 / (2.0 * h * h);
        let norm = n * h * (2.0 * std::f64::consts::PI).sqrt();
        let taps = ((TAIL_BANDWIDTHS * h) / step).ceil() as usize;
        let kernel: Vec<f64> = (0..=taps)
            .map(|t| {
                let u = t as f64 * step;
                (-u * u * inv_two_h2).exp() / norm
            })
            .collect();
        let mut density = vec![0.0; m];
        for &i in &occupied {
            let w = weights[i];
            let lo = i.saturating_sub(taps);
            let hi = (i + taps).min(m - 1);
            for (j, d) in density.iter_mut().enumerate().take(hi + 1).skip(lo) {
                *d += w * kernel[i.abs_diff(j)];
            }
        }

        Self {
            origin,
            step,
            weights,
            occupied,
            density,
            log_norm: norm.ln(),
            log_n: n.ln(),
            inv_two_h2,
            floor: (-0.5 * 49.0f64).exp() / norm,
        }
    }

    fn log_density(&self, x: f64) -> f64 {
        let pos = (x - self.origin) / self.step;
        let last = (self.density.len() - 1) as f64;
        if (0.0..=last).contains(&pos) {
            let j = (pos.floor() as usize).min(self.density.len() - 2);
            let frac = pos - j as f64;
            let d = self.density[j] * (1.0 - frac) + self.density[j + 1] * frac;
            if d > self.floor {
                return d.ln();
            }
        }
        self.tail_log_density(x)
    }

    /// Exact log-sum-exp over the binned weights, scanning outwards from `x`.
    fn tail_log_density(&self, x: f64) -> f64 {
        let node_pos = |i: usize| self.origin + i as f64 * self.step;
        let split = self.occupied.partition_point(|&i| node_pos(i) < x);
        // running (max, scaled sum) of a log-sum-exp
        let mut acc = (f64::NEG_INFINITY, 0.0);
        let add = |acc: &mut (f64, f64), z: f64| {
            if z > acc.0 {
                acc.1 = acc.1 * (acc.0 - z).exp() + 1.0;
                acc.0 = z;
            } else {
                acc.1 += (z - acc.0).exp();
            }
        };
        // walk one side until even a full-weight node could not matter
        for &i in self.occupied[..split].iter().rev() {
            let q = -(x - node_pos(i)).powi(2) * self.inv_two_h2;
            if q + self.log_n < acc.0 - 40.0 {
                break;
            }
            add(&mut acc, q + self.weights[i].ln());
        }
        for &i in &self.occupied[split..] {
            let q = -(x - node_pos(i)).powi(2) * self.inv_two_h2;
            if q + self.log_n < acc.0 - 40.0 {
                break;
            }
            add(&mut acc, q + self.weights[i].ln());
        }
        acc.0 + acc.1.ln() - self.log_norm
    }
}

#[derive(Debug, Clone)]
enum Evaluator {
    Exact(Vec<f64>),
    Binned(BinnedKde),
}

/// Per-class likelihood model.
#[derive(Debug, Clone)]
pub struct ClassDensity {
    n: usize,
    h: f64,
    eval: Evaluator,
}

impl ClassDensity {
    pub fn new(samples: &[f64], h: f64) -> Result<Self> {
        validate(samples, h)?;
        let eval = if samples.len() <= EXACT_LIMIT {
            Evaluator::Exact(samples.to_vec())
        } else {
            Evaluator::Binned(BinnedKde::build(samples, h))
        };
        Ok(Self {
            n: samples.len(),
            h,
            eval,
        })
    }

    pub fn with_rule_of_thumb(samples: &[f64]) -> Result<Self> {
        Self::new(samples, class_bandwidth(samples)?)
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn log_density(&self, x: f64) -> f64 {
        match &self.eval {
            Evaluator::Exact(s) => exact_log_density(s, self.h, x),
            Evaluator::Binned(b) => b.log_density(x),
        }
    }
}

fn class_index(class: Presence) -> usize {
    match class {
        Presence::Present => 0,
        Presence::Absent => 1,
    }
}

/// Priors plus per-class densities for one view. Index 0 is present, 1 absent.
#[derive(Debug, Clone)]
pub struct ViewClassifier {
    view: View,
    class_priors: [f64; 2],
    densities: [ClassDensity; 2],
}

/// JSON-friendly description of a fitted classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSummary {
    pub view: View,
    pub prior_present: f64,
    pub prior_absent: f64,
    pub bandwidth_present: f64,
    pub bandwidth_absent: f64,
    pub samples_present: usize,
    pub samples_absent: usize,
}

impl ViewClassifier {
    pub fn new(view: View, class_priors: [f64; 2], densities: [ClassDensity; 2]) -> Result<Self> {
        let valid = class_priors.iter().all(|p| (0.0..=1.0).contains(p))
            && (class_priors[0] + class_priors[1] - 1.0).abs() < 1e-9;
        if !valid {
            return Err(Error::InvalidConfig(format!(
                "class priors {class_priors:?} must lie in [0, 1] and sum to 1"
            )));
        }
        Ok(Self {
            view,
            class_priors,
            densities,
        })
    }

    pub fn view(&self) -> View {
        self.view
    }

    pub fn class_priors(&self) -> [f64; 2] {
        self.class_priors
    }

    pub fn density(&self, class: Presence) -> &ClassDensity {
        &self.densities[class_index(class)]
    }

    /// `ln p(C=c) + ln p(X=x | C=c)`.
    pub fn log_score(&self, class: Presence, x: f64) -> f64 {
        let i = class_index(class);
        self.class_priors[i].ln() + self.densities[i].log_density(x)
    }

    pub fn classify(&self, x: f64) -> Presence {
        bayes_decision(
            self.log_score(Presence::Present, x),
            self.log_score(Presence::Absent, x),
        )
    }

    pub fn summary(&self) -> ClassifierSummary {
        let [p, a] = &self.densities;
        ClassifierSummary {
            view: self.view,
            prior_present: self.class_priors[0],
            prior_absent: self.class_priors[1],
            bandwidth_present: p.bandwidth(),
            bandwidth_absent: a.bandwidth(),
            samples_present: p.len(),
            samples_absent: a.len(),
        }
    }
}

/// Argmax of two log posteriors; an exact tie goes to presence.
pub fn bayes_decision(log_score_present: f64, log_score_absent: f64) -> Presence {
    if log_score_present >= log_score_absent {
        Presence::Present
    } else {
        Presence::Absent
    }
}

/// Fit one view on the labeled part of `labels`; unlabeled indices are ignored.
pub fn fit_view(view: View, values: &[f64], labels: &LabelPartition) -> Result<ViewClassifier> {
    if values.len() != labels.n_total() {
        return Err(Error::LengthMismatch {
            left: values.len(),
            right: labels.n_total(),
        });
    }
    let mut present = Vec::new();
    let mut absent = Vec::new();
    for (x, slot) in values.iter().zip(labels.slots()) {
        match slot {
            Some(Presence::Present) => present.push(*x),
            Some(Presence::Absent) => absent.push(*x),
            None => {}
        }
    }
    if present.is_empty() || absent.is_empty() {
        return Err(Error::DegenerateLabeling {
            reason: format!(
                "view {view}: {} present and {} absent labels",
                present.len(),
                absent.len()
            ),
            diagnostics: None,
        });
    }
    let total = (present.len() + absent.len()) as f64;
    let priors = [present.len() as f64 / total, absent.len() as f64 / total];
    ViewClassifier::new(
        view,
        priors,
        [
            ClassDensity::with_rule_of_thumb(&present)?,
            ClassDensity::with_rule_of_thumb(&absent)?,
        ],
    )
}

/// Median of binary view labels; an even split falls back to `prior`.
pub fn majority_vote(labels: &[Presence], prior: Presence) -> Presence {
    let present = labels.iter().filter(|l| l.is_present()).count();
    let absent = labels.len() - present;
    match present.cmp(&absent) {
        std::cmp::Ordering::Greater => Presence::Present,
        std::cmp::Ordering::Less => Presence::Absent,
        std::cmp::Ordering::Equal => prior,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use Presence::{Absent, Present};

    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

    #[test]
    fn single_kernel_at_center() {
        let d = kde_density(&[0.0], 1.0, 0.0).unwrap();
        assert!((d - INV_SQRT_2PI).abs() < 1e-15);
    }

    #[test]
    fn two_kernels_at_midpoint() {
        let d = kde_density(&[-1.0, 1.0], 1.0, 0.0).unwrap();
        let expected = INV_SQRT_2PI * (-0.5f64).exp();
        assert!((d - expected).abs() < 1e-15);
        assert!((expected - 0.24197).abs() < 1e-5);
    }

    #[test]
    fn density_errors() {
        assert!(matches!(kde_density(&[], 1.0, 0.0), Err(Error::EmptyClass)));
        assert!(matches!(kde_density(&[1.0], 0.0, 0.0), Err(Error::InvalidBandwidth(_))));
        assert!(matches!(kde_density(&[1.0], -2.0, 0.0), Err(Error::InvalidBandwidth(_))));
    }

    #[test]
    fn bandwidth_rule_of_thumb() {
        // 16 points at -a and 16 at +a give a sample sd of exactly 10
        let a = (100.0 * 31.0 / 32.0f64).sqrt();
        let samples: Vec<f64> = (0..32).map(|i| if i % 2 == 0 { -a } else { a }).collect();
        let h = select_bandwidth(&samples).unwrap();
        assert!((h - 5.3).abs() < 1e-12, "{h}");

        let doubled: Vec<f64> = samples.iter().map(|x| 2.0 * x + 7.0).collect();
        assert!((select_bandwidth(&doubled).unwrap() - 2.0 * h).abs() < 1e-12);

        assert_eq!(select_bandwidth(&[4.0; 10]).unwrap(), 0.1);
        assert_eq!(select_bandwidth(&[250.0; 10]).unwrap(), 2.5);
        assert!(select_bandwidth(&[1.0]).is_err());
    }

    #[test]
    fn priors_follow_label_counts() {
        let values: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let slots: Vec<Option<Presence>> =
            (0..100).map(|i| Some(if i < 75 { Present } else { Absent })).collect();
        let clf = fit_view(View::Mac, &values, &LabelPartition::from_slots(slots)).unwrap();
        assert_eq!(clf.class_priors(), [0.75, 0.25]);

        let mut slots: Vec<Option<Presence>> =
            (0..100).map(|i| Some(if i % 2 == 0 { Present } else { Absent })).collect();
        slots[0] = None;
        slots[1] = None;
        let clf = fit_view(View::Mac, &values, &LabelPartition::from_slots(slots)).unwrap();
        assert_eq!(clf.class_priors(), [0.5, 0.5]);
        assert_eq!(clf.summary().samples_present, 49);
    }

    #[test]
    fn empty_class_is_degenerate() {
        let labels = LabelPartition::fully_labeled(&[Present, Present]);
        let err = fit_view(View::Sd, &[1.0, 2.0], &labels).unwrap_err();
        assert!(err.to_string().starts_with("degenerate labeling"));
    }

    #[test]
    fn separated_classes_fit_their_own_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for i in 0..600 {
            let (center, label) = if i % 3 == 0 { (100.0, Present) } else { (0.0, Absent) };
            values.push(center + rng.random_range(-0.1..0.1));
            labels.push(label);
        }
        let clf = fit_view(View::MeanPower, &values, &LabelPartition::fully_labeled(&labels)).unwrap();
        for (x, y) in values.iter().zip(&labels) {
            assert_eq!(clf.classify(*x), *y);
        }
    }

    #[test]
    fn decision_rule_examples() {
        let half = 0.5f64.ln();
        assert_eq!(bayes_decision(half + 0.3f64.ln(), half + 0.1f64.ln()), Present);
        assert_eq!(bayes_decision(half + 0.1f64.ln(), half + 0.3f64.ln()), Absent);
        assert_eq!(bayes_decision(-3.0, -3.0), Present);

        let clf = ViewClassifier::new(
            View::Mac,
            [0.5, 0.5],
            [ClassDensity::new(&[0.0], 1.0).unwrap(), ClassDensity::new(&[10.0], 1.0).unwrap()],
        )
        .unwrap();
        assert_eq!(clf.classify(2.0), Present);
        assert_eq!(clf.classify(8.0), Absent);
        // deep tails of both classes still decide by distance
        assert_eq!(clf.classify(-1e4), Present);
        assert_eq!(clf.classify(1e4), Absent);
    }

    #[test]
    fn vote_examples() {
        assert_eq!(majority_vote(&[Present, Present, Absent], Absent), Present);
        assert_eq!(majority_vote(&[Present, Absent, Present, Absent], Absent), Absent);
        assert_eq!(majority_vote(&[Present, Absent, Present, Absent], Present), Present);
        assert_eq!(majority_vote(&[Absent; 4], Present), Absent);
    }

    #[test]
    fn binned_matches_exact_in_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let samples: Vec<f64> = (0..5000)
            .map(|i| if i % 4 == 0 { 60.0 + 3.0 * rng.random::<f64>() } else { 5.0 + rng.random::<f64>() })
            .collect();
        let h = select_bandwidth(&samples).unwrap();
        let binned = ClassDensity::new(&samples, h).unwrap();
        for k in 0..400 {
            let x = -10.0 + k as f64 * 0.2;
            let exact = kde_log_density(&samples, h, x).unwrap();
            let approx = binned.log_density(x);
            if exact > -30.0 {
                assert!((exact - approx).abs() <= 0.003 * exact.abs() + 0.01, "x={x} {exact} {approx}");
            } else {
                // tail: binning moves mass by at most half a node
                assert!((exact - approx).abs() < 0.05 * exact.abs() + 1.0, "x={x} {exact} {approx}");
            }
        }
    }

    proptest! {
        #[test]
        fn density_symmetric_about_symmetric_samples(
            half in proptest::collection::vec(0.1f64..20.0, 1..20),
            center in -50.0f64..50.0,
            delta in 0.0f64..30.0,
            h in 0.1f64..5.0,
        ) {
            let samples: Vec<f64> = half.iter().flat_map(|d| [center - d, center + d]).collect();
            let a = kde_density(&samples, h, center + delta).unwrap();
            let b = kde_density(&samples, h, center - delta).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(b) + 1e-300);
        }

        #[test]
        fn decision_invariant_under_common_scaling(
            lp in -50.0f64..0.0, la in -50.0f64..0.0, shift in -100.0f64..100.0,
        ) {
            prop_assert_eq!(bayes_decision(lp, la), bayes_decision(lp + shift, la + shift));
        }

        #[test]
        fn vote_permutation_invariant(mut labels in proptest::collection::vec(any::<bool>(), 1..9), prior in any::<bool>()) {
            let to = |b: bool| if b { Present } else { Absent };
            let prior = to(prior);
            let votes: Vec<Presence> = labels.iter().map(|&b| to(b)).collect();
            let before = majority_vote(&votes, prior);
            labels.reverse();
            labels.rotate_left(1);
            let shuffled: Vec<Presence> = labels.iter().map(|&b| to(b)).collect();
            prop_assert_eq!(before, majority_vote(&shuffled, prior));
        }
    }
}
