use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::noise::{
    estimate_noise, learning_utility, search_rates, EstimatorSettings, NoiseEstimate, PriorQuantity, RatePrior,
};
use super::schedule::{init_from_prior, PriorSchedule};
use super::update::{update_labels, UpdateRates};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::kde::{fit_view, majority_vote};
use crate::trace::{LabelPartition, Presence, PresenceSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelfTrainConfig {
    pub alpha1: f64,
    pub alpha2: f64,
    pub max_iter: usize,
    pub epsilon_grid_step: f64,
    /// Upper end of the error line search.
    pub epsilon_max: f64,
    pub seed: u64,
    pub stop_on_negative_phi: bool,
    pub rate_search: bool,
    pub sample_unlabeled: bool,
    /// Keep every round's vote so a misclassification curve can be drawn.
    pub retain_labelings: bool,
    /// Two prior quantities for the noise estimator. `None` uses the
    /// schedule's present-window count and a type-one rate equal to the
    /// hypothesis error.
    pub priors: Option<[PriorQuantity; 2]>,
}

impl Default for SelfTrainConfig {
    fn default() -> Self {
        Self {
            alpha1: 0.5,
            alpha2: 0.5,
            max_iter: 30,
            epsilon_grid_step: 0.005,
            epsilon_max: 0.5,
            seed: 0,
            stop_on_negative_phi: true,
            rate_search: false,
            sample_unlabeled: true,
            retain_labelings: false,
            priors: None,
        }
    }
}

impl SelfTrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        for (name, a) in [("alpha1", self.alpha1), ("alpha2", self.alpha2)] {
            if !(0.0..=1.0).contains(&a) {
                return bad(format!("{name} = {a} outside [0, 1]"));
            }
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        if !(self.epsilon_grid_step > 0.0 && self.epsilon_grid_step <= 0.1) {
            return bad(format!("epsilon_grid_step = {} outside (0, 0.1]", self.epsilon_grid_step));
        }
        if !(self.epsilon_max > 0.0 && self.epsilon_max <= 1.0) {
            return bad(format!("epsilon_max = {} outside (0, 1]", self.epsilon_max));
        }
        Ok(())
    }
}

/// One row per labeled set `L^k`; row 0 is the schedule prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub l1: usize,
    pub l2: usize,
    pub u: usize,
    /// Error of the hypothesis trained on the previous set.
    pub eps_hat: Option<f64>,
    pub eta_hat: f64,
    pub u_k: f64,
    pub phi: f64,
    /// The stopping indicator fired on this row.
    pub stopped: bool,
    /// Rates that produced this set from the previous one.
    pub alpha1: f64,
    pub alpha2: f64,
}

impl IterationRecord {
    pub fn labeled(&self) -> usize {
        self.l1 + self.l2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIter,
    NegativePhi,
    EstimatorInfeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationDiagnostics {
    pub records: Vec<IterationRecord>,
    pub stop_reason: Option<StopReason>,
    /// Row whose labeled set trained the reported labeling.
    pub best_iteration: usize,
    /// Vote of round k+1 (trained on `L^k`) at index k, when retained.
    #[serde(skip)]
    pub labelings: Option<Vec<Vec<Presence>>>,
}

impl IterationDiagnostics {
    /// Diagnostics CSV: `iter,l1,l2,u,eps_hat,eta_hat,u_k,phi,stopped`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,l1,l2,u,eps_hat,eta_hat,u_k,phi,stopped\n");
        for r in &self.records {
            let eps = r.eps_hat.map(|e| e.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.iter, r.l1, r.l2, r.u, eps, r.eta_hat, r.u_k, r.phi, r.stopped as u8
            ));
        }
        out
    }
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub presence: PresenceSeries,
    pub diagnostics: IterationDiagnostics,
}

fn vote_all(features: &FeatureMatrix, labels: &LabelPartition, prior: &[Presence]) -> Result<Vec<Presence>> {
    let views = features.views().to_vec();
    let per_view: Vec<Vec<Presence>> = views
        .par_iter()
        .map(|&view| {
            let column = features.column(view);
            let clf = fit_view(view, &column, labels)?;
            Ok(column.iter().map(|&x| clf.classify(x)).collect())
        })
        .collect::<Result<_>>()?;
    let mut votes = Vec::with_capacity(per_view.len());
    Ok((0..prior.len())
        .map(|i| {
            votes.clear();
            votes.extend(per_view.iter().map(|v| v[i]));
            majority_vote(&votes, prior[i])
        })
        .collect())
}

fn record(iter: usize, labels: &LabelPartition, eps_hat: Option<f64>, eta: f64, u_prev: Option<f64>, rates: (f64, f64)) -> IterationRecord {
    let s = labels.sizes();
    let m = s.labeled();
    let u_k = learning_utility(m, eta);
    let phi = u_prev.map_or(0.0, |p| u_k - p);
    IterationRecord {
        iter,
        l1: s.l1 as usize,
        l2: s.l2 as usize,
        u: s.u as usize,
        eps_hat,
        eta_hat: eta,
        u_k,
        phi,
        stopped: u_prev.is_some() && phi <= 0.0,
        alpha1: rates.0,
        alpha2: rates.1,
    }
}

struct Step {
    next: LabelPartition,
    estimate: NoiseEstimate,
    eta_next: f64,
}

/// Zero-training presence inference over a feature matrix.
///
/// Starting from the schedule, each round fits one classifier per view on
/// the current labeled set, relabels every window by majority vote, samples
/// the next labeled set, and estimates its noise rate. The run stops after
/// `max_iter` rounds, when the noise estimator has no solution, or when the
/// stopping metric turns nonpositive. The reported labeling is the vote of
/// the classifiers trained on the set with the largest utility, the
/// earliest such set on ties.
pub fn run_self_training(
    features: &FeatureMatrix,
    schedule: &PriorSchedule,
    cfg: &SelfTrainConfig,
) -> Result<TrainOutput> {
    cfg.validate()?;
    let starts = features.window_starts();
    let prior = schedule.labels_for(starts);
    let priors = cfg.priors.unwrap_or([
        PriorQuantity::ClassOneTotal(schedule.present_count(starts) as f64),
        PriorQuantity::TypeOneRate(RatePrior::Epsilon),
    ]);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rates = (cfg.alpha1, cfg.alpha2);

    let mut labels = init_from_prior(schedule, starts)?;
    // no evidence about the prior's noise yet
    let mut records = vec![record(0, &labels, None, 0.5, None, rates)];
    let mut votes: Vec<Vec<Presence>> = Vec::new();
    let mut stop_reason = None;

    let with_diag = |err: Error, records: &[IterationRecord], reason: Option<StopReason>| match err {
        Error::DegenerateLabeling { reason: why, .. } => Error::DegenerateLabeling {
            reason: why,
            diagnostics: Some(Box::new(IterationDiagnostics {
                records: records.to_vec(),
                stop_reason: reason,
                best_iteration: best_row(records),
                labelings: None,
            })),
        },
        other => other,
    };

    for k in 0..cfg.max_iter {
        let vote = vote_all(features, &labels, &prior).map_err(|e| with_diag(e, &records, None))?;
        let vote_partition = LabelPartition::fully_labeled(&vote);
        votes.push(vote);

        let u_cur = records[k].u_k;
        let step = |rates: (f64, f64), rng: &mut ChaCha8Rng| -> Result<Step> {
            let update = UpdateRates {
                alpha1: rates.0,
                alpha2: rates.1,
                sample_unlabeled: cfg.sample_unlabeled,
            };
            let next = update_labels(&labels, &vote_partition, update, rng)?;
            let settings = EstimatorSettings {
                alpha1: rates.0,
                alpha2: rates.1,
                grid_step: cfg.epsilon_grid_step,
                eps_max: cfg.epsilon_max,
            };
            let estimate = estimate_noise(labels.sizes(), next.sizes(), &settings, &priors)?;
            let forward = estimate.counts_hat.forward(estimate.epsilon_hat, rates.0, rates.1);
            let eta_next = forward.noise_rate().clamp(0.0, 0.5);
            Ok(Step {
                next,
                estimate,
                eta_next,
            })
        };

        let mut current = match step(rates, &mut rng) {
            Ok(s) => s,
            Err(Error::EstimatorInfeasible) => {
                stop_reason = Some(StopReason::EstimatorInfeasible);
                break;
            }
            Err(e) => return Err(e),
        };
        let mut row = record(k + 1, &current.next, Some(current.estimate.epsilon_hat), current.eta_next, Some(u_cur), rates);

        if row.stopped && cfg.stop_on_negative_phi && cfg.rate_search {
            let found = search_rates(&current.estimate.counts_hat, current.estimate.epsilon_hat, u_cur, rates);
            if let Some(new_rates) = found.filter(|r| *r != rates) {
                match step(new_rates, &mut rng) {
                    Ok(s) => {
                        rates = new_rates;
                        current = s;
                        row = record(k + 1, &current.next, Some(current.estimate.epsilon_hat), current.eta_next, Some(u_cur), rates);
                    }
                    Err(Error::EstimatorInfeasible) => {}
                    Err(e) => return Err(e),
                }
            }
        }

        let stop_now = row.stopped && cfg.stop_on_negative_phi;
        records.push(row);
        labels = current.next;
        if stop_now {
            stop_reason = Some(StopReason::NegativePhi);
            break;
        }
        if k + 1 == cfg.max_iter {
            stop_reason = Some(StopReason::MaxIter);
            break;
        }
        let s = labels.sizes();
        if s.l1 == 0.0 || s.l2 == 0.0 {
            let why = format!("round {}: {} present and {} absent labels", k + 1, s.l1, s.l2);
            return Err(with_diag(
                Error::DegenerateLabeling {
                    reason: why,
                    diagnostics: None,
                },
                &records,
                None,
            ));
        }
    }

    let best = best_row(&records);
    let final_labels = match votes.get(best) {
        Some(v) => v.clone(),
        // best is the last set, which has not been voted on yet
        None => vote_all(features, &labels, &prior).map_err(|e| with_diag(e, &records, stop_reason))?,
    };
    let presence = PresenceSeries::new(starts.to_vec(), final_labels)?;
    Ok(TrainOutput {
        presence,
        diagnostics: IterationDiagnostics {
            records,
            stop_reason,
            best_iteration: best,
            labelings: cfg.retain_labelings.then_some(votes),
        },
    })
}

fn best_row(records: &[IterationRecord]) -> usize {
    let mut best = 0;
    for (i, r) in records.iter().enumerate() {
        if r.l1 > 0 && r.l2 > 0 && r.u_k > records[best].u_k {
            best = i;
        }
    }
    best
}
