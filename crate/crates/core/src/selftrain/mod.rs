//! Self-training from a schedule prior: per-view classifiers relabel every
//! window, a sampled update forms the next training set, and a noise
//! estimate of each training set drives early stopping.

mod engine;
mod noise;
mod schedule;
mod update;

pub use engine::{run_self_training, IterationDiagnostics, IterationRecord, SelfTrainConfig, StopReason, TrainOutput};
pub use noise::{
    estimate_noise, learning_utility, predict_next, search_rates, stopping_metric, Counts, EstimatorSettings,
    NoiseEstimate, PriorQuantity, RatePrior, RATE_GRID,
};
pub use schedule::{init_from_prior, PriorSchedule};
pub use update::{update_labels, UpdateRates};
