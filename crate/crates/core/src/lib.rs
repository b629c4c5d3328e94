//! Zero-training presence detection from individual plug-load power traces.
//!
//! The crate is organised around the pipeline a run goes through:
//!
//! - [`trace`]: power traces, windowing, presence series and label partitions.
//! - [`features`]: per-window power level, edge and ripple features.
//! - [`kde`]: per-view Gaussian-kernel naive-Bayes classifiers and the vote.
//! - [`selftrain`]: the self-training loop with noise estimation and early stopping.
//! - [`baselines`]: supervised threshold models with grid-optimised thresholds.
//! - [`sensors`]: decision rules for ultrasonic, chair-acceleration and WiFi data.
//! - [`sim`]: plug-load and sensor simulator with ground truth.
//! - [`eval`]: detection rates, hourly absence profiles and iteration curves.
//! - [`io`]: CSV and JSON formats shared with the command-line front end.

pub mod baselines;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod kde;
pub mod selftrain;
pub mod sensors;
pub mod sim;
pub mod trace;

pub use error::{Error, ErrorKind, Result};
pub use trace::{LabelPartition, PowerTrace, Presence, PresenceSeries, Sample, WindowSpec};
