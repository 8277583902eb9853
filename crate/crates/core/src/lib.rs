//! Batch-level concept drift detection for deployed tabular classifiers.
//!
//! Two detectors decide whether a newly arrived batch warrants retraining by how
//! much it disturbs a proxy learner: [`cfpt`] (pseudo-labels plus a warm-started
//! boosted ensemble) and [`tabautodrift`] (representation transfer from masked
//! pretraining). Five classical stream detectors live in [`baselines`]; [`bench`]
//! scores all of them on batch sequences from [`datasets`].

pub mod baselines;
pub mod bench;
pub mod cfpt;
pub mod datasets;
pub mod error;
pub mod evaluation;
pub mod pseudo_label;
pub mod tab_repr;
pub mod tabautodrift;
pub mod trees;
pub mod types;

pub use error::{DriftError, Result};
pub use types::{BatchSequence, DetectorConfig, DriftVerdict, LabeledBatch};
