//! Shared data model: batches, verdicts, sequences and detector configuration.

use std::fmt;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{DriftError, Result};
use crate::tab_repr::TabParams;
use crate::trees::BoostParams;

/// A class identifier. Ids within one benchmark are contiguous from 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassLabel {
    pub id: usize,
    pub display_name: Option<String>,
}

/// A dense feature matrix with optional class labels, one per row.
///
/// Incoming batches are usually unlabeled at detection time; labels on them
/// are only read by the evaluation code.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch {
    pub features: Array2<f64>,
    pub labels: Option<Vec<usize>>,
    pub batch_id: usize,
}

impl LabeledBatch {
    pub fn new(features: Array2<f64>, labels: Option<Vec<usize>>) -> Self {
        Self {
            features,
            labels,
            batch_id: 0,
        }
    }

    /// Builds a batch from row vectors, rejecting ragged input.
    pub fn from_rows(rows: &[Vec<f64>], labels: Option<Vec<usize>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(DriftError::InvalidBatch(format!(
                    "ragged row {i}: {} columns, expected {cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        let features = Array2::from_shape_vec((rows.len(), cols), data)
            .map_err(|e| DriftError::InvalidBatch(e.to_string()))?;
        Ok(Self::new(features, labels))
    }

    pub fn with_batch_id(mut self, id: usize) -> Self {
        self.batch_id = id;
        self
    }

    pub fn rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn cols(&self) -> usize {
        self.features.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.rows() == 0
    }

    pub fn labels(&self) -> Result<&[usize]> {
        self.labels.as_deref().ok_or(DriftError::MissingLabels)
    }

    /// One past the largest label id, or 0 when unlabeled or empty.
    pub fn class_count(&self) -> usize {
        self.labels
            .as_ref()
            .and_then(|l| l.iter().max())
            .map_or(0, |m| m + 1)
    }

    /// The same features with labels stripped.
    pub fn unlabeled(&self) -> Self {
        Self {
            features: self.features.clone(),
            labels: None,
            batch_id: self.batch_id,
        }
    }

    /// Rows at `indices`, in the given order (duplicates allowed).
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select(Axis(0), indices),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            batch_id: self.batch_id,
        }
    }

    /// Row-wise concatenation. Labels survive only if both sides carry them.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.cols() != other.cols() {
            return Err(DriftError::ColumnMismatch {
                expected: self.cols(),
                actual: other.cols(),
            });
        }
        let features = ndarray::concatenate(Axis(0), &[self.features.view(), other.features.view()])
            .map_err(|e| DriftError::InvalidBatch(e.to_string()))?;
        let labels = match (&self.labels, &other.labels) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        Ok(Self {
            features,
            labels,
            batch_id: self.batch_id,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    LabelLengthMismatch { labels: usize, rows: usize },
    NonFiniteFeature { row: usize, col: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LabelLengthMismatch { labels, rows } => {
                write!(f, "label length mismatch ({labels} labels, {rows} rows)")
            }
            Violation::NonFiniteFeature { row, col } => {
                write!(f, "non-finite feature at row {row}, column {col}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Validation {
    Ok,
    Violations(Vec<Violation>),
}

impl Validation {
    pub fn is_ok(&self) -> bool {
        matches!(self, Validation::Ok)
    }
}

/// Collects every invariant violation of `batch`. Violations are data, not errors.
pub fn validate_batch(batch: &LabeledBatch) -> Validation {
    let mut violations = Vec::new();
    if let Some(labels) = &batch.labels {
        if labels.len() != batch.rows() {
            violations.push(Violation::LabelLengthMismatch {
                labels: labels.len(),
                rows: batch.rows(),
            });
        }
    }
    for ((row, col), v) in batch.features.indexed_iter() {
        if !v.is_finite() {
            violations.push(Violation::NonFiniteFeature { row, col });
        }
    }
    if violations.is_empty() {
        Validation::Ok
    } else {
        Validation::Violations(violations)
    }
}

/// The outcome of one detection call: the retrain trigger plus the score behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftVerdict {
    pub retrain: bool,
    /// Expected utility for the learning-based detectors, a raw statistic for baselines.
    pub utility: f64,
    pub threshold_used: f64,
    pub detector_name: String,
}

/// A reference batch (with labels) followed by incoming batches and their drift ground truth.
#[derive(Debug, Clone)]
pub struct BatchSequence {
    pub reference: LabeledBatch,
    pub incoming: Vec<LabeledBatch>,
    pub ground_truth_drift: Vec<bool>,
    pub drift_onset: Option<usize>,
}

impl BatchSequence {
    pub fn new(reference: LabeledBatch, incoming: Vec<LabeledBatch>, ground_truth_drift: Vec<bool>) -> Result<Self> {
        if reference.labels.is_none() {
            return Err(DriftError::MissingLabels);
        }
        if incoming.len() != ground_truth_drift.len() {
            return Err(DriftError::LengthMismatch {
                left: incoming.len(),
                right: ground_truth_drift.len(),
            });
        }
        let drift_onset = ground_truth_drift.iter().position(|&d| d);
        Ok(Self {
            reference,
            incoming,
            ground_truth_drift,
            drift_onset,
        })
    }

    pub fn len(&self) -> usize {
        self.incoming.len()
    }

    pub fn is_empty(&self) -> bool {
        self.incoming.is_empty()
    }
}

/// Settings shared by the two learning-based detectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub utility_threshold: f64,
    pub train_epochs: usize,
    pub retrain_epochs: usize,
    pub confidence_keep_fraction: f64,
    pub rng_seed: u64,
    pub boost: BoostParams,
    pub tab: TabParams,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            utility_threshold: 0.05,
            train_epochs: 5,
            retrain_epochs: 5,
            confidence_keep_fraction: 0.8,
            rng_seed: 0,
            boost: BoostParams::default(),
            tab: TabParams::default(),
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.utility_threshold) {
            return Err(DriftError::InvalidParameter(format!(
                "utility_threshold {} outside [0,1]",
                self.utility_threshold
            )));
        }
        if self.train_epochs == 0 || self.retrain_epochs == 0 {
            return Err(DriftError::InvalidParameter("epoch counts must be positive".into()));
        }
        if !(self.confidence_keep_fraction > 0.0 && self.confidence_keep_fraction <= 1.0) {
            return Err(DriftError::InvalidParameter(format!(
                "confidence_keep_fraction {} outside (0,1]",
                self.confidence_keep_fraction
            )));
        }
        Ok(())
    }
}
