//! Confidence-Filtered Pseudo-Label Transfer (CFPT).
//!
//! The deployed forest pseudo-labels its most confident rows of the incoming batch.
//! A proxy boosted ensemble is trained on the labeled reference batch, then warm-started
//! on the pseudo-labeled batch. The expected utility is the mean absolute gap between
//! the per-round macro-F1 of the two phases; a large gap means the new batch does not
//! fit what was learned from the reference.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DriftError, Result};
use crate::pseudo_label::select_confident;
use crate::trees::{BoostedEnsemble, Prediction, RandomForest};
use crate::types::{DetectorConfig, DriftVerdict, LabeledBatch};

pub const CFPT_NAME: &str = "cfpt";

/// Per-epoch macro-F1 of the two phases and the utility they imply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityTrace {
    pub f1_train: Vec<f64>,
    pub f1_retrain: Vec<f64>,
    pub utility: f64,
}

impl UtilityTrace {
    pub fn new(f1_train: Vec<f64>, f1_retrain: Vec<f64>) -> Result<Self> {
        let utility = compute_utility(&f1_train, &f1_retrain)?;
        Ok(Self {
            f1_train,
            f1_retrain,
            utility,
        })
    }
}

/// Mean absolute per-epoch difference between two macro-F1 traces.
pub fn compute_utility(f1_train: &[f64], f1_retrain: &[f64]) -> Result<f64> {
    if f1_train.len() != f1_retrain.len() {
        return Err(DriftError::LengthMismatch {
            left: f1_train.len(),
            right: f1_retrain.len(),
        });
    }
    if f1_train.is_empty() {
        return Err(DriftError::InvalidParameter("empty utility trace".into()));
    }
    if let Some(v) = f1_train.iter().chain(f1_retrain).find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(DriftError::InvalidParameter(format!("trace value {v} outside [0,1]")));
    }
    let sum: f64 = f1_train.iter().zip(f1_retrain).map(|(a, b)| (b - a).abs()).sum();
    Ok(sum / f1_train.len() as f64)
}

/// Stretches or cuts `trace` to `n` entries, repeating the last value.
pub(crate) fn align_trace(trace: &[f64], n: usize) -> Vec<f64> {
    (0..n).map(|i| trace[i.min(trace.len() - 1)]).collect()
}

pub fn cfpt_detect(
    m0: &RandomForest,
    d0: &LabeledBatch,
    d1: &LabeledBatch,
    cfg: &DetectorConfig,
) -> Result<(DriftVerdict, UtilityTrace)> {
    if d1.is_empty() {
        return Err(DriftError::EmptyBatch);
    }
    let preds = m0.predict_with_confidence(d1)?;
    let trace = cfpt_trace(d0, d1, &preds, cfg)?;
    let verdict = DriftVerdict {
        retrain: trace.utility >= cfg.utility_threshold,
        utility: trace.utility,
        threshold_used: cfg.utility_threshold,
        detector_name: CFPT_NAME.to_string(),
    };
    Ok((verdict, trace))
}

/// The utility computation given the deployed model's predictions on `d1`.
pub(crate) fn cfpt_trace(d0: &LabeledBatch, d1: &LabeledBatch, preds: &[Prediction], cfg: &DetectorConfig) -> Result<UtilityTrace> {
    cfg.validate()?;
    d0.labels()?;
    let pseudo = select_confident(&d1.unlabeled(), preds, cfg.confidence_keep_fraction)?;
    let class_count = d0.class_count().max(pseudo.batch.class_count());
    let mut proxy = BoostedEnsemble::new(class_count, cfg.boost);
    let f1_train = proxy.fit_stages(d0, cfg.train_epochs, d0)?;
    let f1_retrain = proxy.fit_stages(&pseudo.batch, cfg.retrain_epochs, &pseudo.batch)?;
    UtilityTrace::new(align_trace(&f1_train, cfg.retrain_epochs), f1_retrain)
}

/// No-drift alarm threshold: mean + 3 standard deviations of the utility over
/// `resamples` random half splits of the reference batch, clamped to [MIN_THRESHOLD, 1].
///
/// The held-out half is pseudo-labeled with the forest's out-of-bag votes, since
/// its rows were part of the forest's training set.
pub fn calibrate_threshold(m0: &RandomForest, d0: &LabeledBatch, cfg: &DetectorConfig, resamples: usize) -> Result<f64> {
    let preds = m0
        .oob_predict_with_confidence(d0)
        .or_else(|_| m0.predict_with_confidence(d0))?;
    calibrate_with(d0, resamples, cfg.rng_seed, |a, b, b_idx| {
        let p: Vec<Prediction> = b_idx.iter().map(|&i| preds[i]).collect();
        Ok(cfpt_trace(a, b, &p, cfg)?.utility)
    })
}

/// Shared calibration loop: `utility(reference_half, unlabeled_half, half_indices)`.
pub fn calibrate_with<F>(d0: &LabeledBatch, resamples: usize, seed: u64, mut utility: F) -> Result<f64>
where
    F: FnMut(&LabeledBatch, &LabeledBatch, &[usize]) -> Result<f64>,
{
    if resamples == 0 {
        return Err(DriftError::InvalidParameter("resamples must be positive".into()));
    }
    let n = d0.rows();
    if n < 4 {
        return Err(DriftError::InsufficientData(format!(
            "calibration needs at least 4 reference rows, got {n}"
        )));
    }
    let mut values = Vec::with_capacity(resamples);
    for r in 0..resamples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1000 + r as u64);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        let (a, b) = idx.split_at(n / 2);
        let mut a = a.to_vec();
        let mut b = b.to_vec();
        a.sort_unstable();
        b.sort_unstable();
        values.push(utility(&d0.select(&a), &d0.select(&b).unlabeled(), &b)?);
    }
    Ok(three_sigma(&values))
}

/// Calibrated thresholds never drop below this, so a perfectly stable reference
/// (all calibration utilities exactly zero) does not make every batch alarm.
pub const MIN_THRESHOLD: f64 = 1e-6;

pub(crate) fn three_sigma(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean + 3.0 * var.sqrt()).clamp(MIN_THRESHOLD, 1.0)
}
