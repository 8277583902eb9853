//! Confidence-filtered pseudo-labeling of an unlabeled batch with a frozen model.

use crate::error::{DriftError, Result};
use crate::trees::{Prediction, RandomForest};
use crate::types::LabeledBatch;

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabeledBatch {
    /// Kept rows, in source order, labeled with the model's prediction.
    pub batch: LabeledBatch,
    /// Strictly increasing indices into the source batch.
    pub kept_indices: Vec<usize>,
    pub mean_confidence: f64,
}

/// Keeps the `keep_fraction` most confident predictions of `model` on `batch`.
///
/// The model is only read. Ties in confidence go to the lower row index.
pub fn pseudo_label(model: &RandomForest, batch: &LabeledBatch, keep_fraction: f64) -> Result<PseudoLabeledBatch> {
    if batch.is_empty() {
        return Err(DriftError::EmptyBatch);
    }
    let preds = model.predict_with_confidence(batch)?;
    select_confident(batch, &preds, keep_fraction)
}

/// Selection step on precomputed predictions, one per row of `batch`.
pub fn select_confident(batch: &LabeledBatch, preds: &[Prediction], keep_fraction: f64) -> Result<PseudoLabeledBatch> {
    if batch.is_empty() {
        return Err(DriftError::EmptyBatch);
    }
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(DriftError::InvalidParameter(format!(
            "keep_fraction {keep_fraction} outside (0,1]"
        )));
    }
    if preds.len() != batch.rows() {
        return Err(DriftError::LengthMismatch {
            left: preds.len(),
            right: batch.rows(),
        });
    }
    let n = batch.rows();
    let keep = ((keep_fraction * n as f64).ceil() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| preds[b].confidence.total_cmp(&preds[a].confidence).then(a.cmp(&b)));
    let mut kept_indices = order[..keep].to_vec();
    kept_indices.sort_unstable();

    let mut out = batch.select(&kept_indices);
    out.labels = Some(kept_indices.iter().map(|&i| preds[i].class).collect());
    let mean_confidence = kept_indices.iter().map(|&i| preds[i].confidence).sum::<f64>() / keep as f64;
    Ok(PseudoLabeledBatch {
        batch: out,
        kept_indices,
        mean_confidence,
    })
}
