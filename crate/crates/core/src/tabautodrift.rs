//! TabAutoDrift: pretrain an attentive learner on the incoming batch without labels,
//! then train two classifiers on the labeled reference batch, one starting from the
//! pretrained encoder and one from scratch. A large gap between their per-epoch
//! macro-F1 means the incoming batch taught the encoder something the reference
//! batch does not agree with. The deployed model is never consulted.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cfpt::{three_sigma, UtilityTrace};
use crate::error::{DriftError, Result};
use crate::tab_repr::{pretrain_masked, train_classifier, Init};
use crate::types::{DetectorConfig, DriftVerdict, LabeledBatch};

pub const TABAUTODRIFT_NAME: &str = "tabautodrift";

pub fn tabautodrift_detect(d0: &LabeledBatch, d1: &LabeledBatch, cfg: &DetectorConfig) -> Result<(DriftVerdict, UtilityTrace)> {
    let trace = tabautodrift_trace(d0, d1, cfg)?;
    let verdict = DriftVerdict {
        retrain: trace.utility >= cfg.utility_threshold,
        utility: trace.utility,
        threshold_used: cfg.utility_threshold,
        detector_name: TABAUTODRIFT_NAME.to_string(),
    };
    Ok((verdict, trace))
}

/// `f1_train` holds the fresh run, `f1_retrain` the transferred run.
pub fn tabautodrift_trace(d0: &LabeledBatch, d1: &LabeledBatch, cfg: &DetectorConfig) -> Result<UtilityTrace> {
    cfg.validate()?;
    d0.labels()?;
    if d1.is_empty() {
        return Err(DriftError::EmptyBatch);
    }
    let tab = &cfg.tab;
    let (pretrained, _) = pretrain_masked(d1, tab.mask_ratio, tab.pretrain_epochs, cfg.rng_seed, tab)?;
    let (_, transferred) = train_classifier(Init::Transfer(&pretrained), d0, cfg.train_epochs, cfg.rng_seed, tab)?;
    let (_, fresh) = train_classifier(Init::Fresh, d0, cfg.train_epochs, cfg.rng_seed, tab)?;
    UtilityTrace::new(fresh.macro_f1, transferred.macro_f1)
}

/// No-drift alarm threshold: mean + 3 standard deviations of the utility when the
/// pretraining batch is a bootstrap resample of `d0` itself.
///
/// Unlike CFPT's half splits, the supervised pair is trained on the full `d0` and the
/// pretraining batch keeps `d0`'s size, so every calibration run takes the same
/// number of optimisation steps as a real detection call.
pub fn calibrate_threshold(d0: &LabeledBatch, cfg: &DetectorConfig, resamples: usize) -> Result<f64> {
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
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        rng.set_stream(1000 + r as u64);
        let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        values.push(tabautodrift_trace(d0, &d0.select(&idx).unlabeled(), cfg)?.utility);
    }
    Ok(three_sigma(&values))
}
