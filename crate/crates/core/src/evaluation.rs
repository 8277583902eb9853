//! Scoring: macro-F1, the retraining reward, alarm confusion counts, and trimmed aggregation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DriftError, Result};
use crate::trees::RandomForest;
use crate::types::{DriftVerdict, LabeledBatch};

/// Unweighted mean of per-class F1 over classes `0..class_count`.
///
/// A class that never occurs in `truth` or `pred` still counts, with F1 = 0.
pub fn macro_f1(truth: &[usize], pred: &[usize], class_count: usize) -> Result<f64> {
    let classes: Vec<usize> = (0..class_count).collect();
    macro_f1_over(truth, pred, &classes)
}

/// Macro-F1 restricted to an explicit class set.
pub fn macro_f1_over(truth: &[usize], pred: &[usize], classes: &[usize]) -> Result<f64> {
    if truth.len() != pred.len() {
        return Err(DriftError::LengthMismatch {
            left: truth.len(),
            right: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(DriftError::EmptyBatch);
    }
    if classes.is_empty() {
        return Err(DriftError::InvalidParameter("empty class set".into()));
    }
    let width = classes.iter().max().map_or(0, |m| m + 1);
    let mut tp = vec![0usize; width];
    let mut fp = vec![0usize; width];
    let mut fn_ = vec![0usize; width];
    for (&t, &p) in truth.iter().zip(pred) {
        if t == p {
            if t < width {
                tp[t] += 1;
            }
        } else {
            if p < width {
                fp[p] += 1;
            }
            if t < width {
                fn_[t] += 1;
            }
        }
    }
    let total: f64 = classes
        .iter()
        .map(|&c| {
            let denom = 2 * tp[c] + fp[c] + fn_[c];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .sum();
    Ok(total / classes.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardParams {
    /// Reward for a correct non-alarm.
    pub t_s: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self { t_s: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    TruePositive,
    TrueNegative,
    FalsePositive,
    FalseNegative,
}

impl Decision {
    pub fn classify(alarm: bool, drift: bool) -> Self {
        match (alarm, drift) {
            (true, true) => Decision::TruePositive,
            (false, false) => Decision::TrueNegative,
            (true, false) => Decision::FalsePositive,
            (false, true) => Decision::FalseNegative,
        }
    }
}

pub fn reward(decision: Decision, f1_gain: f64, params: RewardParams) -> f64 {
    match decision {
        Decision::TruePositive => f1_gain,
        Decision::TrueNegative => params.t_s,
        Decision::FalsePositive => f1_gain - params.t_s,
        Decision::FalseNegative => -f1_gain,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlarmConfusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl AlarmConfusion {
    pub fn record(&mut self, decision: Decision) {
        match decision {
            Decision::TruePositive => self.tp += 1,
            Decision::TrueNegative => self.tn += 1,
            Decision::FalsePositive => self.fp += 1,
            Decision::FalseNegative => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn precision(&self) -> Option<f64> {
        let d = self.tp + self.fp;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    /// Harmonic mean of precision and recall; 0 when both are 0, `None` when either is undefined.
    pub fn f1(&self) -> Option<f64> {
        let (p, r) = (self.precision()?, self.recall()?);
        if p + r == 0.0 {
            Some(0.0)
        } else {
            Some(2.0 * p * r / (p + r))
        }
    }
}

/// Drops one maximum and one minimum and averages the rest.
pub fn aggregate_trimmed(values: &[f64]) -> Result<f64> {
    if values.len() < 3 {
        return Err(DriftError::InvalidParameter(format!(
            "trimmed aggregation needs at least 3 values, got {}",
            values.len()
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let kept = &sorted[1..sorted.len() - 1];
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}

/// Sums per-batch rewards and tallies alarm outcomes.
pub fn score_sequence(
    alarms: &[bool],
    truth: &[bool],
    gains: &[f64],
    params: RewardParams,
) -> Result<(f64, AlarmConfusion)> {
    if alarms.len() != truth.len() {
        return Err(DriftError::LengthMismatch {
            left: alarms.len(),
            right: truth.len(),
        });
    }
    if gains.len() != truth.len() {
        return Err(DriftError::LengthMismatch {
            left: gains.len(),
            right: truth.len(),
        });
    }
    let mut confusion = AlarmConfusion::default();
    let mut total = 0.0;
    for ((&alarm, &drift), &gain) in alarms.iter().zip(truth).zip(gains) {
        let d = Decision::classify(alarm, drift);
        confusion.record(d);
        total += reward(d, gain, params);
    }
    Ok((total, confusion))
}

/// Convenience wrapper over [`score_sequence`] for detector verdicts.
pub fn score_verdicts(
    verdicts: &[DriftVerdict],
    truth: &[bool],
    gains: &[f64],
    params: RewardParams,
) -> Result<(f64, AlarmConfusion)> {
    let alarms: Vec<bool> = verdicts.iter().map(|v| v.retrain).collect();
    score_sequence(&alarms, truth, gains, params)
}

pub const F1_GAIN_TRAIN_FRACTION: f64 = 0.7;

/// Macro-F1 a deployed forest would gain by retraining on `d0` plus 70% of `d_new`,
/// measured on the remaining 30% and clamped to [0,1].
///
/// Scored over the classes observed in the holdout or predicted by either model.
pub fn f1_gain(m0: &RandomForest, d0: &LabeledBatch, d_new: &LabeledBatch, rng_seed: u64) -> Result<f64> {
    let labels = d_new.labels()?;
    let n = d_new.rows();
    if n < 4 {
        return Err(DriftError::InsufficientData(format!(
            "f1_gain needs at least 4 labeled rows, got {n}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(rng_seed));
    let n_train = ((n as f64) * F1_GAIN_TRAIN_FRACTION).round() as usize;
    let n_train = n_train.clamp(1, n - 1);
    let (train_idx, hold_idx) = idx.split_at(n_train);
    let mut train_idx = train_idx.to_vec();
    let mut hold_idx = hold_idx.to_vec();
    train_idx.sort_unstable();
    hold_idx.sort_unstable();

    let union = d0.concat(&d_new.select(&train_idx))?;
    let retrained = m0.refit(&union)?;
    let holdout = d_new.select(&hold_idx);
    let truth: Vec<usize> = hold_idx.iter().map(|&i| labels[i]).collect();
    let before = m0.predict(&holdout)?;
    let after = retrained.predict(&holdout)?;

    let mut classes: Vec<usize> = truth.iter().chain(&before).chain(&after).copied().collect();
    classes.sort_unstable();
    classes.dedup();
    let gain = macro_f1_over(&truth, &after, &classes)? - macro_f1_over(&truth, &before, &classes)?;
    Ok(gain.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn macro_f1_hand_example() {
        let f = macro_f1(&[0, 0, 1, 1], &[0, 1, 1, 1], 2).unwrap();
        assert!((f - (2.0 / 3.0 + 0.8) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn macro_f1_edges() {
        assert_eq!(macro_f1(&[0, 1, 2, 1], &[0, 1, 2, 1], 3).unwrap(), 1.0);
        assert_eq!(macro_f1(&[0, 1, 1, 0], &[1, 0, 0, 1], 2).unwrap(), 0.0);
        assert!(macro_f1(&[0, 1], &[0], 2).is_err());
        assert!(macro_f1(&[], &[], 2).is_err());
        // a declared class that never appears pulls the mean down
        assert_eq!(macro_f1(&[0, 0], &[0, 0], 2).unwrap(), 0.5);
    }

    #[test]
    fn reward_branches() {
        let p = RewardParams::default();
        assert_eq!(reward(Decision::TrueNegative, 0.0, p), 0.1);
        assert_eq!(reward(Decision::TruePositive, 0.3, p), 0.3);
        assert!((reward(Decision::FalsePositive, 0.02, p) - (-0.08)).abs() < 1e-15);
        assert_eq!(reward(Decision::FalseNegative, 0.3, p), -0.3);
    }

    #[test]
    fn trimmed_mean() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(aggregate_trimmed(&v).unwrap(), 5.5);
        assert!((aggregate_trimmed(&[0.7; 10]).unwrap() - 0.7).abs() < 1e-15);
        assert!(aggregate_trimmed(&[1.0, 2.0]).is_err());
        // ties: only one instance of each extreme is dropped
        assert_eq!(aggregate_trimmed(&[1.0, 1.0, 4.0, 4.0]).unwrap(), 2.5);
    }

    #[test]
    fn score_sequence_examples() {
        let truth: Vec<bool> = (0..30).map(|i| i % 3 == 2).collect();
        let gains = vec![0.2; 30];
        let (total, c) = score_sequence(&truth, &truth, &gains, RewardParams::default()).unwrap();
        assert!((total - 4.0).abs() < 1e-12);
        assert_eq!((c.tp, c.tn, c.fp, c.fn_), (10, 20, 0, 0));

        let wrong_on_drift: Vec<bool> = vec![false; 30];
        let (total, c) = score_sequence(&wrong_on_drift, &truth, &gains, RewardParams::default()).unwrap();
        assert!((total - (20.0 * 0.1 - 10.0 * 0.2)).abs() < 1e-12);
        assert_eq!(c.fn_, 10);

        let (total, c) = score_sequence(&[], &[], &[], RewardParams::default()).unwrap();
        assert_eq!((total, c), (0.0, AlarmConfusion::default()));
        assert!(score_sequence(&[true], &[], &[], RewardParams::default()).is_err());
    }

    #[test]
    fn confusion_metrics() {
        let c = AlarmConfusion { tp: 9, tn: 20, fp: 0, fn_: 1 };
        assert_eq!(c.precision(), Some(1.0));
        assert_eq!(c.recall(), Some(0.9));
        assert!((c.f1().unwrap() - 18.0 / 19.0).abs() < 1e-12);
        assert_eq!(AlarmConfusion::default().precision(), None);
    }

    fn decision_strategy() -> impl Strategy<Value = Decision> {
        prop_oneof![
            Just(Decision::TruePositive),
            Just(Decision::TrueNegative),
            Just(Decision::FalsePositive),
            Just(Decision::FalseNegative),
        ]
    }

    proptest! {
        #[test]
        fn score_is_sum_of_rewards(cases in prop::collection::vec((any::<bool>(), any::<bool>(), 0.0f64..1.0), 0..60), t_s in 0.01f64..1.0) {
            let params = RewardParams { t_s };
            let alarms: Vec<bool> = cases.iter().map(|c| c.0).collect();
            let truth: Vec<bool> = cases.iter().map(|c| c.1).collect();
            let gains: Vec<f64> = cases.iter().map(|c| c.2).collect();
            let (total, conf) = score_sequence(&alarms, &truth, &gains, params).unwrap();
            let expected: f64 = cases.iter().map(|&(a, d, g)| reward(Decision::classify(a, d), g, params)).sum();
            prop_assert!((total - expected).abs() < 1e-9);
            prop_assert_eq!(conf.total(), cases.len());
        }

        #[test]
        fn classify_is_exhaustive(a in any::<bool>(), d in any::<bool>(), g in 0.0f64..1.0, _dec in decision_strategy()) {
            let dec = Decision::classify(a, d);
            let r = reward(dec, g, RewardParams::default());
            let n_matching = [Decision::TruePositive, Decision::TrueNegative, Decision::FalsePositive, Decision::FalseNegative]
                .iter().filter(|&&x| x == dec).count();
            prop_assert_eq!(n_matching, 1);
            prop_assert!(r.is_finite());
        }

        #[test]
        fn trimmed_is_permutation_invariant(mut v in prop::collection::vec(-100.0f64..100.0, 3..20), seed in any::<u64>()) {
            let a = aggregate_trimmed(&v).unwrap();
            v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let b = aggregate_trimmed(&v).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
