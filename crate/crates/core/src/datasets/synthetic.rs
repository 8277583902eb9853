//! Gaussian-mixture drift scenarios and synthetic sources for the batching protocols.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{DriftError, Result};
use crate::types::{BatchSequence, LabeledBatch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftKind {
    None,
    /// P(X) moves, P(y|X) kept: every component mean shifts by `magnitude`.
    Covariate,
    /// P(y) moves: class weights decay exponentially at rate `magnitude`.
    PriorProbability,
    /// P(y|X) moves: a `magnitude` fraction of labels is remapped cyclically.
    Concept,
    /// Covariate and concept shift together.
    Dataset,
    /// One extra mixture component, absent from the reference.
    NewClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticDriftScenario {
    pub kind: DriftKind,
    pub magnitude: f64,
    pub class_count: usize,
    pub feature_count: usize,
    pub samples_per_batch: usize,
    /// Standard deviation of the class means, in within-class std units.
    pub class_separation: f64,
    pub rng_seed: u64,
}

impl Default for SyntheticDriftScenario {
    fn default() -> Self {
        Self {
            kind: DriftKind::None,
            magnitude: 0.0,
            class_count: 3,
            feature_count: 8,
            samples_per_batch: 500,
            class_separation: 2.0,
            rng_seed: 0,
        }
    }
}

/// One unit-variance isotropic Gaussian per class.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    pub means: Array2<f64>,
}

impl GaussianMixture {
    pub fn random(components: usize, feature_count: usize, separation: f64, rng: &mut ChaCha8Rng) -> Self {
        let spread = Normal::new(0.0, separation.max(f64::MIN_POSITIVE)).expect("finite separation");
        Self {
            means: Array2::from_shape_simple_fn((components, feature_count), || spread.sample(rng)),
        }
    }

    /// Draws `counts[k]` rows from component `k`, every feature offset by `shift`, in shuffled order.
    pub fn sample(&self, counts: &[usize], shift: f64, rng: &mut ChaCha8Rng) -> LabeledBatch {
        let mut labels: Vec<usize> = counts.iter().enumerate().flat_map(|(k, &c)| std::iter::repeat(k).take(c)).collect();
        labels.shuffle(rng);
        let d = self.means.ncols();
        let mut x = Array2::zeros((labels.len(), d));
        for (i, &k) in labels.iter().enumerate() {
            for j in 0..d {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                x[[i, j]] = self.means[[k, j]] + shift + z;
            }
        }
        LabeledBatch::new(x, Some(labels))
    }
}

/// Splits `n` into `k` counts differing by at most one, larger counts first.
pub fn balanced_counts(n: usize, k: usize) -> Vec<usize> {
    (0..k).map(|i| n / k + usize::from(i < n % k)).collect()
}

/// Largest-remainder rounding of `weights` to integer counts summing to `n`.
fn weighted_counts(n: usize, weights: &[f64]) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let short = n - counts.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        counts[i] += 1;
    }
    counts
}

fn validate(s: &SyntheticDriftScenario) -> Result<()> {
    if !(s.magnitude >= 0.0 && s.magnitude.is_finite()) {
        return Err(DriftError::InvalidParameter(format!("magnitude {} must be finite and non-negative", s.magnitude)));
    }
    if s.class_count < 2 || s.feature_count == 0 {
        return Err(DriftError::InvalidParameter("need at least 2 classes and 1 feature".into()));
    }
    if s.samples_per_batch < s.class_count + 1 {
        return Err(DriftError::InvalidParameter(format!(
            "samples_per_batch {} too small for {} classes",
            s.samples_per_batch, s.class_count
        )));
    }
    if matches!(s.kind, DriftKind::Concept | DriftKind::Dataset) && s.magnitude > 1.0 {
        return Err(DriftError::InvalidParameter("label-flip fraction above 1".into()));
    }
    Ok(())
}

/// Reference batch and a second batch drawn according to `scenario.kind`.
pub fn generate_synthetic(scenario: &SyntheticDriftScenario) -> Result<(LabeledBatch, LabeledBatch)> {
    validate(scenario)?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.rng_seed);
    let mixture = scenario_mixture(scenario, &mut rng);
    let d0 = draw_batch(&mixture, scenario, DriftKind::None, &mut rng);
    let d1 = draw_batch(&mixture, scenario, scenario.kind, &mut rng);
    Ok((d0.with_batch_id(0), d1.with_batch_id(1)))
}

/// A reference batch plus `batches` incoming ones from one fixed mixture. Every third
/// incoming batch (D2, D5, ...) is drawn with `scenario.kind`, the rest without drift;
/// with kind `none` nothing is flagged.
pub fn scenario_sequence(scenario: &SyntheticDriftScenario, batches: usize) -> Result<BatchSequence> {
    validate(scenario)?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.rng_seed);
    let mixture = scenario_mixture(scenario, &mut rng);
    let reference = draw_batch(&mixture, scenario, DriftKind::None, &mut rng).with_batch_id(0);
    let mut incoming = Vec::with_capacity(batches);
    let mut flags = Vec::with_capacity(batches);
    for i in 1..=batches {
        let drift = scenario.kind != DriftKind::None && i % 3 == 2;
        let kind = if drift { scenario.kind } else { DriftKind::None };
        incoming.push(draw_batch(&mixture, scenario, kind, &mut rng).with_batch_id(i));
        flags.push(drift);
    }
    BatchSequence::new(reference, incoming, flags)
}

fn scenario_mixture(scenario: &SyntheticDriftScenario, rng: &mut ChaCha8Rng) -> GaussianMixture {
    let components = scenario.class_count + usize::from(scenario.kind == DriftKind::NewClass);
    GaussianMixture::random(components, scenario.feature_count, scenario.class_separation, rng)
}

fn draw_batch(mixture: &GaussianMixture, scenario: &SyntheticDriftScenario, kind: DriftKind, rng: &mut ChaCha8Rng) -> LabeledBatch {
    let k = scenario.class_count;
    let n = scenario.samples_per_batch;
    let m = scenario.magnitude;
    let balanced = balanced_counts(n, k);
    match kind {
        DriftKind::None => mixture.sample(&balanced, 0.0, rng),
        DriftKind::Covariate => mixture.sample(&balanced, m, rng),
        DriftKind::PriorProbability => {
            let w: Vec<f64> = (0..k).map(|c| (-m * c as f64 / (k - 1) as f64).exp()).collect();
            mixture.sample(&weighted_counts(n, &w), 0.0, rng)
        }
        DriftKind::Concept => relabel(mixture.sample(&balanced, 0.0, rng), m, k, rng),
        DriftKind::Dataset => relabel(mixture.sample(&balanced, m, rng), m.min(1.0), k, rng),
        DriftKind::NewClass => mixture.sample(&balanced_counts(n, k + 1), 0.0, rng),
    }
}

/// Remaps `fraction` of the labels through the cyclic permutation `y -> y+1 mod k`.
fn relabel(mut batch: LabeledBatch, fraction: f64, k: usize, rng: &mut ChaCha8Rng) -> LabeledBatch {
    let n = batch.rows();
    let flips = ((fraction * n as f64).round() as usize).min(n);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    if let Some(labels) = batch.labels.as_mut() {
        for &i in &idx[..flips] {
            labels[i] = (labels[i] + 1) % k;
        }
    }
    batch
}

/// A pool of `rows_per_class` rows for each of `class_count` Gaussian components,
/// for replaying the new-class batching protocol.
pub fn gaussian_mixture_source(
    class_count: usize,
    feature_count: usize,
    rows_per_class: usize,
    separation: f64,
    rng_seed: u64,
) -> LabeledBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mixture = GaussianMixture::random(class_count, feature_count, separation, &mut rng);
    mixture.sample(&vec![rows_per_class; class_count], 0.0, &mut rng)
}

/// Signal-strength-like series: class 0 is normal operation, every other class
/// carries one anomaly pattern (step, spikes, extra noise, slow decay; later
/// classes repeat the patterns at greater strength).
pub fn link_series_source(class_count: usize, rows_per_class: usize, length: usize, rng_seed: u64) -> LabeledBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let level = Normal::new(-60.0, 1.5).expect("valid");
    let mut labels = Vec::with_capacity(class_count * rows_per_class);
    let mut data = Vec::with_capacity(class_count * rows_per_class * length);
    for class in 0..class_count {
        let strength = 1.0 + ((class.max(1) - 1) / 4) as f64 * 0.5;
        for _ in 0..rows_per_class {
            let base = level.sample(&mut rng);
            let noisy = class > 0 && (class - 1) % 4 == 2;
            let sigma = if noisy { 3.0 * strength } else { 1.0 };
            let onset = rng.gen_range(length / 6..length * 5 / 6);
            let step = rng.gen_range(8.0..14.0) * strength;
            let slope = rng.gen_range(0.03..0.06) * strength;
            let mut ar = 0.0;
            for t in 0..length {
                ar = 0.7 * ar + sigma * rng.sample::<f64, _>(rand_distr::StandardNormal);
                let mut v = base + ar;
                if class > 0 {
                    match (class - 1) % 4 {
                        0 if t >= onset => v -= step,
                        1 if rng.gen_bool(0.05) => v -= rng.gen_range(15.0..25.0) * strength,
                        3 => v -= slope * t as f64,
                        _ => {}
                    }
                }
                data.push(v);
            }
            labels.push(class);
        }
    }
    let features = Array2::from_shape_vec((labels.len(), length), data).expect("consistent shape");
    LabeledBatch::new(features, Some(labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(kind: DriftKind, magnitude: f64) -> SyntheticDriftScenario {
        SyntheticDriftScenario {
            kind,
            magnitude,
            samples_per_batch: 3000,
            rng_seed: 5,
            ..SyntheticDriftScenario::default()
        }
    }

    fn column_mean(b: &LabeledBatch) -> f64 {
        b.features.mean().unwrap()
    }

    #[test]
    fn counts_helpers() {
        assert_eq!(balanced_counts(10, 3), [4, 3, 3]);
        let c = weighted_counts(10, &[1.0, 1.0, 2.0]);
        assert_eq!(c.iter().sum::<usize>(), 10);
        assert_eq!(c[2], 5);
    }

    #[test]
    fn no_drift_batches_share_a_distribution() {
        let (d0, d1) = generate_synthetic(&scenario(DriftKind::None, 0.0)).unwrap();
        let a: Vec<f64> = d0.features.column(0).to_vec();
        let b: Vec<f64> = d1.features.column(0).to_vec();
        assert!(ks_statistic(&a, &b) < 0.05);
        assert!((column_mean(&d0) - column_mean(&d1)).abs() < 0.1);
    }

    #[test]
    fn covariate_shift_moves_the_mean() {
        let (d0, d1) = generate_synthetic(&scenario(DriftKind::Covariate, 1.0)).unwrap();
        assert!((column_mean(&d1) - column_mean(&d0) - 1.0).abs() < 0.1);
        assert_eq!(d0.labels().unwrap().len(), d1.labels().unwrap().len());
    }

    #[test]
    fn prior_and_new_class_shift_the_labels() {
        let (_, d1) = generate_synthetic(&scenario(DriftKind::PriorProbability, 2.0)).unwrap();
        let l = d1.labels().unwrap();
        let first = l.iter().filter(|&&y| y == 0).count();
        let last = l.iter().filter(|&&y| y == 2).count();
        assert!(first > 4 * last);
        let (d0, d1) = generate_synthetic(&scenario(DriftKind::NewClass, 0.0)).unwrap();
        assert!(d0.labels().unwrap().iter().all(|&y| y < 3));
        assert_eq!(d1.labels().unwrap().iter().filter(|&&y| y == 3).count(), 750);
    }

    #[test]
    fn concept_shift_flips_the_requested_fraction() {
        let s = scenario(DriftKind::Concept, 0.4);
        let (_, plain) = generate_synthetic(&scenario(DriftKind::None, 0.0)).unwrap();
        let (_, flipped) = generate_synthetic(&s).unwrap();
        assert_eq!(plain.rows(), flipped.rows());
        let err = generate_synthetic(&SyntheticDriftScenario { magnitude: 1.5, ..s });
        assert!(matches!(err, Err(DriftError::InvalidParameter(_))));
    }

    #[test]
    fn invalid_scenarios_are_rejected() {
        for s in [
            SyntheticDriftScenario { magnitude: -1.0, ..Default::default() },
            SyntheticDriftScenario { class_count: 1, ..Default::default() },
            SyntheticDriftScenario { feature_count: 0, ..Default::default() },
            SyntheticDriftScenario { samples_per_batch: 3, ..Default::default() },
        ] {
            assert!(generate_synthetic(&s).is_err());
        }
    }

    #[test]
    fn scenario_sequence_flags_every_third_batch() {
        let s = SyntheticDriftScenario { samples_per_batch: 60, ..scenario(DriftKind::NewClass, 0.0) };
        let seq = scenario_sequence(&s, 7).unwrap();
        assert_eq!(seq.ground_truth_drift, [false, true, false, false, true, false, false]);
        for (b, &d) in seq.incoming.iter().zip(&seq.ground_truth_drift) {
            assert_eq!(b.labels().unwrap().contains(&3), d);
        }
        let quiet = scenario_sequence(&SyntheticDriftScenario { kind: DriftKind::None, ..s }, 7).unwrap();
        assert!(quiet.ground_truth_drift.iter().all(|&d| !d));
    }

    #[test]
    fn link_series_shapes() {
        let b = link_series_source(5, 4, 30, 0);
        assert_eq!((b.rows(), b.cols()), (20, 30));
        assert!(b.features.iter().all(|v| v.is_finite()));
        assert_eq!(link_series_source(5, 4, 30, 0).features, b.features);
    }

    /// Two-sample Kolmogorov-Smirnov statistic.
    fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
        let mut a = a.to_vec();
        let mut b = b.to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (mut i, mut j, mut d) = (0, 0, 0.0f64);
        while i < a.len() && j < b.len() {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
        }
        d
    }
}
