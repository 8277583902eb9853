//! The two batching protocols: new classes appearing every third batch, and
//! anomaly classes appearing after a quiet stretch.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::synthetic::balanced_counts;
use crate::error::{DriftError, Result};
use crate::types::{BatchSequence, LabeledBatch};

pub const FINGERPRINTING_BATCHES: usize = 31;
pub const FINGERPRINTING_REFERENCE_CLASSES: usize = 3;
pub const FINGERPRINTING_NEW_CLASSES: usize = 10;
pub const LINKS_BATCHES: usize = 9;
pub const LINKS_MIN_CLASSES: usize = 5;

/// Hands out rows of one class without replacement, reshuffling when exhausted.
struct ClassPool {
    rows: Vec<usize>,
    cursor: usize,
}

impl ClassPool {
    fn take(&mut self, count: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        (0..count)
            .map(|_| {
                if self.cursor == self.rows.len() {
                    self.rows.shuffle(rng);
                    self.cursor = 0;
                }
                self.cursor += 1;
                self.rows[self.cursor - 1]
            })
            .collect()
    }
}

fn pools(source: &LabeledBatch, rng: &mut ChaCha8Rng) -> Result<BTreeMap<usize, ClassPool>> {
    let mut map: BTreeMap<usize, ClassPool> = BTreeMap::new();
    for (i, &y) in source.labels()?.iter().enumerate() {
        map.entry(y).or_insert_with(|| ClassPool { rows: Vec::new(), cursor: 0 }).rows.push(i);
    }
    for p in map.values_mut() {
        p.rows.shuffle(rng);
    }
    Ok(map)
}

/// Draws a batch with equal shares of `classes` (source ids), relabelled through `relabel`.
fn draw(
    source: &LabeledBatch,
    pools: &mut BTreeMap<usize, ClassPool>,
    classes: &[usize],
    relabel: &dyn Fn(usize) -> usize,
    size: usize,
    rng: &mut ChaCha8Rng,
) -> LabeledBatch {
    let mut rows: Vec<usize> = Vec::with_capacity(size);
    for (&c, n) in classes.iter().zip(balanced_counts(size, classes.len())) {
        rows.extend(pools.get_mut(&c).expect("class checked").take(n, rng));
    }
    rows.shuffle(rng);
    let mut batch = source.select(&rows);
    if let Some(l) = batch.labels.as_mut() {
        l.iter_mut().for_each(|y| *y = relabel(*y));
    }
    batch
}

/// Takes the reference rows out of their pools so no later batch reuses them.
fn carve_reference(
    pools: &mut BTreeMap<usize, ClassPool>,
    classes: &[usize],
    size: usize,
) -> Result<Vec<usize>> {
    let mut rows = Vec::with_capacity(size);
    for (&c, n) in classes.iter().zip(balanced_counts(size, classes.len())) {
        let pool = pools.get_mut(&c).expect("class checked");
        if pool.rows.len() <= n {
            return Err(DriftError::InsufficientData(format!(
                "class {c} has {} rows, the reference alone needs {n} plus at least one for later batches",
                pool.rows.len()
            )));
        }
        rows.extend(pool.rows.drain(..n));
    }
    Ok(rows)
}

/// 31 equal batches: D0 holds three classes, every third incoming batch
/// (D2, D5, ..., D29) holds one class never seen before, the others resample the
/// reference classes in equal shares. Labels are remapped: reference classes become 0..3, new
/// classes 3.. in order of appearance.
pub fn build_fingerprinting_protocol(source: &LabeledBatch, rng_seed: u64) -> Result<BatchSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut pools = pools(source, &mut rng)?;
    let needed = FINGERPRINTING_REFERENCE_CLASSES + FINGERPRINTING_NEW_CLASSES;
    if pools.len() < needed {
        return Err(DriftError::InsufficientData(format!("need {needed} classes, source has {}", pools.len())));
    }
    let size = source.rows() / FINGERPRINTING_BATCHES;
    if size < 2 * (FINGERPRINTING_REFERENCE_CLASSES + 1) {
        return Err(DriftError::InsufficientData(format!("batch size {size} too small")));
    }
    let mut classes: Vec<usize> = pools.keys().copied().collect();
    classes.shuffle(&mut rng);
    let reference_classes = classes[..FINGERPRINTING_REFERENCE_CLASSES].to_vec();
    let new_classes = classes[FINGERPRINTING_REFERENCE_CLASSES..needed].to_vec();
    let relabel = |y: usize| -> usize {
        reference_classes
            .iter()
            .chain(&new_classes)
            .position(|&c| c == y)
            .expect("only protocol classes are drawn")
    };

    let mut ref_rows = carve_reference(&mut pools, &reference_classes, size)?;
    ref_rows.shuffle(&mut rng);
    let mut reference = source.select(&ref_rows);
    if let Some(l) = reference.labels.as_mut() {
        l.iter_mut().for_each(|y| *y = relabel(*y));
    }

    let mut incoming = Vec::with_capacity(FINGERPRINTING_BATCHES - 1);
    let mut flags = Vec::with_capacity(FINGERPRINTING_BATCHES - 1);
    let mut next_new = 0;
    for i in 1..FINGERPRINTING_BATCHES {
        let drift = i % 3 == 2;
        let classes = if drift {
            next_new += 1;
            vec![new_classes[next_new - 1]]
        } else {
            reference_classes.clone()
        };
        incoming.push(draw(source, &mut pools, &classes, &relabel, size, &mut rng).with_batch_id(i));
        flags.push(drift);
    }
    BatchSequence::new(reference, incoming, flags)
}

/// Nine equal batches from a series source whose class 0 is normal operation.
/// D0 holds normal series and the first anomaly class; D1-D3 resample those two;
/// D4-D8 each hold one further anomaly class (cycling when fewer than five exist).
pub fn build_links_protocol(source: &LabeledBatch, rng_seed: u64) -> Result<BatchSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut pools = pools(source, &mut rng)?;
    if !pools.contains_key(&0) {
        return Err(DriftError::InsufficientData("no normal class (id 0)".into()));
    }
    if pools.len() < LINKS_MIN_CLASSES {
        return Err(DriftError::InsufficientData(format!(
            "need a normal class and {} anomaly classes, source has {} classes",
            LINKS_MIN_CLASSES - 1,
            pools.len()
        )));
    }
    let size = source.rows() / LINKS_BATCHES;
    let anomalies: Vec<usize> = pools.keys().copied().filter(|&c| c != 0).collect();
    let reference_classes = vec![0, anomalies[0]];
    let fresh = &anomalies[1..];
    let mut ref_rows = carve_reference(&mut pools, &reference_classes, size)?;
    ref_rows.shuffle(&mut rng);
    let reference = source.select(&ref_rows);
    let keep = |y: usize| y;
    let mut incoming = Vec::with_capacity(LINKS_BATCHES - 1);
    let mut flags = Vec::with_capacity(LINKS_BATCHES - 1);
    for i in 1..LINKS_BATCHES {
        let drift = i >= 4;
        let classes = if drift {
            vec![fresh[(i - 4) % fresh.len()]]
        } else {
            reference_classes.clone()
        };
        incoming.push(draw(source, &mut pools, &classes, &keep, size, &mut rng).with_batch_id(i));
        flags.push(drift);
    }
    BatchSequence::new(reference, incoming, flags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::synthetic::{gaussian_mixture_source, link_series_source};

    #[test]
    fn fingerprinting_layout() {
        let source = gaussian_mixture_source(13, 4, 100, 1.5, 3);
        let seq = build_fingerprinting_protocol(&source, 9).unwrap();
        assert_eq!(seq.incoming.len(), FINGERPRINTING_BATCHES - 1);
        assert_eq!(seq.ground_truth_drift.iter().filter(|&&d| d).count(), 10);
        let size = source.rows() / FINGERPRINTING_BATCHES;
        assert_eq!(seq.reference.rows(), size);
        let mut ref_labels = seq.reference.labels().unwrap().to_vec();
        ref_labels.sort_unstable();
        ref_labels.dedup();
        assert_eq!(ref_labels, [0, 1, 2]);
        let mut next = 3;
        for (i, (b, &drift)) in seq.incoming.iter().zip(&seq.ground_truth_drift).enumerate() {
            assert_eq!(drift, (i + 1) % 3 == 2);
            assert_eq!(b.rows(), size);
            let labels = b.labels().unwrap();
            if drift {
                assert!(labels.iter().all(|&y| y == next));
                next += 1;
            } else {
                assert!(labels.iter().all(|&y| y < 3));
            }
        }
        let again = build_fingerprinting_protocol(&source, 9).unwrap();
        assert_eq!(again.incoming[4].features, seq.incoming[4].features);
    }

    #[test]
    fn links_layout() {
        let source = link_series_source(7, 30, 40, 1);
        let seq = build_links_protocol(&source, 2).unwrap();
        assert_eq!(seq.ground_truth_drift, [false, false, false, true, true, true, true, true]);
        let known = |y: usize| y == 0 || y == 1;
        assert!(seq.reference.labels().unwrap().iter().all(|&y| known(y)));
        for (b, &drift) in seq.incoming.iter().zip(&seq.ground_truth_drift) {
            assert_eq!(b.labels().unwrap().iter().all(|&y| known(y)), !drift);
        }
    }

    #[test]
    fn protocols_reject_thin_sources() {
        let few_classes = gaussian_mixture_source(5, 2, 100, 1.0, 0);
        assert!(matches!(build_fingerprinting_protocol(&few_classes, 0), Err(DriftError::InsufficientData(_))));
        let tiny = gaussian_mixture_source(13, 2, 3, 1.0, 0);
        assert!(matches!(build_fingerprinting_protocol(&tiny, 0), Err(DriftError::InsufficientData(_))));
        let few_anomalies = link_series_source(3, 30, 20, 0);
        assert!(matches!(build_links_protocol(&few_anomalies, 0), Err(DriftError::InsufficientData(_))));
    }
}
