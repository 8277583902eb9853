//! Bagged random forest: the deployed model whose vote fractions serve as confidence.

use ndarray::Axis;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{fit_class_tree, ClassTreeParams, Columns, DecisionTree};
use crate::error::{DriftError, Result};
use crate::types::LabeledBatch;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub tree_count: usize,
    pub max_depth: usize,
    /// `None` means round(sqrt(feature count)).
    pub features_per_split: Option<usize>,
    pub min_samples_split: usize,
    pub bootstrap: bool,
    pub rng_seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            tree_count: 100,
            max_depth: 16,
            features_per_split: None,
            min_samples_split: 2,
            bootstrap: true,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree<Vec<f64>>>,
    pub params: ForestParams,
    pub class_count: usize,
    pub feature_count: usize,
    /// Per tree, the multiplicity of each training row in its bootstrap sample.
    in_bag: Vec<Vec<u16>>,
}

/// Per-row prediction: winning class and the fraction of trees that voted for it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub class: usize,
    pub confidence: f64,
}

pub fn fit_random_forest(train: &LabeledBatch, tree_count: usize, max_depth: usize, rng_seed: u64) -> Result<RandomForest> {
    RandomForest::fit(
        train,
        ForestParams {
            tree_count,
            max_depth,
            rng_seed,
            ..ForestParams::default()
        },
    )
}

impl RandomForest {
    pub fn fit(train: &LabeledBatch, params: ForestParams) -> Result<Self> {
        if train.is_empty() {
            return Err(DriftError::EmptyTrainingSet);
        }
        let labels = train.labels()?;
        if params.tree_count == 0 || params.max_depth == 0 {
            return Err(DriftError::InvalidParameter("tree_count and max_depth must be positive".into()));
        }
        let n = train.rows();
        let d = train.cols();
        let class_count = train.class_count();
        let cols = Columns::new(&train.features);
        let mtry = params
            .features_per_split
            .unwrap_or_else(|| ((d as f64).sqrt().round() as usize).max(1))
            .clamp(1, d.max(1));
        let tree_params = ClassTreeParams {
            max_depth: params.max_depth,
            min_samples_split: params.min_samples_split,
            features_per_split: mtry,
        };
        let mut trees = Vec::with_capacity(params.tree_count);
        let mut in_bag = Vec::with_capacity(params.tree_count);
        for t in 0..params.tree_count {
            let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
            rng.set_stream(t as u64);
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut bag = vec![0u16; n];
            for &r in &rows {
                bag[r] = bag[r].saturating_add(1);
            }
            trees.push(fit_class_tree(&cols, labels, &rows, class_count, tree_params, &mut rng));
            in_bag.push(bag);
        }
        Ok(Self {
            trees,
            params,
            class_count,
            feature_count: d,
            in_bag,
        })
    }

    /// Fits a fresh forest with identical hyperparameters and seed on new data.
    pub fn refit(&self, train: &LabeledBatch) -> Result<Self> {
        Self::fit(train, self.params)
    }

    fn check_cols(&self, batch: &LabeledBatch) -> Result<()> {
        if batch.cols() != self.feature_count {
            return Err(DriftError::ColumnMismatch {
                expected: self.feature_count,
                actual: batch.cols(),
            });
        }
        Ok(())
    }

    fn tree_vote(tree: &DecisionTree<Vec<f64>>, row: ndarray::ArrayView1<'_, f64>) -> usize {
        argmax_lowest(tree.leaf(row))
    }

    fn tally(&self, votes: &[usize]) -> Prediction {
        let total: usize = votes.iter().sum();
        let class = argmax_lowest_usize(votes);
        Prediction {
            class,
            confidence: votes[class] as f64 / total as f64,
        }
    }

    pub fn predict_with_confidence(&self, batch: &LabeledBatch) -> Result<Vec<Prediction>> {
        self.check_cols(batch)?;
        let mut votes = vec![0usize; self.class_count.max(1)];
        Ok(batch
            .features
            .axis_iter(Axis(0))
            .map(|row| {
                votes.iter_mut().for_each(|v| *v = 0);
                for tree in &self.trees {
                    votes[Self::tree_vote(tree, row)] += 1;
                }
                self.tally(&votes)
            })
            .collect())
    }

    pub fn predict(&self, batch: &LabeledBatch) -> Result<Vec<usize>> {
        Ok(self.predict_with_confidence(batch)?.into_iter().map(|p| p.class).collect())
    }

    /// Out-of-bag predictions for the forest's own training rows.
    ///
    /// Each row is voted on only by trees whose bootstrap sample left it out; a row that
    /// every tree saw falls back to the full vote.
    pub fn oob_predict_with_confidence(&self, train: &LabeledBatch) -> Result<Vec<Prediction>> {
        self.check_cols(train)?;
        let n = self.in_bag.first().map_or(0, Vec::len);
        if train.rows() != n {
            return Err(DriftError::LengthMismatch {
                left: train.rows(),
                right: n,
            });
        }
        let mut votes = vec![0usize; self.class_count.max(1)];
        Ok(train
            .features
            .axis_iter(Axis(0))
            .enumerate()
            .map(|(i, row)| {
                votes.iter_mut().for_each(|v| *v = 0);
                for (tree, bag) in self.trees.iter().zip(&self.in_bag) {
                    if bag[i] == 0 {
                        votes[Self::tree_vote(tree, row)] += 1;
                    }
                }
                if votes.iter().all(|&v| v == 0) {
                    for tree in &self.trees {
                        votes[Self::tree_vote(tree, row)] += 1;
                    }
                }
                self.tally(&votes)
            })
            .collect())
    }
}

fn argmax_lowest(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn argmax_lowest_usize(v: &[usize]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::macro_f1;
    use crate::trees::tree::{fit_class_tree, ClassTreeParams, Columns};
    use ndarray::Array2;
    use rand_distr::{Distribution, Normal};

    fn blobs(n_per: usize, centers: &[f64], seed: u64) -> LabeledBatch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for (k, &c) in centers.iter().enumerate() {
            for _ in 0..n_per {
                data.push(c + noise.sample(&mut rng));
                data.push(c + noise.sample(&mut rng));
                labels.push(k);
            }
        }
        LabeledBatch::new(Array2::from_shape_vec((labels.len(), 2), data).unwrap(), Some(labels))
    }

    #[test]
    fn separable_blobs_fit_perfectly() {
        let train = blobs(50, &[-10.0, 10.0], 3);
        let rf = fit_random_forest(&train, 25, 16, 7).unwrap();
        let pred = rf.predict(&train).unwrap();
        assert_eq!(macro_f1(train.labels().unwrap(), &pred, 2).unwrap(), 1.0);
    }

    #[test]
    fn single_class_predicts_it_with_full_confidence() {
        let mut train = blobs(20, &[0.0], 1);
        train.labels = Some(vec![0; 20]);
        let rf = fit_random_forest(&train, 10, 8, 0).unwrap();
        for p in rf.predict_with_confidence(&train).unwrap() {
            assert_eq!(p.class, 0);
            assert_eq!(p.confidence, 1.0);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let train = blobs(30, &[0.0, 1.5, 3.0], 5);
        let a = fit_random_forest(&train, 15, 10, 42).unwrap();
        let b = fit_random_forest(&train, 15, 10, 42).unwrap();
        assert_eq!(a, b);
        let c = fit_random_forest(&train, 15, 10, 43).unwrap();
        assert_ne!(a.trees, c.trees);
    }

    #[test]
    fn empty_training_set_rejected() {
        let train = LabeledBatch::new(Array2::zeros((0, 2)), Some(vec![]));
        assert!(matches!(fit_random_forest(&train, 5, 5, 0), Err(DriftError::EmptyTrainingSet)));
    }

    #[test]
    fn column_mismatch_rejected() {
        let train = blobs(10, &[0.0, 5.0], 0);
        let rf = fit_random_forest(&train, 5, 5, 0).unwrap();
        let wrong = LabeledBatch::new(Array2::zeros((3, 3)), None);
        assert!(matches!(rf.predict(&wrong), Err(DriftError::ColumnMismatch { .. })));
    }

    #[test]
    fn confidence_is_vote_fraction() {
        let train = blobs(40, &[0.0, 1.0], 11);
        let rf = fit_random_forest(&train, 100, 12, 3).unwrap();
        for (i, p) in rf.predict_with_confidence(&train).unwrap().iter().enumerate() {
            let votes = rf
                .trees
                .iter()
                .filter(|t| argmax_lowest(t.leaf(train.features.row(i))) == p.class)
                .count();
            assert_eq!(p.confidence, votes as f64 / 100.0);
            assert!(p.confidence > 0.0 && p.confidence <= 1.0);
        }
    }

    #[test]
    fn single_unbagged_tree_equals_plain_tree() {
        let train = blobs(25, &[0.0, 2.0, 4.0], 9);
        let params = ForestParams {
            tree_count: 1,
            max_depth: 6,
            features_per_split: Some(2),
            bootstrap: false,
            rng_seed: 17,
            ..ForestParams::default()
        };
        let rf = RandomForest::fit(&train, params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        rng.set_stream(0);
        let rows: Vec<usize> = (0..train.rows()).collect();
        let tree = fit_class_tree(
            &Columns::new(&train.features),
            train.labels().unwrap(),
            &rows,
            3,
            ClassTreeParams {
                max_depth: 6,
                min_samples_split: 2,
                features_per_split: 2,
            },
            &mut rng,
        );
        assert_eq!(rf.trees[0], tree);
    }

    #[test]
    fn oob_confidence_is_lower_than_in_bag_on_noisy_data() {
        let train = blobs(60, &[0.0, 1.0], 21);
        let rf = fit_random_forest(&train, 60, 16, 2).unwrap();
        let mean = |p: Vec<Prediction>| p.iter().map(|p| p.confidence).sum::<f64>() / p.len() as f64;
        let in_bag = mean(rf.predict_with_confidence(&train).unwrap());
        let oob = mean(rf.oob_predict_with_confidence(&train).unwrap());
        assert!(oob < in_bag);
    }

    #[test]
    fn in_distribution_confidence_exceeds_shifted() {
        let mut wins = 0;
        for seed in 0..8 {
            let train = blobs(50, &[0.0, 3.0], seed);
            let rf = fit_random_forest(&train, 50, 12, seed).unwrap();
            let same = blobs(50, &[0.0, 3.0], seed + 100);
            let shifted = blobs(50, &[1.5, 4.5], seed + 200);
            let mean = |b: &LabeledBatch| {
                let p = rf.predict_with_confidence(b).unwrap();
                p.iter().map(|p| p.confidence).sum::<f64>() / p.len() as f64
            };
            if mean(&same) > mean(&shifted) {
                wins += 1;
            }
        }
        assert_eq!(wins, 8);
    }
}
