//! Multi-class gradient boosting with softmax cross-entropy and regularized Newton leaves.
//!
//! One round appends one regression tree per class, each fitted to that class's
//! gradient and hessian of the softmax loss at the current scores. Leaves take the
//! value −G/(H+λ) and every split pays γ. Continuing training on new data appends
//! rounds without touching earlier ones, so a warm start is a pure append.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::tree::{fit_grad_tree_cols, Columns, DecisionTree, GradTreeParams};
use crate::error::{DriftError, Result};
use crate::evaluation::macro_f1;
use crate::types::LabeledBatch;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostParams {
    pub learning_rate: f64,
    pub max_depth: usize,
    pub reg_lambda: f64,
    pub reg_gamma: f64,
    pub min_child_weight: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.3,
            max_depth: 6,
            reg_lambda: 1.0,
            reg_gamma: 0.0,
            min_child_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedEnsemble {
    /// One entry per round, each holding `class_count` trees.
    pub stages: Vec<Vec<DecisionTree<f64>>>,
    pub params: BoostParams,
    pub class_count: usize,
}

impl BoostedEnsemble {
    pub fn new(class_count: usize, params: BoostParams) -> Self {
        Self {
            stages: Vec::new(),
            params,
            class_count,
        }
    }

    pub fn rounds(&self) -> usize {
        self.stages.len()
    }

    /// Raw additive scores (logits), rows × classes.
    pub fn scores(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut f = Array2::zeros((x.nrows(), self.class_count));
        for stage in &self.stages {
            self.add_stage(stage, x, &mut f);
        }
        f
    }

    fn add_stage(&self, stage: &[DecisionTree<f64>], x: &Array2<f64>, f: &mut Array2<f64>) {
        let eta = self.params.learning_rate;
        for (i, row) in x.axis_iter(Axis(0)).enumerate() {
            for (k, tree) in stage.iter().enumerate() {
                f[[i, k]] += eta * tree.leaf(row);
            }
        }
    }

    pub fn predict_proba(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut p = self.scores(x);
        softmax_rows(&mut p);
        p
    }

    pub fn predict(&self, x: &Array2<f64>) -> Vec<usize> {
        argmax_rows(&self.scores(x))
    }

    /// Mean softmax cross-entropy on `batch` plus γT + ½λΣw² over every tree,
    /// with w the shrunken leaf contributions.
    pub fn objective(&self, batch: &LabeledBatch) -> Result<f64> {
        let labels = batch.labels()?;
        let p = self.predict_proba(&batch.features);
        let ce: f64 = labels
            .iter()
            .enumerate()
            .map(|(i, &y)| -(p[[i, y]].max(1e-300)).ln())
            .sum::<f64>()
            / labels.len() as f64;
        let eta = self.params.learning_rate;
        let penalty: f64 = self
            .stages
            .iter()
            .flatten()
            .map(|t| {
                let leaves: Vec<f64> = t.leaves().copied().collect();
                self.params.reg_gamma * leaves.len() as f64
                    + 0.5 * self.params.reg_lambda * leaves.iter().map(|w| (eta * w).powi(2)).sum::<f64>()
            })
            .sum();
        Ok(ce + penalty / labels.len() as f64)
    }

    /// Appends `rounds` boosting rounds fitted on `train`; returns macro-F1 on `eval_on` after each.
    pub fn fit_stages(&mut self, train: &LabeledBatch, rounds: usize, eval_on: &LabeledBatch) -> Result<Vec<f64>> {
        if rounds == 0 {
            return Err(DriftError::InvalidParameter("rounds must be at least 1".into()));
        }
        if train.is_empty() {
            return Err(DriftError::EmptyTrainingSet);
        }
        let labels = train.labels()?;
        let eval_labels = eval_on.labels()?;
        if let Some(&bad) = labels.iter().chain(eval_labels).find(|&&y| y >= self.class_count) {
            return Err(DriftError::UnseenClass {
                class: bad,
                class_count: self.class_count,
            });
        }
        if eval_on.cols() != train.cols() {
            return Err(DriftError::ColumnMismatch {
                expected: train.cols(),
                actual: eval_on.cols(),
            });
        }
        let n = train.rows();
        let k = self.class_count;
        let cols = Columns::new(&train.features);
        let rows: Vec<usize> = (0..n).collect();
        let mut f_train = self.scores(&train.features);
        let mut f_eval = self.scores(&eval_on.features);
        let tree_params = GradTreeParams {
            max_depth: self.params.max_depth,
            reg_lambda: self.params.reg_lambda,
            reg_gamma: self.params.reg_gamma,
            min_child_weight: self.params.min_child_weight,
        };
        let mut trace = Vec::with_capacity(rounds);
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n];
        for _ in 0..rounds {
            let mut p = f_train.clone();
            softmax_rows(&mut p);
            let mut stage = Vec::with_capacity(k);
            for c in 0..k {
                for i in 0..n {
                    let pc = p[[i, c]];
                    grad[i] = pc - if labels[i] == c { 1.0 } else { 0.0 };
                    hess[i] = (pc * (1.0 - pc)).max(1e-16);
                }
                stage.push(fit_grad_tree_cols(&cols, &rows, &grad, &hess, tree_params));
            }
            self.add_stage(&stage, &train.features, &mut f_train);
            self.add_stage(&stage, &eval_on.features, &mut f_eval);
            self.stages.push(stage);
            trace.push(macro_f1(eval_labels, &argmax_rows(&f_eval), k)?);
        }
        Ok(trace)
    }
}

/// Continues `ensemble` (or starts a fresh one sized to `train`) for `rounds` rounds.
pub fn boosted_fit_stages(
    ensemble: Option<BoostedEnsemble>,
    train: &LabeledBatch,
    rounds: usize,
    eval_on: &LabeledBatch,
    params: BoostParams,
) -> Result<(BoostedEnsemble, Vec<f64>)> {
    let mut e = ensemble.unwrap_or_else(|| BoostedEnsemble::new(train.class_count().max(eval_on.class_count()), params));
    let trace = e.fit_stages(train, rounds, eval_on)?;
    Ok((e, trace))
}

pub(crate) fn softmax_rows(m: &mut Array2<f64>) {
    for mut row in m.axis_iter_mut(Axis(0)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let s: f64 = row.sum();
        row.mapv_inplace(|v| v / s);
    }
}

pub(crate) fn argmax_rows(m: &Array2<f64>) -> Vec<usize> {
    m.axis_iter(Axis(0))
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}
