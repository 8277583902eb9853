//! A small attentive tabular learner used for representation transfer.
//!
//! Each of `step_count` blocks applies a softmax attention over features, gates the
//! input with it, and maps the gated row through a dense layer with tanh. Block
//! outputs are summed into the representation. A linear decoder reconstructs masked
//! features during pretraining; a linear softmax head classifies. The input
//! standardizer belongs to the encoder and is carried over on transfer.

use ndarray::{Array1, Array2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DriftError, Result};
use crate::evaluation::macro_f1;
use crate::trees::{argmax_rows, softmax_rows};
use crate::types::LabeledBatch;

const STREAM_ENCODER: u64 = 1;
const STREAM_DECODER: u64 = 2;
const STREAM_HEAD: u64 = 3;
const STREAM_SHUFFLE: u64 = 4;
const STREAM_MASK: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// Plain mini-batch gradient descent.
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TabParams {
    /// Supervised phase.
    pub optimizer: Optimizer,
    pub hidden_width: usize,
    pub step_count: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub mask_ratio: f64,
    pub pretrain_epochs: usize,
    pub pretrain_optimizer: Optimizer,
    pub pretrain_learning_rate: f64,
}

impl Default for TabParams {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::Sgd,
            hidden_width: 64,
            step_count: 2,
            learning_rate: 0.05,
            batch_size: 256,
            mask_ratio: 0.25,
            pretrain_epochs: 5,
            pretrain_optimizer: Optimizer::Sgd,
            pretrain_learning_rate: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Array2<f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mean: Vec<f64> = x.mean_axis(Axis(0)).map_or_else(|| vec![0.0; x.ncols()], |m| m.to_vec());
        let scale = x
            .columns()
            .into_iter()
            .zip(&mean)
            .map(|(c, m)| {
                let sd = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = x.clone();
        for mut row in out.axis_iter_mut(Axis(0)) {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.scale[j];
            }
        }
        out
    }
}

/// A dense layer `x · weight + bias`; `bias` is kept as a 1×out matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array2<f64>,
}

impl Dense {
    fn new(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            weight: xavier(fan_in, fan_out, rng),
            bias: Array2::zeros((1, fan_out)),
        }
    }

    fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weight) + &self.bias
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    /// steps × features.
    pub mask_logits: Array2<f64>,
    /// One features × hidden matrix per step.
    pub weights: Vec<Array2<f64>>,
    /// steps × hidden.
    pub biases: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentiveTabularLearner {
    pub feature_count: usize,
    pub hidden_width: usize,
    pub step_count: usize,
    pub standardizer: Standardizer,
    pub encoder: Encoder,
    pub decoder: Option<Dense>,
    pub head: Option<Dense>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub loss: Vec<f64>,
    /// Empty for unsupervised phases.
    pub macro_f1: Vec<f64>,
}

/// Intermediate values of one encoder pass, kept for backprop.
struct EncoderPass {
    attention: Vec<Array1<f64>>,
    gated: Vec<Array2<f64>>,
    activations: Vec<Array2<f64>>,
    representation: Array2<f64>,
}

fn xavier(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_simple_fn((fan_in, fan_out), || rng.gen_range(-a..a))
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn softmax(v: ndarray::ArrayView1<'_, f64>) -> Array1<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = v.mapv(|x| (x - max).exp());
    let s = e.sum();
    e / s
}

impl Encoder {
    fn new(features: usize, hidden: usize, steps: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            mask_logits: Array2::zeros((steps, features)),
            weights: (0..steps).map(|_| xavier(features, hidden, rng)).collect(),
            biases: Array2::zeros((steps, hidden)),
        }
    }

    fn forward(&self, x: &Array2<f64>) -> EncoderPass {
        let f = x.ncols() as f64;
        let steps = self.weights.len();
        let mut attention = Vec::with_capacity(steps);
        let mut gated = Vec::with_capacity(steps);
        let mut activations = Vec::with_capacity(steps);
        let mut representation = Array2::zeros((x.nrows(), self.biases.ncols()));
        for s in 0..steps {
            let a = softmax(self.mask_logits.row(s));
            let gate = &a * f;
            let xg = x * &gate;
            let z = (xg.dot(&self.weights[s]) + &self.biases.row(s)).mapv(f64::tanh);
            representation += &z;
            attention.push(a);
            gated.push(xg);
            activations.push(z);
        }
        EncoderPass {
            attention,
            gated,
            activations,
            representation,
        }
    }

    /// Gradients w.r.t. encoder parameters given dL/d(representation).
    fn backward(&self, x: &Array2<f64>, pass: &EncoderPass, d_rep: &Array2<f64>) -> Vec<Array2<f64>> {
        let f = x.ncols() as f64;
        let steps = self.weights.len();
        let mut d_logits = Array2::zeros(self.mask_logits.raw_dim());
        let mut d_weights = Vec::with_capacity(steps);
        let mut d_biases = Array2::zeros(self.biases.raw_dim());
        for s in 0..steps {
            let z = &pass.activations[s];
            let mut d_pre = d_rep.clone();
            Zip::from(&mut d_pre).and(z).for_each(|d, &zv| *d *= 1.0 - zv * zv);
            d_weights.push(pass.gated[s].t().dot(&d_pre));
            d_biases.row_mut(s).assign(&d_pre.sum_axis(Axis(0)));
            let d_gated = d_pre.dot(&self.weights[s].t());
            let d_gate = (&d_gated * x).sum_axis(Axis(0));
            let d_att = d_gate * f;
            let a = &pass.attention[s];
            let inner = a.dot(&d_att);
            d_logits.row_mut(s).assign(&(a * &(d_att - inner)));
        }
        let mut grads = vec![d_logits];
        grads.extend(d_weights);
        grads.push(d_biases);
        grads
    }

    fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut t = vec![&mut self.mask_logits];
        t.extend(self.weights.iter_mut());
        t.push(&mut self.biases);
        t
    }
}

/// Adam (or plain gradient descent) over an ordered list of tensors.
struct Adam {
    plain: bool,
    lr: f64,
    t: i32,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(optimizer: Optimizer, lr: f64, shapes: &[&mut Array2<f64>]) -> Self {
        Self {
            plain: optimizer == Optimizer::Sgd,
            lr,
            t: 0,
            m: shapes.iter().map(|a| Array2::zeros(a.raw_dim())).collect(),
            v: shapes.iter().map(|a| Array2::zeros(a.raw_dim())).collect(),
        }
    }

    fn step(&mut self, params: Vec<&mut Array2<f64>>, grads: &[Array2<f64>]) {
        if self.plain {
            for (p, g) in params.into_iter().zip(grads) {
                p.scaled_add(-self.lr, g);
            }
            return;
        }
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = Self::B1 * *m + (1.0 - Self::B1) * g;
                *v = Self::B2 * *v + (1.0 - Self::B2) * g * g;
                *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
            });
        }
    }
}

impl AttentiveTabularLearner {
    /// Randomly initialised encoder with neither decoder nor head attached.
    pub fn new(feature_count: usize, params: &TabParams, standardizer: Standardizer, seed: u64) -> Self {
        let encoder = Encoder::new(
            feature_count,
            params.hidden_width,
            params.step_count,
            &mut stream_rng(seed, STREAM_ENCODER),
        );
        Self {
            feature_count,
            hidden_width: params.hidden_width,
            step_count: params.step_count,
            standardizer,
            encoder,
            decoder: None,
            head: None,
        }
    }

    /// Number of scalar parameters for the given shape; decoder and head are optional.
    pub fn parameter_count(feature_count: usize, hidden: usize, steps: usize, decoder: bool, class_count: Option<usize>) -> usize {
        let encoder = steps * feature_count + steps * feature_count * hidden + steps * hidden;
        let dec = if decoder { hidden * feature_count + feature_count } else { 0 };
        let head = class_count.map_or(0, |k| hidden * k + k);
        encoder + dec + head
    }

    pub fn num_parameters(&self) -> usize {
        let mut n = self.encoder.mask_logits.len() + self.encoder.biases.len();
        n += self.encoder.weights.iter().map(Array2::len).sum::<usize>();
        for d in self.decoder.iter().chain(&self.head) {
            n += d.weight.len() + d.bias.len();
        }
        n
    }

    /// Per-step feature attention distributions.
    pub fn attention(&self) -> Vec<Array1<f64>> {
        (0..self.step_count).map(|s| softmax(self.encoder.mask_logits.row(s))).collect()
    }

    /// Encoder output for raw (unstandardized) rows.
    pub fn represent(&self, x: &Array2<f64>) -> Array2<f64> {
        self.encoder.forward(&self.standardizer.apply(x)).representation
    }

    pub fn predict(&self, batch: &LabeledBatch) -> Result<Vec<usize>> {
        let head = self
            .head
            .as_ref()
            .ok_or_else(|| DriftError::InvalidParameter("learner has no classification head".into()))?;
        self.check_cols(batch)?;
        Ok(argmax_rows(&head.forward(&self.represent(&batch.features))))
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

    /// Masked reconstruction loss and gradients `[encoder..., decoder.weight, decoder.bias]`
    /// for standardized input `x` and mask `mask` (1 = hidden).
    pub fn reconstruction_loss_and_grads(&self, x: &Array2<f64>, mask: &Array2<f64>) -> (f64, Vec<Array2<f64>>) {
        let decoder = self.decoder.as_ref().expect("pretraining learner has a decoder");
        let visible = x * &mask.mapv(|m| 1.0 - m);
        let pass = self.encoder.forward(&visible);
        let recon = decoder.forward(&pass.representation);
        let count = mask.sum().max(1.0);
        let diff = (&recon - x) * mask;
        let loss = diff.mapv(|d| d * d).sum() / count;
        let d_recon = diff * (2.0 / count);
        let d_rep = d_recon.dot(&decoder.weight.t());
        let mut grads = self.encoder.backward(&visible, &pass, &d_rep);
        grads.push(pass.representation.t().dot(&d_recon));
        grads.push(d_recon.sum_axis(Axis(0)).insert_axis(Axis(0)));
        (loss, grads)
    }

    /// Mean cross-entropy and gradients `[encoder..., head.weight, head.bias]` for standardized `x`.
    pub fn classification_loss_and_grads(&self, x: &Array2<f64>, labels: &[usize]) -> (f64, Vec<Array2<f64>>) {
        let head = self.head.as_ref().expect("classifier has a head");
        let pass = self.encoder.forward(x);
        let mut p = head.forward(&pass.representation);
        softmax_rows(&mut p);
        let n = labels.len() as f64;
        let loss = labels.iter().enumerate().map(|(i, &y)| -(p[[i, y]].max(1e-300)).ln()).sum::<f64>() / n;
        let mut d_logits = p;
        for (i, &y) in labels.iter().enumerate() {
            d_logits[[i, y]] -= 1.0;
        }
        d_logits /= n;
        let d_rep = d_logits.dot(&head.weight.t());
        let mut grads = self.encoder.backward(x, &pass, &d_rep);
        grads.push(pass.representation.t().dot(&d_logits));
        grads.push(d_logits.sum_axis(Axis(0)).insert_axis(Axis(0)));
        (loss, grads)
    }

    /// Encoder tensors followed by the decoder (if present) then the head (if present).
    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut t = self.encoder.tensors_mut();
        if let Some(d) = self.decoder.as_mut() {
            t.push(&mut d.weight);
            t.push(&mut d.bias);
        }
        if let Some(h) = self.head.as_mut() {
            t.push(&mut h.weight);
            t.push(&mut h.bias);
        }
        t
    }
}

fn minibatches(n: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}

/// Unsupervised pretraining by reconstructing randomly masked feature entries.
///
/// Labels on `d1` are ignored. The returned trace holds the mean batch loss per epoch.
pub fn pretrain_masked(
    d1: &LabeledBatch,
    mask_ratio: f64,
    epochs: usize,
    rng_seed: u64,
    params: &TabParams,
) -> Result<(AttentiveTabularLearner, TrainTrace)> {
    if !(mask_ratio > 0.0 && mask_ratio < 1.0) {
        return Err(DriftError::InvalidParameter(format!("mask_ratio {mask_ratio} outside (0,1)")));
    }
    if epochs == 0 {
        return Err(DriftError::InvalidParameter("epochs must be at least 1".into()));
    }
    if d1.is_empty() {
        return Err(DriftError::EmptyBatch);
    }
    let standardizer = Standardizer::fit(&d1.features);
    let x = standardizer.apply(&d1.features);
    let mut learner = AttentiveTabularLearner::new(d1.cols(), params, standardizer, rng_seed);
    learner.decoder = Some(Dense::new(
        params.hidden_width,
        d1.cols(),
        &mut stream_rng(rng_seed, STREAM_DECODER),
    ));
    let mut shuffle = stream_rng(rng_seed, STREAM_SHUFFLE);
    let mut mask_rng = stream_rng(rng_seed, STREAM_MASK);
    let mut adam = Adam::new(params.pretrain_optimizer, params.pretrain_learning_rate, &learner.tensors_mut());
    let batch_size = params.batch_size.min(d1.rows()).max(1);
    let mut trace = TrainTrace::default();
    for _ in 0..epochs {
        let mut total = 0.0;
        let batches = minibatches(d1.rows(), batch_size, &mut shuffle);
        for rows in &batches {
            let xb = x.select(Axis(0), rows);
            let mut mask = Array2::from_shape_simple_fn(xb.raw_dim(), || {
                if mask_rng.gen::<f64>() < mask_ratio {
                    1.0
                } else {
                    0.0
                }
            });
            if mask.sum() == 0.0 {
                let (i, j) = (mask_rng.gen_range(0..mask.nrows()), mask_rng.gen_range(0..mask.ncols()));
                mask[[i, j]] = 1.0;
            }
            let (loss, grads) = learner.reconstruction_loss_and_grads(&xb, &mask);
            adam.step(learner.tensors_mut(), &grads);
            total += loss;
        }
        trace.loss.push(total / batches.len() as f64);
    }
    Ok((learner, trace))
}

pub enum Init<'a> {
    Fresh,
    Transfer(&'a AttentiveTabularLearner),
}

/// Supervised training with a fresh head; the encoder is either random or copied
/// from a pretrained learner. Records loss and training-set macro-F1 per epoch.
pub fn train_classifier(
    init: Init<'_>,
    train: &LabeledBatch,
    epochs: usize,
    rng_seed: u64,
    params: &TabParams,
) -> Result<(AttentiveTabularLearner, TrainTrace)> {
    if epochs == 0 {
        return Err(DriftError::InvalidParameter("epochs must be at least 1".into()));
    }
    if train.is_empty() {
        return Err(DriftError::EmptyTrainingSet);
    }
    let labels = train.labels()?;
    let class_count = train.class_count();
    let mut learner = match init {
        Init::Fresh => {
            AttentiveTabularLearner::new(train.cols(), params, Standardizer::fit(&train.features), rng_seed)
        }
        Init::Transfer(pre) => {
            if pre.feature_count != train.cols() {
                return Err(DriftError::ShapeMismatch(format!(
                    "pretrained encoder expects {} features, batch has {}",
                    pre.feature_count,
                    train.cols()
                )));
            }
            let mut l = pre.clone();
            l.decoder = None;
            l
        }
    };
    learner.head = Some(Dense::new(
        learner.hidden_width,
        class_count,
        &mut stream_rng(rng_seed, STREAM_HEAD),
    ));
    let x = learner.standardizer.apply(&train.features);
    let mut shuffle = stream_rng(rng_seed, STREAM_SHUFFLE);
    let mut adam = Adam::new(params.optimizer, params.learning_rate, &learner.tensors_mut());
    let batch_size = params.batch_size.min(train.rows()).max(1);
    let mut trace = TrainTrace::default();
    for _ in 0..epochs {
        let mut total = 0.0;
        let batches = minibatches(train.rows(), batch_size, &mut shuffle);
        for rows in &batches {
            let xb = x.select(Axis(0), rows);
            let yb: Vec<usize> = rows.iter().map(|&r| labels[r]).collect();
            let (loss, grads) = learner.classification_loss_and_grads(&xb, &yb);
            adam.step(learner.tensors_mut(), &grads);
            total += loss;
        }
        trace.loss.push(total / batches.len() as f64);
        let head = learner.head.as_ref().expect("head set above");
        let pred = argmax_rows(&head.forward(&learner.encoder.forward(&x).representation));
        trace.macro_f1.push(macro_f1(labels, &pred, class_count)?);
    }
    Ok((learner, trace))
}
