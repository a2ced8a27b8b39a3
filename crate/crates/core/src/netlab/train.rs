//! Momentum SGD training and evaluation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::data::Dataset;
use super::model::{argmax_rows, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    /// Weights and inputs are rounded to `f32` after every step.
    Single,
    #[default]
    Double,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    /// Epochs (0-based) at whose start the learning rate is multiplied by
    /// `decay_factor`.
    pub decay_epochs: Vec<usize>,
    pub decay_factor: f64,
    pub seed: u64,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 32,
            lr: 0.05,
            momentum: 0.9,
            decay_epochs: vec![12, 17],
            decay_factor: 0.1,
            seed: 0,
            precision: Precision::Double,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch size must be positive");
        }
        if !(self.lr >= 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return bad("lr must be >= 0 and momentum in [0, 1)");
        }
        if !(self.decay_factor > 0.0) {
            return bad("decay factor must be positive");
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        let steps = self.decay_epochs.iter().filter(|&&d| epoch >= d).count();
        self.lr * self.decay_factor.powi(steps as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    /// Sample-weighted mean of the mini-batch losses.
    pub loss: f64,
    /// Training accuracy (%) of the mini-batch predictions.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean loss over the whole dataset before the first update.
    pub initial_loss: f64,
    /// Mean loss over the whole dataset after the last update.
    pub final_loss: f64,
    pub epochs: Vec<EpochStats>,
}

fn round_f32(t: &mut Tensor) {
    for v in t.data_mut() {
        *v = *v as f32 as f64;
    }
}

/// Mean cross-entropy over a dataset, in chunks.
pub fn dataset_loss(model: &Model, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut total = 0.0;
    for chunk in idx.chunks(128) {
        let (x, y) = data.batch(chunk);
        total += model.loss(&x, &y)? * chunk.len() as f64;
    }
    Ok(total / data.len() as f64)
}

/// Trains `model` in place. The shuffle sequence comes from `cfg.seed` and
/// gradients are reduced in a fixed order, so runs are reproducible.
pub fn train(model: &mut Model, data: &Dataset, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let single = cfg.precision == Precision::Single;
    let mut data = data.clone();
    if single {
        round_f32(&mut data.images);
        for (_, p) in model.params_mut() {
            round_f32(p);
        }
    }
    let initial_loss = dataset_loss(model, &data)?;
    let mut velocity: Vec<Tensor> = model.params().iter().map(|(_, p)| Tensor::zeros(p.shape())).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (bi, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let (x, y) = data.batch(chunk);
            let (loss, logits, grads) = model.loss_and_grads(&x, &y)?;
            if !loss.is_finite() {
                return Err(Error::DivergedLoss { epoch, batch: bi, loss });
            }
            loss_sum += loss * chunk.len() as f64;
            correct += argmax_rows(&logits).iter().zip(&y).filter(|(p, t)| p == t).count();
            for (((_, p), v), g) in model.params_mut().iter_mut().zip(&mut velocity).zip(&grads) {
                for ((pv, vv), gv) in p.data_mut().iter_mut().zip(v.data_mut()).zip(g.data()) {
                    *vv = cfg.momentum * *vv + gv;
                    *pv -= lr * *vv;
                }
                if single {
                    round_f32(p);
                    round_f32(v);
                }
            }
        }
        epochs.push(EpochStats {
            epoch,
            lr,
            loss: loss_sum / data.len() as f64,
            accuracy: 100.0 * correct as f64 / data.len() as f64,
        });
    }
    let final_loss = dataset_loss(model, &data)?;
    Ok(TrainReport { initial_loss, final_loss, epochs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub samples: usize,
    /// Top-1 accuracy in percent.
    pub accuracy: f64,
    /// Top-1 error in percent.
    pub error: f64,
    /// Per-class error in percent; `None` for classes absent from the data.
    pub per_class_error: Vec<Option<f64>>,
}

pub fn evaluate(model: &Model, data: &Dataset) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let pred = model.predict(&data.images)?;
    Ok(score(&pred, &data.labels, model.config().classes))
}

/// Accuracy and per-class error of predictions against labels.
pub fn score(pred: &[usize], labels: &[usize], classes: usize) -> EvalReport {
    let mut seen = vec![0usize; classes];
    let mut wrong = vec![0usize; classes];
    for (&p, &t) in pred.iter().zip(labels) {
        seen[t] += 1;
        if p != t {
            wrong[t] += 1;
        }
    }
    let errors: usize = wrong.iter().sum();
    let n = labels.len();
    let error = 100.0 * errors as f64 / n as f64;
    EvalReport {
        samples: n,
        accuracy: 100.0 - error,
        error,
        per_class_error: seen.iter().zip(&wrong).map(|(&s, &w)| (s > 0).then(|| 100.0 * w as f64 / s as f64)).collect(),
    }
}
