use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::model::Model;
use super::tensor::{add_grads, zero_grads, Grads};
use crate::error::{param, Error, Result};
use crate::par::{self, Exec};
use crate::rng::SimRng;

/// Samples per gradient work unit. Fixed so the summation order, and hence
/// the trained weights, do not depend on the thread count.
const GRAD_CHUNK: usize = 4;

/// One normalized `(input, target)` pair.
pub type Sample = (Vec<f64>, Vec<f64>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Momentum for SGD, first-moment decay for Adam.
    pub momentum: f64,
    pub patience: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 16,
            learning_rate: 1e-3,
            momentum: 0.9,
            patience: 20,
            optimizer: OptimizerKind::Sgd,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(param("batch_size must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(param(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(param(format!("momentum must be in [0, 1), got {}", self.momentum)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Epoch 0 holds the losses of the initial model.
    pub curve: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

impl TrainReport {
    pub fn initial_val_loss(&self) -> f64 {
        self.curve[0].val_loss
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "train_loss", "val_loss"])?;
        for s in &self.curve {
            w.write_record([s.epoch.to_string(), s.train_loss.to_string(), s.val_loss.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Stateful parameter update rule.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Grads,
    v: Grads,
}

impl Optimizer {
    pub fn new<M: Model>(cfg: &TrainConfig, model: &M) -> Self {
        let params = model.params();
        Self {
            kind: cfg.optimizer,
            lr: cfg.learning_rate,
            beta1: cfg.momentum,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zero_grads(&params),
            v: zero_grads(&params),
        }
    }

    /// Applies one update from the gradients stored in each tensor.
    pub fn step<M: Model>(&mut self, model: &mut M) {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        for ((p, m), v) in model.params_mut().into_iter().zip(&mut self.m).zip(&mut self.v) {
            for k in 0..p.data.len() {
                let g = p.grad[k];
                match self.kind {
                    OptimizerKind::Sgd => {
                        m[k] = b1 * m[k] - self.lr * g;
                        p.data[k] += m[k];
                    }
                    OptimizerKind::Adam => {
                        m[k] = b1 * m[k] + (1.0 - b1) * g;
                        v[k] = b2 * v[k] + (1.0 - b2) * g * g;
                        p.data[k] -= self.lr * (m[k] / c1) / ((v[k] / c2).sqrt() + self.eps);
                    }
                }
            }
        }
    }
}

/// Mean loss and mean gradient over `batch`.
pub fn batch_gradient<M: Model>(model: &M, data: &[Sample], batch: &[usize], exec: Exec) -> (f64, Grads) {
    let chunks: Vec<&[usize]> = batch.chunks(GRAD_CHUNK).collect();
    let partial = par::map_slice(exec, &chunks, |idx| {
        let mut g = zero_grads(&model.params());
        let loss: f64 = idx.iter().map(|&i| model.loss_grad(&data[i].0, &data[i].1, &mut g)).sum();
        (loss, g)
    });
    let mut total = zero_grads(&model.params());
    let mut loss = 0.0;
    for (l, g) in &partial {
        loss += l;
        add_grads(&mut total, g);
    }
    let inv = 1.0 / batch.len() as f64;
    total.iter_mut().flatten().for_each(|v| *v *= inv);
    (loss * inv, total)
}

/// Mean loss over a sample set.
pub fn mean_loss<M: Model>(model: &M, data: &[Sample], exec: Exec) -> f64 {
    if data.is_empty() {
        return f64::NAN;
    }
    par::map_slice(exec, data, |(x, y)| model.loss(x, y)).iter().sum::<f64>() / data.len() as f64
}

fn diverged<M: Model>(epoch: usize, reason: String, best: &M) -> Error {
    Error::Training { epoch, reason, checkpoint: Some(best.to_archive().to_bytes()) }
}

/// Mini-batch training with early stopping on `val`. Returns the parameters
/// with the lowest validation loss seen, the initial ones included. With an
/// empty `val` the training loss is monitored instead.
pub fn train<M: Model>(mut model: M, train: &[Sample], val: &[Sample], cfg: &TrainConfig, exec: Exec) -> Result<(M, TrainReport)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(param("training set is empty"));
    }
    let monitor = |m: &M| if val.is_empty() { mean_loss(m, train, exec) } else { mean_loss(m, val, exec) };
    let initial = monitor(&model);
    if !initial.is_finite() {
        return Err(Error::Training { epoch: 0, reason: "initial loss is not finite".into(), checkpoint: None });
    }
    let mut curve = vec![EpochStats { epoch: 0, train_loss: mean_loss(&model, train, exec), val_loss: initial }];
    let mut best = model.clone();
    let (mut best_epoch, mut best_val) = (0, initial);
    let mut since_best = 0;
    let mut stopped_early = false;
    let mut opt = Optimizer::new(cfg, &model);
    let mut rng = SimRng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for p in model.params_mut() {
        p.zero_grad();
    }

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (loss, grads) = batch_gradient(&model, train, batch, exec);
            if !loss.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
                return Err(diverged(epoch, format!("batch loss {loss}"), &best));
            }
            epoch_loss += loss * batch.len() as f64;
            for (p, g) in model.params_mut().into_iter().zip(grads) {
                p.grad = g;
            }
            opt.step(&mut model);
        }
        let val_loss = monitor(&model);
        if !val_loss.is_finite() {
            return Err(diverged(epoch, format!("validation loss {val_loss}"), &best));
        }
        curve.push(EpochStats { epoch, train_loss: epoch_loss / train.len() as f64, val_loss });
        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best = model.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.patience > 0 && since_best >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }
    Ok((best, TrainReport { curve, best_epoch, best_val_loss: best_val, stopped_early }))
}

/// Disjoint train / test / validation index sets in 6:2:1 proportion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub validation: Vec<usize>,
}

impl DatasetSplit {
    pub fn new(n: usize, seed: u64) -> Self {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut SimRng::seed_from_u64(seed));
        let n_train = (n as f64 * 6.0 / 9.0).round() as usize;
        let n_test = ((n as f64 * 2.0 / 9.0).round() as usize).min(n - n_train);
        let validation = idx.split_off(n_train + n_test);
        let test = idx.split_off(n_train);
        Self { train: idx, test, validation }
    }

    pub fn total(&self) -> usize {
        self.train.len() + self.test.len() + self.validation.len()
    }

    pub fn select<T: Clone>(items: &[T], idx: &[usize]) -> Vec<T> {
        idx.iter().map(|&i| items[i].clone()).collect()
    }
}
