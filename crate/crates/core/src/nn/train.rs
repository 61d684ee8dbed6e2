//! Mini-batch training with plain SGD or Adam-style adaptive moments.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{evaluate, loss_and_grad, DeepMobilityModel, Gradients, Sample};
use super::tensor::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    AdaptiveMoments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Multiplies the learning rate after every epoch.
    pub lr_decay: f64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            learning_rate: 0.01,
            lr_decay: 1.0,
            seed: 0,
            optimizer: OptimizerKind::AdaptiveMoments,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Per-epoch metrics, evaluated on the full sets after the epoch's updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

pub enum Optimizer {
    Sgd { lr: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64, step: i32, m: Vec<Matrix>, v: Vec<Matrix> },
}

impl Optimizer {
    fn scale_lr(&mut self, factor: f64) {
        match self {
            Optimizer::Sgd { lr } | Optimizer::Adam { lr, .. } => *lr *= factor,
        }
    }

    pub fn new(cfg: &TrainConfig, model: &DeepMobilityModel) -> Self {
        match cfg.optimizer {
            OptimizerKind::Sgd => Optimizer::Sgd { lr: cfg.learning_rate },
            OptimizerKind::AdaptiveMoments => Optimizer::Adam {
                lr: cfg.learning_rate,
                beta1: cfg.beta1,
                beta2: cfg.beta2,
                eps: cfg.epsilon,
                step: 0,
                m: model.zero_grads(),
                v: model.zero_grads(),
            },
        }
    }

    pub fn apply(&mut self, model: &mut DeepMobilityModel, grads: &Gradients) {
        let trainable = model.trainable();
        match self {
            Optimizer::Sgd { lr } => {
                for ((p, g), on) in model.params_mut().into_iter().zip(&grads.tensors).zip(trainable) {
                    if on {
                        for (w, d) in p.data.iter_mut().zip(&g.data) {
                            *w -= *lr * d;
                        }
                    }
                }
            }
            Optimizer::Adam { lr, beta1, beta2, eps, step, m, v } => {
                *step += 1;
                let c1 = 1.0 - beta1.powi(*step);
                let c2 = 1.0 - beta2.powi(*step);
                for (k, (p, on)) in model.params_mut().into_iter().zip(trainable).enumerate() {
                    if !on {
                        continue;
                    }
                    let g = &grads.tensors[k].data;
                    let (mk, vk) = (&mut m[k].data, &mut v[k].data);
                    for j in 0..p.data.len() {
                        mk[j] = *beta1 * mk[j] + (1.0 - *beta1) * g[j];
                        vk[j] = *beta2 * vk[j] + (1.0 - *beta2) * g[j] * g[j];
                        let mhat = mk[j] / c1;
                        let vhat = vk[j] / c2;
                        p.data[j] -= *lr * mhat / (vhat.sqrt() + *eps);
                    }
                }
            }
        }
    }
}

/// Trains `model` in place and returns one [`EpochStats`] per epoch.
///
/// The shuffle order comes from `cfg.seed` alone, so identical inputs give
/// bit-identical models and histories.
pub fn train(
    model: &mut DeepMobilityModel,
    train_set: &[Sample],
    val_set: &[Sample],
    cfg: &TrainConfig,
) -> Result<Vec<EpochStats>> {
    if !(cfg.learning_rate > 0.0 && cfg.lr_decay > 0.0 && cfg.lr_decay <= 1.0) {
        return Err(Error::config("learning_rate must be > 0 and lr_decay in (0, 1]"));
    }
    if train_set.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if val_set.is_empty() {
        return Err(Error::data("empty validation set"));
    }
    let batch_size = cfg.batch_size.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Optimizer::new(cfg, model);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for (b, chunk) in order.chunks(batch_size).enumerate() {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (loss, grads) = loss_and_grad(model, &batch)?;
            if !loss.is_finite() || grads.tensors.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numeric(format!("non-finite loss at epoch {epoch}, batch {}", b + 1)));
            }
            opt.apply(model, &grads);
        }
        let (train_loss, train_acc) = evaluate(model, train_set)?;
        let (val_loss, val_acc) = evaluate(model, val_set)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite loss after epoch {epoch}")));
        }
        history.push(EpochStats { epoch, train_loss, train_acc, val_loss, val_acc });
        opt.scale_lr(cfg.lr_decay);
    }
    Ok(history)
}

pub const HISTORY_HEADER: &str = "epoch,train_loss,train_acc,val_loss,val_acc";

pub fn write_history_to<W: Write>(history: &[EpochStats], mut out: W) -> Result<()> {
    writeln!(out, "{HISTORY_HEADER}")?;
    for h in history {
        writeln!(
            out,
            "{},{:.9},{:.6},{:.9},{:.6}",
            h.epoch, h.train_loss, h.train_acc, h.val_loss, h.val_acc
        )?;
    }
    Ok(())
}

pub fn write_history(history: &[EpochStats], path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_history_to(history, &mut w)?;
    w.flush()?;
    Ok(())
}
