// SPDX-License-Identifier: MIT OR Apache-2.0

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{log_sum_exp, softmax_in_place, ProbeModel};
use crate::error::{Error, Result};
use crate::store::{ProbeDataset, ProbeExample};

/// Predicate over (doc id, source position).
pub type PositionFilter<'a> = &'a dyn Fn(&str, usize) -> bool;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub adamw_betas: (f64, f64),
    pub adamw_eps: f64,
    pub adamw_weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            batch_size: 4,
            epochs: 16,
            adamw_betas: (0.9, 0.999),
            adamw_eps: 1e-8,
            adamw_weight_decay: 0.01,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let (b1, b2) = self.adamw_betas;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) {
            return Err(Error::Config("adamw_betas must lie in [0, 1)".into()));
        }
        if self.adamw_eps.is_nan() || self.adamw_eps <= 0.0 || self.adamw_weight_decay < 0.0 {
            return Err(Error::Config(
                "adamw_eps must be positive, weight decay non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub train: f64,
    /// `None` when the validation set is empty.
    pub val: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Losses of the initial probe, before any update.
    pub initial: EpochLoss,
    pub epochs: Vec<EpochLoss>,
    /// 1-based epoch whose weights were returned.
    pub best_epoch: usize,
}

/// Gradient of the mean cross-entropy over a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

fn check_dataset(probe: &ProbeModel, ds: &ProbeDataset) -> Result<()> {
    for ex in &ds.examples {
        if ex.hidden.len() != probe.hidden_dim {
            return Err(Error::DimensionMismatch {
                expected: probe.hidden_dim,
                actual: ex.hidden.len(),
            });
        }
        if ex.target as usize >= probe.vocab_size {
            return Err(Error::Config(format!(
                "target {} outside probe vocabulary of size {}",
                ex.target, probe.vocab_size
            )));
        }
    }
    Ok(())
}

/// Mean cross-entropy `-ln softmax(W h + b)[y]` over `examples`.
pub fn mean_cross_entropy(probe: &ProbeModel, examples: &[ProbeExample]) -> f64 {
    let mut logits = Vec::with_capacity(probe.vocab_size);
    let total: f64 = examples
        .iter()
        .map(|ex| {
            probe.logits_unchecked(&ex.hidden, &mut logits);
            log_sum_exp(&logits) - logits[ex.target as usize]
        })
        .sum();
    total / examples.len() as f64
}

/// Mean cross-entropy and its analytic gradient over a batch.
pub fn loss_and_gradient<'a>(
    probe: &ProbeModel,
    batch: impl IntoIterator<Item = &'a ProbeExample>,
) -> (f64, Gradient) {
    let mut grad = Gradient {
        weights: vec![0.0; probe.weights.len()],
        bias: vec![0.0; probe.bias.len()],
    };
    let mut logits = Vec::with_capacity(probe.vocab_size);
    let mut loss = 0.0;
    let mut count = 0usize;
    for ex in batch {
        count += 1;
        probe.logits_unchecked(&ex.hidden, &mut logits);
        let y = ex.target as usize;
        loss += log_sum_exp(&logits) - logits[y];
        softmax_in_place(&mut logits);
        logits[y] -= 1.0;
        for (c, d) in logits.iter().enumerate() {
            grad.bias[c] += d;
            let row = &mut grad.weights[c * probe.hidden_dim..(c + 1) * probe.hidden_dim];
            for (g, x) in row.iter_mut().zip(&ex.hidden) {
                *g += d * f64::from(*x);
            }
        }
    }
    let scale = 1.0 / count.max(1) as f64;
    grad.weights.iter_mut().for_each(|g| *g *= scale);
    grad.bias.iter_mut().for_each(|g| *g *= scale);
    (loss * scale, grad)
}

/// Decoupled-weight-decay Adam state for one parameter vector.
struct AdamW {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamW {
    fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], step: i32, cfg: &TrainConfig) {
        let (b1, b2) = cfg.adamw_betas;
        let bc1 = 1.0 - b1.powi(step);
        let bc2 = 1.0 - b2.powi(step);
        let lr = cfg.learning_rate;
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *p -= lr * cfg.adamw_weight_decay * *p;
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + cfg.adamw_eps);
        }
    }
}

fn finite_or_abort(loss: f64, what: &str, epoch: usize) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::Diverged(format!(
            "{what} loss is {loss} after epoch {epoch}; lower the learning rate"
        )))
    }
}

/// Trains `probe` with AdamW on mean cross-entropy. Examples are reshuffled
/// each epoch from `cfg.seed`; the returned model is the epoch checkpoint
/// with the lowest validation loss (training loss when `val` is empty).
pub fn train_probe(
    probe: &ProbeModel,
    train: &ProbeDataset,
    val: &ProbeDataset,
    cfg: &TrainConfig,
) -> Result<(ProbeModel, TrainHistory)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_dataset(probe, train)?;
    check_dataset(probe, val)?;

    let val_loss = |p: &ProbeModel| (!val.is_empty()).then(|| mean_cross_entropy(p, &val.examples));
    let initial = EpochLoss {
        train: mean_cross_entropy(probe, &train.examples),
        val: val_loss(probe),
    };

    let mut model = probe.clone();
    let mut opt_w = AdamW::new(model.weights.len());
    let mut opt_b = AdamW::new(model.bias.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut step = 0i32;
    let mut best: Option<(f64, usize, ProbeModel)> = None;
    let mut epochs = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let (_, grad) = loss_and_gradient(&model, chunk.iter().map(|&i| &train.examples[i]));
            step += 1;
            opt_w.step(&mut model.weights, &grad.weights, step, cfg);
            opt_b.step(&mut model.bias, &grad.bias, step, cfg);
        }
        let record = EpochLoss {
            train: finite_or_abort(mean_cross_entropy(&model, &train.examples), "training", epoch)?,
            val: val_loss(&model)
                .map(|v| finite_or_abort(v, "validation", epoch))
                .transpose()?,
        };
        let key = record.val.unwrap_or(record.train);
        if best.as_ref().is_none_or(|(b, _, _)| key < *b) {
            best = Some((key, epoch, model.clone()));
        }
        epochs.push(record);
    }

    let (_, best_epoch, best_model) = best.expect("at least one epoch");
    Ok((
        best_model,
        TrainHistory {
            initial,
            epochs,
            best_epoch,
        },
    ))
}

/// Fraction of examples (passing `filter`) whose top-1 prediction equals the
/// target. Ties resolve to the lowest token id.
pub fn evaluate_accuracy(
    probe: &ProbeModel,
    ds: &ProbeDataset,
    filter: Option<PositionFilter>,
) -> Result<f64> {
    let (correct, total) = count_correct(probe, ds, filter)?;
    Ok(correct as f64 / total as f64)
}

/// `(correct, evaluated)` counts behind [`evaluate_accuracy`].
pub fn count_correct(
    probe: &ProbeModel,
    ds: &ProbeDataset,
    filter: Option<PositionFilter>,
) -> Result<(usize, usize)> {
    let mut correct = 0;
    let mut total = 0;
    for ex in &ds.examples {
        if let Some(keep) = filter {
            if !keep(&ex.doc_id, ex.position) {
                continue;
            }
        }
        total += 1;
        if probe.predict(&ex.hidden)? == ex.target {
            correct += 1;
        }
    }
    if total == 0 {
        return Err(Error::EmptyEvaluationSet);
    }
    Ok((correct, total))
}
