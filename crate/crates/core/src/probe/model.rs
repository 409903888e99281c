// SPDX-License-Identifier: MIT OR Apache-2.0

use crate::error::{Error, Result};
use crate::store::{check_offset, LayerId};

/// Linear classifier from a layer's hidden state to the token at a fixed
/// relative offset. Weights are row-major `vocab_size × hidden_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeModel {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub hidden_dim: usize,
    pub vocab_size: usize,
    pub layer: LayerId,
    pub offset: i32,
}

/// Zero-initialized probe. The objective is convex, so the starting point
/// only affects the path; `_seed` is accepted for randomized variants.
pub fn init_probe(
    hidden_dim: usize,
    vocab_size: usize,
    layer: LayerId,
    offset: i32,
    _seed: u64,
) -> Result<ProbeModel> {
    if hidden_dim == 0 || vocab_size == 0 {
        return Err(Error::Config(format!(
            "probe dimensions must be positive, got hidden_dim={hidden_dim}, vocab_size={vocab_size}"
        )));
    }
    check_offset(offset)?;
    Ok(ProbeModel {
        weights: vec![0.0; vocab_size * hidden_dim],
        bias: vec![0.0; vocab_size],
        hidden_dim,
        vocab_size,
        layer,
        offset,
    })
}

impl ProbeModel {
    pub fn weight_row(&self, class: usize) -> &[f64] {
        &self.weights[class * self.hidden_dim..(class + 1) * self.hidden_dim]
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }

    pub(crate) fn check_input(&self, h: &[f32]) -> Result<()> {
        if h.len() != self.hidden_dim {
            return Err(Error::DimensionMismatch {
                expected: self.hidden_dim,
                actual: h.len(),
            });
        }
        if let Some(pos) = h.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("hidden state entry {pos}")));
        }
        Ok(())
    }

    /// `W·h + b`, without input validation.
    pub(crate) fn logits_unchecked(&self, h: &[f32], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.bias.iter().enumerate().map(|(c, b)| {
            let row = self.weight_row(c);
            b + row.iter().zip(h).map(|(w, x)| w * f64::from(*x)).sum::<f64>()
        }));
    }

    pub fn logits(&self, h: &[f32]) -> Result<Vec<f64>> {
        self.check_input(h)?;
        let mut out = Vec::with_capacity(self.vocab_size);
        self.logits_unchecked(h, &mut out);
        Ok(out)
    }

    /// Top-1 class; ties resolve to the lowest token id.
    pub fn predict(&self, h: &[f32]) -> Result<u32> {
        Ok(argmax(&self.logits(h)?) as u32)
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax (max-subtracted), in place.
pub fn softmax_in_place(values: &mut [f64]) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in values.iter_mut() {
        *v /= sum;
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    out
}

/// `ln Σ exp(x)`, max-shifted.
pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Class distribution the probe assigns to hidden state `h`.
pub fn forward_probs(probe: &ProbeModel, h: &[f32]) -> Result<Vec<f64>> {
    let mut logits = probe.logits(h)?;
    softmax_in_place(&mut logits);
    Ok(logits)
}
