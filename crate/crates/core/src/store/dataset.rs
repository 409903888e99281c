// SPDX-License-Identifier: MIT OR Apache-2.0

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::corpus::Corpus;
use super::shard::LayerId;
use crate::error::{Error, Result};

/// Offsets a probe may be trained for, relative to the source position.
pub const SUPPORTED_OFFSETS: [i32; 5] = [-3, -2, -1, 0, 1];

pub fn check_offset(offset: i32) -> Result<()> {
    if SUPPORTED_OFFSETS.contains(&offset) {
        Ok(())
    } else {
        Err(Error::InvalidOffset(offset))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeExample {
    pub hidden: Vec<f32>,
    pub target: u32,
    /// Position of the hidden state; the target sits at `position + offset`.
    pub position: usize,
    pub doc_id: Arc<str>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeDataset {
    pub examples: Vec<ProbeExample>,
    pub layer: LayerId,
    pub offset: i32,
    pub hidden_dim: usize,
    pub vocab_size: usize,
}

impl ProbeDataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Position of the token an example is labeled with.
    pub fn target_position(&self, ex: &ProbeExample) -> usize {
        (ex.position as i64 + self.offset as i64) as usize
    }

    fn with_examples(&self, examples: Vec<ProbeExample>) -> ProbeDataset {
        ProbeDataset {
            examples,
            layer: self.layer,
            offset: self.offset,
            hidden_dim: self.hidden_dim,
            vocab_size: self.vocab_size,
        }
    }
}

/// Pairs `h_t` at `layer` with the token at `t + offset`, within each
/// document. Positions whose target falls outside the document are skipped.
pub fn build_probe_examples(corpus: &Corpus, layer: LayerId, offset: i32) -> Result<ProbeDataset> {
    check_offset(offset)?;
    let (hidden_dim, vocab_size) = corpus
        .documents()
        .first()
        .map(|d| (d.meta.hidden_dim, d.meta.vocab_size))
        .unwrap_or((0, 0));
    let mut examples = Vec::new();
    for doc in corpus.documents() {
        let acts = doc.layer(layer)?;
        let doc_id: Arc<str> = Arc::from(doc.doc_id.as_str());
        let len = doc.len() as i64;
        for t in 0..doc.len() {
            let target_pos = t as i64 + offset as i64;
            if target_pos < 0 || target_pos >= len {
                continue;
            }
            examples.push(ProbeExample {
                hidden: acts.row(t).to_vec(),
                target: doc.token_ids[target_pos as usize],
                position: t,
                doc_id: Arc::clone(&doc_id),
            });
        }
    }
    Ok(ProbeDataset {
        examples,
        layer,
        offset,
        hidden_dim,
        vocab_size,
    })
}

/// Number of training examples: `ceil(fraction * n)`, robust to the
/// representation error of products such as `0.7 * 10`.
fn train_size(fraction: f64, n: usize) -> usize {
    let x = fraction * n as f64;
    let nearest = x.round();
    let k = if (x - nearest).abs() <= 1e-9 * (n as f64).max(1.0) {
        nearest
    } else {
        x.ceil()
    };
    k as usize
}

/// Deterministic random partition into `ceil(f·n)` training and the rest
/// held-out examples. Each part keeps the original example order.
pub fn split_dataset(
    ds: &ProbeDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(ProbeDataset, ProbeDataset)> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train_fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = ds.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let k = train_size(train_fraction, n);
    let mut in_train = vec![false; n];
    order[..k].iter().for_each(|&i| in_train[i] = true);
    let (mut train, mut held) = (Vec::with_capacity(k), Vec::with_capacity(n - k));
    for (ex, keep) in ds.examples.iter().zip(in_train) {
        if keep {
            train.push(ex.clone());
        } else {
            held.push(ex.clone());
        }
    }
    Ok((ds.with_examples(train), ds.with_examples(held)))
}
