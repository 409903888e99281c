// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic corpora with planted multi-token lexical items.
//!
//! Hidden states are built from one-hot blocks holding the identity of the
//! current token and the two before it. At layer 1 every block is intact.
//! In later layers the last token of a planted item progressively loses the
//! blocks for tokens inside the item and moves along one direction shared by
//! all items, while blocks for tokens before the item survive. All other positions keep
//! their token information at every layer.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::annotations::{AnnotationSet, AnnotationSpan, SpanKind};
use crate::error::Result;
use crate::store::{ActivationShard, Corpus, Dtype, LayerId, Matrix, ModelMeta};

pub const BOS_ID: u32 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_docs: usize,
    /// Approximate tokens per document, BOS excluded.
    pub doc_len: usize,
    /// Tokens that start a word.
    pub n_start_pieces: usize,
    /// Tokens that continue a word.
    pub n_cont_pieces: usize,
    /// Planted items; each is 2 or 3 tokens.
    pub n_items: usize,
    /// Probability that the next word is a planted item.
    pub item_rate: f64,
    /// Half-width of the uniform noise added to every coordinate.
    pub noise: f32,
    pub layers: Vec<LayerId>,
    /// Layer by which erasure is complete.
    pub erasure_done_at: LayerId,
    pub dtype: Dtype,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_docs: 12,
            doc_len: 40,
            n_start_pieces: 10,
            n_cont_pieces: 8,
            n_items: 6,
            item_rate: 0.3,
            noise: 0.1,
            layers: vec![-1, 0, 1, 5, 9],
            erasure_done_at: 7,
            dtype: Dtype::F32,
            seed: 17,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub annotations: AnnotationSet,
    /// Planted items, by item index.
    pub items: Vec<Vec<u32>>,
}

impl SyntheticSpec {
    pub fn vocab_size(&self) -> usize {
        1 + self.n_start_pieces + self.n_cont_pieces
    }

    pub fn hidden_dim(&self) -> usize {
        3 * self.vocab_size() + 1
    }

    fn start_piece(&self, rng: &mut ChaCha8Rng) -> u32 {
        rng.gen_range(1..=self.n_start_pieces as u32)
    }

    fn cont_piece(&self, rng: &mut ChaCha8Rng) -> u32 {
        let base = 1 + self.n_start_pieces as u32;
        rng.gen_range(base..base + self.n_cont_pieces as u32)
    }

    /// Fraction of within-item information erased at `layer`.
    fn erasure(&self, layer: LayerId) -> f32 {
        let span = (self.erasure_done_at - 1).max(1) as f32;
        ((layer - 1) as f32 / span).clamp(0.0, 1.0)
    }

    fn token_strings(&self) -> Vec<String> {
        const ONSETS: [&str; 10] = ["k", "r", "t", "m", "s", "v", "l", "d", "n", "b"];
        const VOWELS: [&str; 5] = ["a", "o", "e", "i", "u"];
        let mut out = vec!["<s>".to_string()];
        for k in 0..self.n_start_pieces {
            out.push(format!(" {}{}", ONSETS[k % 10], VOWELS[(k / 10 + k) % 5]));
        }
        for k in 0..self.n_cont_pieces {
            out.push(format!(
                "{}{}",
                ONSETS[(k * 3 + 1) % 10],
                VOWELS[(k / 10 + 2 * k + 1) % 5]
            ));
        }
        out
    }

    pub fn generate(&self) -> Result<SyntheticCorpus> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let items: Vec<Vec<u32>> = (0..self.n_items)
            .map(|k| {
                let len = 2 + k % 2;
                let mut item = vec![self.start_piece(&mut rng)];
                item.extend((1..len).map(|_| self.cont_piece(&mut rng)));
                item
            })
            .collect();

        let vocab = self.vocab_size();
        let dim = self.hidden_dim();
        let mut docs = Vec::with_capacity(self.n_docs);
        let mut annotations = AnnotationSet::new();
        for d in 0..self.n_docs {
            let mut tokens = vec![BOS_ID];
            // (start, end) of planted items.
            let mut planted = Vec::new();
            let mut spans = Vec::new();
            while tokens.len() <= self.doc_len {
                let start = tokens.len();
                if rng.gen_bool(self.item_rate) {
                    let k = rng.gen_range(0..items.len());
                    tokens.extend(&items[k]);
                    planted.push((start, tokens.len() - 1));
                    spans.push(AnnotationSpan {
                        start,
                        end: tokens.len() - 1,
                        kind: SpanKind::Word,
                        label: String::new(),
                    });
                    if k % 2 == 0 {
                        for kind in [SpanKind::Entity, SpanKind::Subject] {
                            spans.push(AnnotationSpan {
                                start,
                                end: tokens.len() - 1,
                                kind,
                                label: format!("ITEM{k}"),
                            });
                        }
                    }
                } else {
                    tokens.push(self.start_piece(&mut rng));
                    // Some ordinary words are two pieces but never erased.
                    if rng.gen_bool(0.15) {
                        tokens.push(self.cont_piece(&mut rng));
                    }
                    spans.push(AnnotationSpan {
                        start,
                        end: tokens.len() - 1,
                        kind: SpanKind::Word,
                        label: String::new(),
                    });
                }
            }

            let t_len = tokens.len();
            let mut item_end: Vec<Option<usize>> = vec![None; t_len];
            for &(start, end) in &planted {
                item_end[end] = Some(end - start + 1);
            }
            let mut activations = BTreeMap::new();
            for &layer in &self.layers {
                let mut m = Matrix::zeros(t_len, dim);
                let erased = self.erasure(layer);
                for t in 0..t_len {
                    let row = m.row_mut(t);
                    let blocks = if layer <= 0 { 1 } else { 3 };
                    for back in 0..blocks.min(t + 1) {
                        let mut scale = 1.0;
                        if let Some(n) = item_end[t] {
                            if back < n {
                                scale = 1.0 - erased;
                            }
                        }
                        row[back * vocab + tokens[t - back] as usize] += scale;
                    }
                    if item_end[t].is_some() {
                        row[3 * vocab] += erased;
                    }
                    for v in row.iter_mut() {
                        *v += rng.gen_range(-self.noise..=self.noise);
                    }
                }
                activations.insert(layer, m);
            }
            let doc_id = format!("d{d}");
            annotations.insert(doc_id.clone(), spans)?;
            docs.push(ActivationShard {
                doc_id,
                token_ids: tokens,
                activations,
                meta: ModelMeta {
                    name: "synthetic".into(),
                    hidden_dim: dim,
                    vocab_size: vocab,
                    dtype: self.dtype,
                    bos_token_id: Some(BOS_ID),
                },
            });
        }
        for d in &docs {
            d.validate()?;
        }
        let corpus = Corpus::new(docs)?.with_token_strings(self.token_strings());
        Ok(SyntheticCorpus {
            corpus,
            annotations,
            items,
        })
    }
}
