// SPDX-License-Identifier: MIT OR Apache-2.0

//! Reference implementations written directly from the definitions, kept
//! independent of the library code paths they check.

#![allow(dead_code, clippy::needless_range_loop, clippy::type_complexity)]

use std::collections::{BTreeMap, HashMap};

use erasure_core::probe::ProbeModel;
use erasure_core::store::{ProbeDataset, ProbeExample};
use rand::Rng;

/// Raw delta table: `deltas[t][k]` for offsets `[0, -1, -2]`, `None` when
/// `t + i < 0`.
pub type RawDeltas = Vec<[Option<f64>; 3]>;

pub fn random_deltas(rng: &mut impl Rng, len: usize) -> RawDeltas {
    (0..len)
        .map(|t| {
            let mut row = [None; 3];
            for (k, i) in [0i64, -1, -2].into_iter().enumerate() {
                if t as i64 + i >= 0 {
                    row[k] = Some(rng.gen_range(-1.0..=1.0));
                }
            }
            row
        })
        .collect()
}

/// Score of span `p..=q`: the current-token drop at `q`, plus the drops for
/// offsets -1 and -2 at each position of the span, counted positively when
/// the referenced token is inside the span and negatively when it precedes
/// it. Terms before the document contribute nothing. Divided by `1 + 2n`.
pub fn brute_force_psi(deltas: &RawDeltas, p: usize, q: usize) -> f64 {
    let n = (q - p + 1) as f64;
    let mut terms = vec![deltas[q][0].unwrap()];
    for t in p..=q {
        for (k, i) in [(1usize, -1i64), (2, -2)] {
            let referenced = t as i64 + i;
            if referenced < 0 {
                continue;
            }
            let value = deltas[t][k].unwrap();
            terms.push(if referenced < p as i64 { -value } else { value });
        }
    }
    terms.iter().sum::<f64>() / (1.0 + 2.0 * n)
}

/// Literal greedy segmentation: every span gets a score, spans are visited
/// in descending score order (ties: earlier start, then longer span), and a
/// span is kept iff every kept span `(x, y)` satisfies `x > q || y < p`.
pub fn naive_segmentation(scores: &BTreeMap<(usize, usize), f64>) -> Vec<(usize, usize)> {
    let mut all: Vec<(usize, usize, f64)> = scores.iter().map(|(&(p, q), &s)| (p, q, s)).collect();
    all.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .unwrap()
            .then(a.0.cmp(&b.0))
            .then((b.1 - b.0).cmp(&(a.1 - a.0)))
    });
    let mut kept: Vec<(usize, usize)> = Vec::new();
    for (p, q, _) in all {
        if kept.iter().all(|&(x, y)| x > q || y < p) {
            kept.push((p, q));
        }
    }
    kept.sort();
    kept
}

/// Mean cross-entropy computed from scratch in f64.
pub fn reference_loss(probe: &ProbeModel, examples: &[ProbeExample]) -> f64 {
    let mut total = 0.0;
    for ex in examples {
        let logits: Vec<f64> = (0..probe.vocab_size)
            .map(|c| {
                probe.bias[c]
                    + (0..probe.hidden_dim)
                        .map(|d| probe.weights[c * probe.hidden_dim + d] * ex.hidden[d] as f64)
                        .sum::<f64>()
            })
            .collect();
        let max = logits.iter().cloned().fold(f64::MIN, f64::max);
        let z: f64 = logits.iter().map(|l| (l - max).exp()).sum();
        total += -(logits[ex.target as usize] - max - z.ln());
    }
    total / examples.len() as f64
}

/// Central finite differences of the mean cross-entropy, weights then bias.
pub fn finite_difference_gradient(probe: &ProbeModel, examples: &[ProbeExample], step: f64) -> Vec<f64> {
    let mut grads = Vec::new();
    let mut work = probe.clone();
    for k in 0..probe.weights.len() {
        let orig = work.weights[k];
        work.weights[k] = orig + step;
        let up = reference_loss(&work, examples);
        work.weights[k] = orig - step;
        let down = reference_loss(&work, examples);
        work.weights[k] = orig;
        grads.push((up - down) / (2.0 * step));
    }
    for k in 0..probe.bias.len() {
        let orig = work.bias[k];
        work.bias[k] = orig + step;
        let up = reference_loss(&work, examples);
        work.bias[k] = orig - step;
        let down = reference_loss(&work, examples);
        work.bias[k] = orig;
        grads.push((up - down) / (2.0 * step));
    }
    grads
}

/// Occurrences of `query` in each document by checking every start index.
pub fn sliding_window_count(corpus: &[Vec<u32>], query: &[u32]) -> u64 {
    let mut count = 0;
    for doc in corpus {
        if query.len() > doc.len() {
            continue;
        }
        for start in 0..=doc.len() - query.len() {
            if (0..query.len()).all(|k| doc[start + k] == query[k]) {
                count += 1;
            }
        }
    }
    count
}

/// Decodes an IEEE-754 binary16 bit pattern by hand.
pub fn f16_bits_to_f32(bits: u16) -> f32 {
    let sign = if bits >> 15 == 1 { -1.0f32 } else { 1.0 };
    let exponent = ((bits >> 10) & 0x1f) as i32;
    let mantissa = (bits & 0x3ff) as f32;
    match exponent {
        0 => sign * mantissa * 2f32.powi(-24),
        0x1f if mantissa == 0.0 => sign * f32::INFINITY,
        0x1f => f32::NAN,
        e => sign * (1.0 + mantissa / 1024.0) * 2f32.powi(e - 15),
    }
}

/// Container fields read straight from the byte layout.
pub struct RawContainer {
    pub version: u32,
    pub header: serde_json::Value,
    pub payload: Vec<u8>,
}

pub fn parse_container_bytes(bytes: &[u8]) -> RawContainer {
    assert_eq!(&bytes[0..4], b"ACTS");
    let version = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]);
    let mut len_bytes = [0u8; 8];
    len_bytes.copy_from_slice(&bytes[8..16]);
    let header_len = u64::from_le_bytes(len_bytes) as usize;
    let header = serde_json::from_slice(&bytes[16..16 + header_len]).unwrap();
    RawContainer {
        version,
        header,
        payload: bytes[16 + header_len..].to_vec(),
    }
}

/// Layer id → row-major f32 matrix from a shard container, decoding the
/// payload element by element.
pub fn decode_shard_matrices(bytes: &[u8]) -> BTreeMap<i64, (usize, usize, Vec<f32>)> {
    let raw = parse_container_bytes(bytes);
    let dtype = raw.header["dtype"].as_str().unwrap().to_string();
    let mut out = BTreeMap::new();
    for t in raw.header["tensors"].as_array().unwrap() {
        let rows = t["rows"].as_u64().unwrap() as usize;
        let cols = t["cols"].as_u64().unwrap() as usize;
        let off = t["byte_offset"].as_u64().unwrap() as usize;
        let values = (0..rows * cols)
            .map(|k| match dtype.as_str() {
                "f16" => {
                    let b = off + 2 * k;
                    f16_bits_to_f32(u16::from_le_bytes([raw.payload[b], raw.payload[b + 1]]))
                }
                "f32" => {
                    let b = off + 4 * k;
                    f32::from_le_bytes([
                        raw.payload[b],
                        raw.payload[b + 1],
                        raw.payload[b + 2],
                        raw.payload[b + 3],
                    ])
                }
                other => panic!("unexpected dtype {other}"),
            })
            .collect();
        out.insert(t["layer_id"].as_i64().unwrap(), (rows, cols, values));
    }
    out
}

/// Counts and mean scores of multi-token segments, by rescanning every
/// segment of every document.
pub fn recount_vocab(
    docs: &[(Vec<u32>, Vec<(usize, usize, f64)>)],
    min_count: usize,
) -> HashMap<Vec<u32>, (usize, f64)> {
    let mut seen: Vec<(Vec<u32>, f64)> = Vec::new();
    for (tokens, segments) in docs {
        for &(p, q, psi) in segments {
            if q > p {
                seen.push((tokens[p..=q].to_vec(), psi));
            }
        }
    }
    let mut out = HashMap::new();
    for (key, _) in &seen {
        if out.contains_key(key) {
            continue;
        }
        let scores: Vec<f64> = seen.iter().filter(|(k, _)| k == key).map(|(_, s)| *s).collect();
        if scores.len() >= min_count {
            out.insert(
                key.clone(),
                (scores.len(), scores.iter().sum::<f64>() / scores.len() as f64),
            );
        }
    }
    out
}

/// Nearest-class-mean classifier accuracy on a dataset (means estimated on
/// the same data).
pub fn nearest_mean_accuracy(ds: &ProbeDataset) -> f64 {
    let dim = ds.hidden_dim;
    let mut sums = vec![vec![0.0f64; dim]; ds.vocab_size];
    let mut counts = vec![0usize; ds.vocab_size];
    for ex in &ds.examples {
        counts[ex.target as usize] += 1;
        for d in 0..dim {
            sums[ex.target as usize][d] += ex.hidden[d] as f64;
        }
    }
    let means: Vec<Option<Vec<f64>>> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| (c > 0).then(|| s.iter().map(|v| v / c as f64).collect()))
        .collect();
    let correct = ds
        .examples
        .iter()
        .filter(|ex| {
            let best = means
                .iter()
                .enumerate()
                .filter_map(|(k, m)| m.as_ref().map(|m| (k, m)))
                .map(|(k, m)| {
                    let d: f64 = m
                        .iter()
                        .zip(&ex.hidden)
                        .map(|(a, b)| (a - *b as f64).powi(2))
                        .sum();
                    (k, d)
                })
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap()
                .0;
            best == ex.target as usize
        })
        .count();
    correct as f64 / ds.len() as f64
}

/// Standard normal draw (Box–Muller).
pub fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// 1000 examples, 8 classes in 16 dimensions: class `k` is centered at
/// `6·e_k` (pairwise mean distance ≈ 8.5) with unit Gaussian noise.
pub fn separable_dataset(seed: u64) -> ProbeDataset {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (dim, classes, n) = (16usize, 8usize, 1000usize);
    let doc: std::sync::Arc<str> = std::sync::Arc::from("synthetic");
    let examples = (0..n)
        .map(|k| {
            let target = (k % classes) as u32;
            let hidden = (0..dim)
                .map(|d| {
                    let mean = if d == target as usize { 6.0 } else { 0.0 };
                    (mean + gaussian(&mut rng)) as f32
                })
                .collect();
            ProbeExample {
                hidden,
                target,
                position: k,
                doc_id: doc.clone(),
            }
        })
        .collect();
    ProbeDataset {
        examples,
        layer: 1,
        offset: 0,
        hidden_dim: dim,
        vocab_size: classes,
    }
}

/// Random dataset with `n` examples for gradient and loss checks.
pub fn random_dataset(rng: &mut impl Rng, n: usize, dim: usize, vocab: usize) -> ProbeDataset {
    let doc: std::sync::Arc<str> = std::sync::Arc::from("r");
    ProbeDataset {
        examples: (0..n)
            .map(|k| ProbeExample {
                hidden: (0..dim).map(|_| rng.gen_range(-2.0f32..2.0)).collect(),
                target: rng.gen_range(0..vocab as u32),
                position: k,
                doc_id: doc.clone(),
            })
            .collect(),
        layer: 1,
        offset: 0,
        hidden_dim: dim,
        vocab_size: vocab,
    }
}
