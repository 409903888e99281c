// SPDX-License-Identifier: MIT OR Apache-2.0

//! Per-position probability drops between layer 1 and a later layer, and
//! the span-level erasure score built from them.
//!
//! For a span `p..=q` of length `n`, the score is
//!
//! ```text
//! psi = (delta(q, 0) + sum_{t=p..=q} sum_{i in {-2,-1}} w(t, i, p) * delta(t, i)) / (1 + 2n)
//! ```
//!
//! where `w` is -1 when `t + i` precedes the span and +1 otherwise, and
//! `delta(t, i)` is the drop in probability that the offset-`i` probe assigns
//! to the token actually at `t + i`.

use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};
use crate::probe::{forward_probs, grid_get, ProbeGrid};
use crate::store::{ActivationShard, LayerId};

/// Layer whose probes give the reference probabilities.
pub const EARLY_LAYER: LayerId = 1;
/// Offsets the score reads, in table column order.
pub const SCORE_OFFSETS: [i32; 3] = [0, -1, -2];

/// How terms with `t + i < 0` enter the score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingTermPolicy {
    /// Contribute 0; the normalizer stays `1 + 2n`.
    #[default]
    SkipAsZero,
    /// Contribute 0 and are removed from the normalizer.
    Renormalize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringConfig {
    #[serde(rename = "L")]
    pub late_layer: LayerId,
    pub missing_term_policy: MissingTermPolicy,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            late_layer: 9,
            missing_term_policy: MissingTermPolicy::SkipAsZero,
        }
    }
}

impl ScoringConfig {
    pub fn validate(&self) -> Result<()> {
        if self.late_layer <= EARLY_LAYER {
            return Err(Error::Config(format!(
                "L must exceed layer {EARLY_LAYER}, got {}",
                self.late_layer
            )));
        }
        Ok(())
    }
}

fn offset_column(i: i32) -> Option<usize> {
    SCORE_OFFSETS.iter().position(|&o| o == i)
}

/// `delta(t, i)` for one document; `None` marks terms with `t + i < 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaTable {
    pub doc_id: String,
    deltas: Vec<[Option<f64>; 3]>,
}

impl DeltaTable {
    /// Fills every defined `(t, i)` from `f`; entries with `t + i < 0` are
    /// left missing.
    pub fn from_fn(
        doc_id: impl Into<String>,
        doc_len: usize,
        mut f: impl FnMut(usize, i32) -> f64,
    ) -> Result<Self> {
        let mut deltas = vec![[None; 3]; doc_len];
        for (t, row) in deltas.iter_mut().enumerate() {
            for (col, &i) in SCORE_OFFSETS.iter().enumerate() {
                if t as i64 + i as i64 >= 0 {
                    row[col] = Some(f(t, i));
                }
            }
        }
        let table = Self {
            doc_id: doc_id.into(),
            deltas,
        };
        table.validate()?;
        Ok(table)
    }

    fn validate(&self) -> Result<()> {
        for (t, row) in self.deltas.iter().enumerate() {
            for (col, &i) in SCORE_OFFSETS.iter().enumerate() {
                let defined = t as i64 + i as i64 >= 0;
                match row[col] {
                    Some(d) if !defined => {
                        return Err(Error::Config(format!(
                            "delta({t}, {i}) = {d} refers to a position before the document"
                        )))
                    }
                    None if defined => return Err(Error::Config(format!("delta({t}, {i}) is missing"))),
                    Some(d) if !(-1.0..=1.0).contains(&d) => {
                        return Err(Error::Config(format!("delta({t}, {i}) = {d} outside [-1, 1]")))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    pub fn doc_len(&self) -> usize {
        self.deltas.len()
    }

    /// `delta(t, i)`, `None` when `t + i < 0`. Panics if `t` is outside the
    /// document or `i` is not one of [`SCORE_OFFSETS`].
    pub fn get(&self, t: usize, i: i32) -> Option<f64> {
        let col = offset_column(i).unwrap_or_else(|| panic!("offset {i} is not scored"));
        self.deltas[t][col]
    }

    /// CSV with columns `doc_id,t,i,delta`; missing entries are omitted.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("doc_id,t,i,delta\n");
        let id = csv_field(&self.doc_id);
        for (t, row) in self.deltas.iter().enumerate() {
            for (col, &i) in SCORE_OFFSETS.iter().enumerate() {
                if let Some(d) = row[col] {
                    writeln!(out, "{id},{t},{i},{d}").unwrap();
                }
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(io_err(path))
    }

    /// Parses the single-document CSV written by [`DeltaTable::to_csv`].
    pub fn from_csv(reader: impl BufRead, doc_len: usize) -> Result<Self> {
        let mut doc_id: Option<String> = None;
        let mut deltas = vec![[None; 3]; doc_len];
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(io_err("<csv>"))?;
            if lineno == 0 || line.is_empty() {
                continue;
            }
            let bad = || Error::Config(format!("malformed delta CSV line {}: {line}", lineno + 1));
            let (id, rest) = split_csv_field(&line).ok_or_else(bad)?;
            let mut cols = rest.split(',');
            let t: usize = cols.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let i: i32 = cols.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let d: f64 = cols.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let col = offset_column(i).ok_or_else(bad)?;
            if t >= doc_len {
                return Err(bad());
            }
            match &doc_id {
                Some(prev) if *prev != id => {
                    return Err(Error::DocMismatch(format!("{prev} vs {id} in one table")))
                }
                None => doc_id = Some(id),
                _ => {}
            }
            deltas[t][col] = Some(d);
        }
        let table = Self {
            doc_id: doc_id.unwrap_or_default(),
            deltas,
        };
        table.validate()?;
        Ok(table)
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Splits the first (possibly quoted) field off a CSV line.
fn split_csv_field(line: &str) -> Option<(String, &str)> {
    if let Some(rest) = line.strip_prefix('"') {
        let mut field = String::new();
        let mut chars = rest.char_indices().peekable();
        while let Some((k, c)) = chars.next() {
            if c == '"' {
                if matches!(chars.peek(), Some((_, '"'))) {
                    field.push('"');
                    chars.next();
                } else {
                    return rest[k + 1..].strip_prefix(',').map(|r| (field, r));
                }
            } else {
                field.push(c);
            }
        }
        None
    } else {
        line.split_once(',').map(|(a, b)| (a.to_string(), b))
    }
}

/// `delta(t, i) = P_early(x_{t+i} | h_t^(1)) - P_late(x_{t+i} | h_t^(L))`,
/// read at the ground-truth token `x_{t+i}`.
pub fn build_delta_table(
    shard: &ActivationShard,
    probes: &ProbeGrid,
    cfg: &ScoringConfig,
) -> Result<DeltaTable> {
    cfg.validate()?;
    let early_acts = shard.layer(EARLY_LAYER)?;
    let late_acts = shard.layer(cfg.late_layer)?;
    let mut pairs = Vec::with_capacity(SCORE_OFFSETS.len());
    for &i in &SCORE_OFFSETS {
        let early = grid_get(probes, EARLY_LAYER, i)?;
        let late = grid_get(probes, cfg.late_layer, i)?;
        for p in [early, late] {
            if p.vocab_size != shard.meta.vocab_size || p.hidden_dim != shard.meta.hidden_dim {
                return Err(Error::Config(format!(
                    "probe (layer {}, offset {}) is {}×{}, document {} needs {}×{}",
                    p.layer,
                    p.offset,
                    p.vocab_size,
                    p.hidden_dim,
                    shard.doc_id,
                    shard.meta.vocab_size,
                    shard.meta.hidden_dim
                )));
            }
        }
        pairs.push((early, late));
    }
    let mut deltas = vec![[None; 3]; shard.len()];
    for (t, row) in deltas.iter_mut().enumerate() {
        for (col, &i) in SCORE_OFFSETS.iter().enumerate() {
            let target = t as i64 + i as i64;
            if target < 0 {
                continue;
            }
            let token = shard.token_ids[target as usize] as usize;
            let (early, late) = pairs[col];
            let p_early = forward_probs(early, early_acts.row(t))?[token];
            let p_late = forward_probs(late, late_acts.row(t))?[token];
            row[col] = Some(p_early - p_late);
        }
    }
    Ok(DeltaTable {
        doc_id: shard.doc_id.clone(),
        deltas,
    })
}

/// +1 when position `t + i` lies inside a span starting at `p`, else -1.
pub fn within_indicator(t: i64, i: i64, p: i64) -> i32 {
    if t + i < p {
        -1
    } else {
        1
    }
}

/// Erasure score of span `p..=q` under the default missing-term policy.
pub fn erasure_score(table: &DeltaTable, p: usize, q: usize) -> Result<f64> {
    erasure_score_with(table, p, q, MissingTermPolicy::SkipAsZero)
}

pub fn erasure_score_with(table: &DeltaTable, p: usize, q: usize, policy: MissingTermPolicy) -> Result<f64> {
    if p > q || q >= table.doc_len() {
        return Err(Error::SpanOutOfRange {
            p,
            q,
            len: table.doc_len(),
        });
    }
    Ok(score_unchecked(table, p, q, policy))
}

pub(crate) fn score_unchecked(table: &DeltaTable, p: usize, q: usize, policy: MissingTermPolicy) -> f64 {
    let n = q - p + 1;
    let mut missing = 0usize;
    let mut acc = table.deltas[q][0].expect("delta(t, 0) is always defined");
    for t in p..=q {
        // Columns 2 and 1 hold offsets -2 and -1.
        for (col, i) in [(2usize, -2i64), (1, -1)] {
            match table.deltas[t][col] {
                Some(d) => acc += f64::from(within_indicator(t as i64, i, p as i64)) * d,
                None => missing += 1,
            }
        }
    }
    let terms = match policy {
        MissingTermPolicy::SkipAsZero => 1 + 2 * n,
        MissingTermPolicy::Renormalize => 1 + 2 * n - missing,
    };
    acc / terms as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(len: usize, entries: &[(usize, i32, f64)]) -> DeltaTable {
        DeltaTable::from_fn("d", len, |t, i| {
            entries
                .iter()
                .find(|(et, ei, _)| *et == t && *ei == i)
                .map_or(0.0, |e| e.2)
        })
        .unwrap()
    }

    #[test]
    fn indicator_cases() {
        assert_eq!(within_indicator(5, -2, 4), -1);
        assert_eq!(within_indicator(5, -1, 4), 1);
        assert_eq!(within_indicator(4, 0, 4), 1);
    }

    #[test]
    fn zero_table_scores_zero() {
        let t = table(4, &[]);
        for p in 0..4 {
            for q in p..4 {
                assert_eq!(erasure_score(&t, p, q).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn bigram_hand_value() {
        let t = table(
            5,
            &[
                (3, 0, 0.8),
                (3, -1, 0.7),
                (2, -1, 0.1),
                (2, -2, 0.05),
                (3, -2, 0.05),
            ],
        );
        let psi = erasure_score(&t, 2, 3).unwrap();
        assert!((psi - 0.26).abs() < 1e-12, "{psi}");
    }

    #[test]
    fn unigram_hand_value() {
        let t = table(5, &[(3, 0, 0.9), (3, -1, 0.3), (3, -2, 0.0)]);
        let psi = erasure_score(&t, 3, 3).unwrap();
        assert!((psi - 0.2).abs() < 1e-12, "{psi}");
    }

    #[test]
    fn missing_terms_at_document_start() {
        let t = table(3, &[(0, 0, 0.6), (1, 0, 0.3), (1, -1, 0.3)]);
        assert!(t.get(0, -1).is_none());
        assert!(t.get(0, -2).is_none());
        assert!(t.get(1, -2).is_none());
        assert_eq!(t.get(1, -1), Some(0.3));
        // Unigram at 0: only delta(0,0) exists.
        assert!((erasure_score(&t, 0, 0).unwrap() - 0.2).abs() < 1e-15);
        let renorm = erasure_score_with(&t, 0, 0, MissingTermPolicy::Renormalize).unwrap();
        assert!((renorm - 0.6).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_spans_rejected() {
        let t = table(3, &[]);
        assert!(matches!(
            erasure_score(&t, 2, 1),
            Err(Error::SpanOutOfRange { .. })
        ));
        assert!(matches!(
            erasure_score(&t, 0, 3),
            Err(Error::SpanOutOfRange { .. })
        ));
    }

    #[test]
    fn rejects_out_of_bounds_delta() {
        assert!(DeltaTable::from_fn("d", 2, |_, _| 1.5).is_err());
    }

    #[test]
    fn csv_roundtrip_and_missing_rows_omitted() {
        let t = DeltaTable::from_fn("doc,1", 3, |t, i| (t as f64 - i as f64) / 10.0).unwrap();
        let csv = t.to_csv();
        // 3 + 2 + 1 defined entries.
        assert_eq!(csv.lines().count(), 1 + 6);
        assert!(csv.starts_with("doc_id,t,i,delta\n\"doc,1\",0,0,0\n"));
        let back = DeltaTable::from_csv(csv.as_bytes(), 3).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn late_layer_must_follow_layer_one() {
        let cfg = ScoringConfig {
            late_layer: 1,
            ..ScoringConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
