// SPDX-License-Identifier: MIT OR Apache-2.0

//! Implicit-vocabulary read-out: multi-token segments that recur across a
//! corpus, ranked by mean erasure score, and their agreement with
//! multi-token words (MTW) and multi-token entities (MTE).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::annotations::{AnnotationSet, SpanKind};
use crate::error::{io_err, Error, Result};
use crate::probe::ProbeGrid;
use crate::scoring::{build_delta_table, DeltaTable, ScoringConfig};
use crate::segment::{segment_table, Segmentation, SegmenterConfig};
use crate::store::{Corpus, LayerId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub token_ids: Vec<u32>,
    pub surface: String,
    pub n: usize,
    pub ct: usize,
    pub psi_mean: f64,
}

fn doc_tokens<'a>(corpus: &'a Corpus, seg: &Segmentation) -> Result<&'a [u32]> {
    let shard = corpus
        .get(&seg.doc_id)
        .ok_or_else(|| Error::DocMismatch(format!("no document {:?} in corpus", seg.doc_id)))?;
    if shard.len() != seg.doc_len {
        return Err(Error::DocMismatch(format!(
            "{}: segmentation covers {} tokens, document has {}",
            seg.doc_id,
            seg.doc_len,
            shard.len()
        )));
    }
    Ok(&shard.token_ids)
}

/// Groups multi-token segments by token-id sequence and keeps groups seen
/// at least `min_count` times, sorted by mean score (descending).
///
/// Scores within a group are summed in sorted order, so the result does not
/// depend on document order.
pub fn aggregate_vocab(
    segmentations: &[Segmentation],
    corpus: &Corpus,
    min_count: usize,
) -> Result<Vec<VocabEntry>> {
    if min_count == 0 {
        return Err(Error::Config("min_count must be at least 1".into()));
    }
    let mut groups: BTreeMap<&[u32], Vec<f64>> = BTreeMap::new();
    for seg in segmentations {
        let tokens = doc_tokens(corpus, seg)?;
        for s in seg.multi_token() {
            groups.entry(&tokens[s.p..=s.q]).or_default().push(s.psi);
        }
    }
    let mut vocab: Vec<VocabEntry> = groups
        .into_iter()
        .filter(|(_, scores)| scores.len() >= min_count)
        .map(|(ids, mut scores)| {
            scores.sort_by(f64::total_cmp);
            let psi_mean = scores.iter().sum::<f64>() / scores.len() as f64;
            VocabEntry {
                token_ids: ids.to_vec(),
                surface: corpus.surface(ids),
                n: ids.len(),
                ct: scores.len(),
                psi_mean,
            }
        })
        .collect();
    vocab.sort_by(|a, b| {
        b.psi_mean
            .total_cmp(&a.psi_mean)
            .then_with(|| a.token_ids.cmp(&b.token_ids))
    });
    Ok(vocab)
}

fn escape_surface(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c if c.is_control() => write!(out, "\\u{{{:04x}}}", c as u32).unwrap(),
            c => out.push(c),
        }
    }
    out
}

pub const VOCAB_TSV_HEADER: &str = "surface\ttoken_ids\tn\tct\tpsi_mean";

/// TSV with columns `surface, token_ids, n, ct, psi_mean`.
pub fn vocab_tsv(vocab: &[VocabEntry]) -> String {
    let mut out = String::from(VOCAB_TSV_HEADER);
    out.push('\n');
    for e in vocab {
        let ids: Vec<String> = e.token_ids.iter().map(u32::to_string).collect();
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{:.6}",
            escape_surface(&e.surface),
            ids.join(","),
            e.n,
            e.ct,
            e.psi_mean
        )
        .unwrap();
    }
    out
}

pub fn write_vocab_tsv(vocab: &[VocabEntry], path: &Path) -> Result<()> {
    std::fs::write(path, vocab_tsv(vocab)).map_err(io_err(path))
}

/// Reads back a vocabulary TSV. Surfaces stay in their escaped form and
/// scores carry the six printed decimals.
pub fn read_vocab_tsv(text: &str) -> Result<Vec<VocabEntry>> {
    let mut lines = text.lines();
    if lines.next() != Some(VOCAB_TSV_HEADER) {
        return Err(Error::Config("vocabulary TSV header mismatch".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let bad = || Error::Config(format!("malformed vocabulary row: {line}"));
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 5 {
                return Err(bad());
            }
            let token_ids = cols[1]
                .split(',')
                .map(|s| s.parse::<u32>().map_err(|_| bad()))
                .collect::<Result<Vec<_>>>()?;
            Ok(VocabEntry {
                surface: cols[0].to_string(),
                n: cols[2].parse().map_err(|_| bad())?,
                ct: cols[3].parse().map_err(|_| bad())?,
                psi_mean: cols[4].parse().map_err(|_| bad())?,
                token_ids,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    /// Vocabulary entries found in the reference set.
    pub matched: usize,
    pub vocab_size: usize,
    /// Distinct token sequences in the reference set.
    pub reference_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabEvaluation {
    pub mtw: PrecisionRecall,
    pub mte: PrecisionRecall,
    /// Share of the vocabulary that is an MTW or an MTE.
    pub either_precision: f64,
    pub warnings: Vec<String>,
}

/// Distinct token sequences of annotated spans of `kind` with at least two
/// tokens.
pub fn reference_set(
    annotations: &AnnotationSet,
    corpus: &Corpus,
    kind: SpanKind,
) -> Result<BTreeSet<Vec<u32>>> {
    annotations.validate_against(corpus)?;
    let mut set = BTreeSet::new();
    for (doc_id, spans) in annotations.iter() {
        let tokens = &corpus.get(doc_id).expect("validated").token_ids;
        for s in spans.iter().filter(|s| s.kind == kind && s.len() >= 2) {
            set.insert(tokens[s.start..=s.end].to_vec());
        }
    }
    Ok(set)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn score_against(
    keys: &BTreeSet<&[u32]>,
    reference: &BTreeSet<Vec<u32>>,
    name: &str,
    warnings: &mut Vec<String>,
) -> PrecisionRecall {
    let matched = keys.iter().filter(|k| reference.contains(**k)).count();
    if reference.is_empty() {
        warnings.push(format!("{name} reference set is empty; recall reported as 0"));
    }
    PrecisionRecall {
        precision: ratio(matched, keys.len()),
        recall: ratio(matched, reference.len()),
        matched,
        vocab_size: keys.len(),
        reference_size: reference.len(),
    }
}

/// Type-level precision and recall of the vocabulary against the MTW and
/// MTE reference sets. Matching is exact token-id equality.
pub fn evaluate_vocab(
    vocab: &[VocabEntry],
    annotations: &AnnotationSet,
    corpus: &Corpus,
) -> Result<VocabEvaluation> {
    let mtw_ref = reference_set(annotations, corpus, SpanKind::Word)?;
    let mte_ref = reference_set(annotations, corpus, SpanKind::Entity)?;
    let keys: BTreeSet<&[u32]> = vocab.iter().map(|e| e.token_ids.as_slice()).collect();
    let mut warnings = Vec::new();
    if keys.is_empty() {
        warnings.push("vocabulary is empty; precision reported as 0".to_string());
    }
    let mtw = score_against(&keys, &mtw_ref, "MTW", &mut warnings);
    let mte = score_against(&keys, &mte_ref, "MTE", &mut warnings);
    let either = keys
        .iter()
        .filter(|k| mtw_ref.contains(**k) || mte_ref.contains(**k))
        .count();
    Ok(VocabEvaluation {
        mtw,
        mte,
        either_precision: ratio(either, keys.len()),
        warnings,
    })
}

/// Delta tables for every document of `corpus`, in document order.
pub fn score_corpus(corpus: &Corpus, probes: &ProbeGrid, cfg: &ScoringConfig) -> Result<Vec<DeltaTable>> {
    corpus
        .documents()
        .iter()
        .map(|shard| build_delta_table(shard, probes, cfg))
        .collect()
}

pub fn segment_tables(tables: &[DeltaTable], cfg: &SegmenterConfig) -> Result<Vec<Segmentation>> {
    tables.iter().map(|t| segment_table(t, cfg)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    #[serde(rename = "L")]
    pub late_layer: LayerId,
    pub vocab_size: usize,
    pub evaluation: VocabEvaluation,
}

/// Segment → aggregate → evaluate for precomputed delta tables, one row per
/// late layer.
pub fn ablate_from_tables(
    tables_by_layer: &BTreeMap<LayerId, Vec<DeltaTable>>,
    corpus: &Corpus,
    annotations: &AnnotationSet,
    seg_cfg: &SegmenterConfig,
    min_count: usize,
) -> Result<Vec<AblationRow>> {
    tables_by_layer
        .iter()
        .map(|(&layer, tables)| {
            let segs = segment_tables(tables, seg_cfg)?;
            let vocab = aggregate_vocab(&segs, corpus, min_count)?;
            Ok(AblationRow {
                late_layer: layer,
                vocab_size: vocab.len(),
                evaluation: evaluate_vocab(&vocab, annotations, corpus)?,
            })
        })
        .collect()
}

/// Runs the full score → segment → aggregate → evaluate pipeline once per
/// late layer in `layers`.
#[allow(clippy::too_many_arguments)]
pub fn ablate_late_layer(
    corpus: &Corpus,
    probes: &ProbeGrid,
    layers: &[LayerId],
    base: &ScoringConfig,
    annotations: &AnnotationSet,
    seg_cfg: &SegmenterConfig,
    min_count: usize,
) -> Result<Vec<AblationRow>> {
    for &layer in layers {
        for i in crate::scoring::SCORE_OFFSETS {
            crate::probe::grid_get(probes, layer, i)?;
        }
    }
    let mut tables = BTreeMap::new();
    for &layer in layers {
        let cfg = ScoringConfig {
            late_layer: layer,
            ..base.clone()
        };
        tables.insert(layer, score_corpus(corpus, probes, &cfg)?);
    }
    ablate_from_tables(&tables, corpus, annotations, seg_cfg, min_count)
}
