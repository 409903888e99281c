// SPDX-License-Identifier: MIT OR Apache-2.0

//! Greedy segmentation of a document into non-overlapping scored spans.
//!
//! Every span is scored; spans are visited by descending score and kept when
//! they do not overlap a span kept earlier. Because all unigrams take part,
//! the kept spans always cover the document.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::{score_unchecked, DeltaTable, MissingTermPolicy};
use crate::store::Corpus;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredSpan {
    pub p: usize,
    /// Inclusive end.
    pub q: usize,
    pub psi: f64,
}

impl ScoredSpan {
    pub fn len(&self) -> usize {
        self.q - self.p + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn overlaps(&self, other: &ScoredSpan) -> bool {
        !(other.p > self.q || other.q < self.p)
    }
}

/// Visiting order: score descending, then start ascending, then length
/// descending. Total, so segmentation does not depend on input order.
pub fn greedy_order(a: &ScoredSpan, b: &ScoredSpan) -> Ordering {
    b.psi
        .total_cmp(&a.psi)
        .then(a.p.cmp(&b.p))
        .then(b.len().cmp(&a.len()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    pub doc_id: String,
    pub doc_len: usize,
    /// Sorted by start position.
    pub segments: Vec<ScoredSpan>,
}

impl Segmentation {
    /// Checks the segments tile `[0, doc_len)` exactly.
    pub fn check_partition(&self) -> Result<()> {
        let mut next = 0usize;
        let mut sorted = self.segments.clone();
        sorted.sort_by_key(|s| s.p);
        for s in &sorted {
            if s.p > s.q || s.p != next {
                return Err(Error::NotPartition(format!(
                    "{}: segment ({}, {}) where position {next} was expected",
                    self.doc_id, s.p, s.q
                )));
            }
            next = s.q + 1;
        }
        if next != self.doc_len {
            return Err(Error::NotPartition(format!(
                "{}: segments end at {next}, document has {} tokens",
                self.doc_id, self.doc_len
            )));
        }
        Ok(())
    }

    pub fn multi_token(&self) -> impl Iterator<Item = &ScoredSpan> {
        self.segments.iter().filter(|s| s.len() >= 2)
    }

    /// Highest-scoring segment under [`greedy_order`].
    pub fn best(&self) -> Option<&ScoredSpan> {
        self.segments.iter().min_by(|a, b| greedy_order(a, b))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmenterConfig {
    /// Longest span considered; `None` is unbounded.
    pub max_span_len: Option<usize>,
    /// Documents longer than this are segmented chunk by chunk.
    pub chunk_len: usize,
    pub missing_term_policy: MissingTermPolicy,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self {
            max_span_len: None,
            chunk_len: 512,
            missing_term_policy: MissingTermPolicy::SkipAsZero,
        }
    }
}

impl SegmenterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_span_len == Some(0) {
            return Err(Error::Config("max_span_len must be positive".into()));
        }
        if self.chunk_len == 0 {
            return Err(Error::Config("chunk_len must be positive".into()));
        }
        Ok(())
    }
}

fn spans_in(
    table: &DeltaTable,
    start: usize,
    end: usize,
    max_span_len: Option<usize>,
    policy: MissingTermPolicy,
) -> Vec<ScoredSpan> {
    let len = end - start;
    let longest = max_span_len.map_or(len, |m| m.min(len));
    let mut out = Vec::with_capacity((1..=longest).map(|n| len - n + 1).sum());
    for n in 1..=longest {
        for p in start..=end - n {
            let q = p + n - 1;
            out.push(ScoredSpan {
                p,
                q,
                psi: score_unchecked(table, p, q, policy),
            });
        }
    }
    out
}

/// Scores every span of at most `max_span_len` tokens, shortest first.
pub fn score_all_spans(table: &DeltaTable, max_span_len: Option<usize>) -> Result<Vec<ScoredSpan>> {
    if table.doc_len() == 0 {
        return Err(Error::EmptyDocument(table.doc_id.clone()));
    }
    if max_span_len == Some(0) {
        return Err(Error::Config("max_span_len must be positive".into()));
    }
    Ok(spans_in(
        table,
        0,
        table.doc_len(),
        max_span_len,
        MissingTermPolicy::SkipAsZero,
    ))
}

/// Greedy selection over `spans`, all of which lie in `[start, end)`.
fn greedy_select(mut spans: Vec<ScoredSpan>, start: usize, end: usize) -> Vec<ScoredSpan> {
    spans.sort_by(greedy_order);
    let mut taken = vec![false; end - start];
    let mut accepted = Vec::new();
    for s in spans {
        let cells = &mut taken[s.p - start..=s.q - start];
        if cells.iter().all(|c| !c) {
            cells.iter_mut().for_each(|c| *c = true);
            accepted.push(s);
        }
    }
    accepted.sort_by_key(|s| s.p);
    accepted
}

/// Greedy non-overlapping selection over scored spans of one document.
/// `spans` must include every unigram so that the result is a partition.
pub fn segment_document(
    doc_id: impl Into<String>,
    spans: &[ScoredSpan],
    doc_len: usize,
) -> Result<Segmentation> {
    let doc_id = doc_id.into();
    if doc_len == 0 {
        return Err(Error::EmptyDocument(doc_id));
    }
    let mut has_unigram = vec![false; doc_len];
    for s in spans {
        if s.p > s.q || s.q >= doc_len {
            return Err(Error::SpanOutOfRange {
                p: s.p,
                q: s.q,
                len: doc_len,
            });
        }
        if s.psi.is_nan() {
            return Err(Error::NonFinite(format!("score of span ({}, {})", s.p, s.q)));
        }
        if s.p == s.q {
            has_unigram[s.p] = true;
        }
    }
    if let Some(t) = has_unigram.iter().position(|u| !u) {
        return Err(Error::MissingUnigram(t));
    }
    let segments = greedy_select(spans.to_vec(), 0, doc_len);
    Ok(Segmentation {
        doc_id,
        doc_len,
        segments,
    })
}

/// Scores and segments a whole document, chunk by chunk.
pub fn segment_table(table: &DeltaTable, cfg: &SegmenterConfig) -> Result<Segmentation> {
    cfg.validate()?;
    let len = table.doc_len();
    if len == 0 {
        return Err(Error::EmptyDocument(table.doc_id.clone()));
    }
    let mut segments = Vec::new();
    let mut start = 0;
    while start < len {
        let end = (start + cfg.chunk_len).min(len);
        let spans = spans_in(table, start, end, cfg.max_span_len, cfg.missing_term_policy);
        segments.extend(greedy_select(spans, start, end));
        start = end;
    }
    Ok(Segmentation {
        doc_id: table.doc_id.clone(),
        doc_len: len,
        segments,
    })
}

#[derive(Serialize)]
struct SegmentRecord<'a> {
    p: usize,
    q: usize,
    psi: f64,
    token_ids: &'a [u32],
    surface: String,
}

#[derive(Serialize)]
struct SegmentationRecord<'a> {
    doc_id: &'a str,
    segments: Vec<SegmentRecord<'a>>,
}

/// JSON export `{doc_id, segments: [{p, q, psi, token_ids, surface}]}`,
/// sorted by `p`.
pub fn segmentation_json(seg: &Segmentation, corpus: &Corpus) -> Result<String> {
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
    let mut sorted = seg.segments.clone();
    sorted.sort_by_key(|s| s.p);
    let segments = sorted
        .iter()
        .map(|s| {
            let ids = &shard.token_ids[s.p..=s.q];
            SegmentRecord {
                p: s.p,
                q: s.q,
                psi: s.psi,
                token_ids: ids,
                surface: corpus.surface(ids),
            }
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&SegmentationRecord {
        doc_id: &seg.doc_id,
        segments,
    })?;
    text.push('\n');
    Ok(text)
}
