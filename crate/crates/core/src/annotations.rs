// SPDX-License-Identifier: MIT OR Apache-2.0

//! Token-indexed word, entity and subject spans, stored as JSON lines:
//! `{"doc_id": ..., "spans": [{"start", "end", "kind", "label"}]}` with
//! inclusive token indices.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};
use crate::store::Corpus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpanKind {
    Word,
    Entity,
    Subject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSpan {
    pub start: usize,
    /// Inclusive.
    pub end: usize,
    pub kind: SpanKind,
    #[serde(default)]
    pub label: String,
}

impl AnnotationSpan {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct DocAnnotations {
    doc_id: String,
    spans: Vec<AnnotationSpan>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnnotationSet {
    docs: BTreeMap<String, Vec<AnnotationSpan>>,
}

impl AnnotationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, doc_id: impl Into<String>, spans: Vec<AnnotationSpan>) -> Result<()> {
        for s in &spans {
            if s.start > s.end {
                return Err(Error::Annotation(format!(
                    "span ({}, {}) has start after end",
                    s.start, s.end
                )));
            }
        }
        self.docs.entry(doc_id.into()).or_default().extend(spans);
        Ok(())
    }

    pub fn spans(&self, doc_id: &str) -> &[AnnotationSpan] {
        self.docs.get(doc_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.docs.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[AnnotationSpan])> {
        self.docs.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn has_kind(&self, kind: SpanKind) -> bool {
        self.docs.values().flatten().any(|s| s.kind == kind)
    }

    /// Checks every annotated document exists in `corpus` and every span
    /// lies inside it.
    pub fn validate_against(&self, corpus: &Corpus) -> Result<()> {
        for (doc_id, spans) in &self.docs {
            let shard = corpus.get(doc_id).ok_or_else(|| {
                Error::DocMismatch(format!("annotations reference unknown document {doc_id:?}"))
            })?;
            if let Some(s) = spans.iter().find(|s| s.end >= shard.len()) {
                return Err(Error::Annotation(format!(
                    "{doc_id}: span ({}, {}) outside document of {} tokens",
                    s.start,
                    s.end,
                    shard.len()
                )));
            }
        }
        Ok(())
    }

    pub fn from_jsonl(reader: impl BufRead) -> Result<Self> {
        let mut set = Self::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(io_err("<annotations>"))?;
            if line.trim().is_empty() {
                continue;
            }
            let doc: DocAnnotations = serde_json::from_str(&line)
                .map_err(|e| Error::Annotation(format!("line {}: {e}", lineno + 1)))?;
            set.insert(doc.doc_id, doc.spans)?;
        }
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(io_err(path))?;
        Self::from_jsonl(BufReader::new(file))
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for (doc_id, spans) in &self.docs {
            out.push_str(&serde_json::to_string(&DocAnnotations {
                doc_id: doc_id.clone(),
                spans: spans.clone(),
            })?);
            out.push('\n');
        }
        Ok(out)
    }
}
