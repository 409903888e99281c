// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("not an activation container: {0}")]
    BadMagic(PathBuf),

    #[error("unsupported container version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated container: {0}")]
    Truncated(String),

    #[error("header/payload length mismatch: {0}")]
    LengthMismatch(String),

    #[error("unknown dtype tag {0:?}")]
    UnknownDtype(String),

    #[error("malformed header: {0}")]
    Header(String),

    #[error("ragged activations: {0}")]
    RaggedActivations(String),

    #[error("invalid shard: {0}")]
    InvalidShard(String),

    #[error("layer {layer} missing from document {doc_id}")]
    MissingLayer { doc_id: String, layer: i32 },

    #[error("offset {0} outside the supported set {{-3,-2,-1,0,1}}")]
    InvalidOffset(i32),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("empty evaluation set")]
    EmptyEvaluationSet,

    #[error("empty query sequence")]
    EmptyQuery,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("span ({p}, {q}) out of range for document of length {len}")]
    SpanOutOfRange { p: usize, q: usize, len: usize },

    #[error("empty document {0}")]
    EmptyDocument(String),

    #[error("missing unigram span at position {0}")]
    MissingUnigram(usize),

    #[error("not a partition: {0}")]
    NotPartition(String),

    #[error("document id mismatch: {0}")]
    DocMismatch(String),

    #[error("missing probe for layer {layer}, offset {offset}")]
    MissingProbe { layer: i32, offset: i32 },

    #[error("annotation error: {0}")]
    Annotation(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
