// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::container::{self, Dtype, TensorEntry};
use crate::error::{Error, Result};

/// Layer index: -1 is the embedding output, `0..n_layers` the residual
/// stream after each block, `n_layers` the final normalized output.
pub type LayerId = i32;

/// Row-major `rows × cols` matrix in working precision.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f32] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Bitwise equality, treating NaN payloads as values.
    pub fn bit_eq(&self, other: &Matrix) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub name: String,
    pub hidden_dim: usize,
    pub vocab_size: usize,
    pub dtype: Dtype,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bos_token_id: Option<u32>,
}

/// Token ids and hidden states of one document.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationShard {
    pub doc_id: String,
    pub token_ids: Vec<u32>,
    pub activations: BTreeMap<LayerId, Matrix>,
    pub meta: ModelMeta,
}

#[derive(Serialize, Deserialize)]
struct ShardHeader {
    kind: String,
    model_meta: ModelMeta,
    doc_id: String,
    token_ids: Vec<u32>,
    dtype: Dtype,
    payload_len: u64,
    tensors: Vec<TensorEntry>,
}

const SHARD_KIND: &str = "activations";

impl ActivationShard {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    pub fn layers(&self) -> impl Iterator<Item = LayerId> + '_ {
        self.activations.keys().copied()
    }

    pub fn layer(&self, layer: LayerId) -> Result<&Matrix> {
        self.activations.get(&layer).ok_or_else(|| Error::MissingLayer {
            doc_id: self.doc_id.clone(),
            layer,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.token_ids.len();
        if self.meta.hidden_dim == 0 {
            return Err(Error::InvalidShard("hidden_dim must be positive".into()));
        }
        if let Some(bad) = self
            .token_ids
            .iter()
            .find(|&&id| id as usize >= self.meta.vocab_size)
        {
            return Err(Error::InvalidShard(format!(
                "token id {bad} outside vocabulary of size {}",
                self.meta.vocab_size
            )));
        }
        for (&layer, m) in &self.activations {
            if layer < -1 {
                return Err(Error::InvalidShard(format!("invalid layer id {layer}")));
            }
            if m.rows() != t {
                return Err(Error::RaggedActivations(format!(
                    "layer {layer} has {} rows, document has {t} tokens",
                    m.rows()
                )));
            }
            if m.cols() != self.meta.hidden_dim {
                return Err(Error::RaggedActivations(format!(
                    "layer {layer} has {} columns, hidden_dim is {}",
                    m.cols(),
                    self.meta.hidden_dim
                )));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let dtype = self.meta.dtype;
        let mut payload = Vec::new();
        let mut tensors = Vec::with_capacity(self.activations.len());
        for (&layer, m) in &self.activations {
            tensors.push(TensorEntry {
                name: None,
                layer_id: Some(layer),
                byte_offset: payload.len() as u64,
                rows: m.rows() as u64,
                cols: m.cols() as u64,
            });
            dtype.encode_f32(m.as_slice(), &mut payload);
        }
        let header = ShardHeader {
            kind: SHARD_KIND.into(),
            model_meta: self.meta.clone(),
            doc_id: self.doc_id.clone(),
            token_ids: self.token_ids.clone(),
            dtype,
            payload_len: payload.len() as u64,
            tensors,
        };
        container::encode(&header, &payload)
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let (header, payload): (ShardHeader, _) = container::decode(bytes, origin)?;
        if header.kind != SHARD_KIND {
            return Err(Error::Header(format!(
                "expected kind {SHARD_KIND:?}, found {:?}",
                header.kind
            )));
        }
        let mut activations = BTreeMap::new();
        for entry in &header.tensors {
            let layer = entry
                .layer_id
                .ok_or_else(|| Error::Header("tensor entry without layer_id".into()))?;
            let data = header.dtype.decode_f32(entry.slice(payload, header.dtype)?);
            let m = Matrix::new(entry.rows as usize, entry.cols as usize, data)?;
            if activations.insert(layer, m).is_some() {
                return Err(Error::InvalidShard(format!("duplicate layer id {layer}")));
            }
        }
        let mut meta = header.model_meta;
        meta.dtype = header.dtype;
        let shard = ActivationShard {
            doc_id: header.doc_id,
            token_ids: header.token_ids,
            activations,
            meta,
        };
        shard.validate()?;
        Ok(shard)
    }

    /// Bitwise equality of all fields.
    pub fn bit_eq(&self, other: &ActivationShard) -> bool {
        self.doc_id == other.doc_id
            && self.token_ids == other.token_ids
            && self.meta == other.meta
            && self.activations.len() == other.activations.len()
            && self
                .activations
                .iter()
                .zip(&other.activations)
                .all(|((la, ma), (lb, mb))| la == lb && ma.bit_eq(mb))
    }
}

/// Validates `shard` and writes it in the container layout.
pub fn write_shard(shard: &ActivationShard, path: &Path) -> Result<()> {
    let bytes = shard.to_bytes()?;
    container::write_file(path, &bytes)
}

pub fn read_shard(path: &Path) -> Result<ActivationShard> {
    let bytes = container::read_file(path)?;
    ActivationShard::from_bytes(&bytes, path)
}
