// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::ProbeModel;
use super::train::TrainConfig;
use crate::error::{Error, Result};
use crate::store::container::{self, Dtype, TensorEntry};
use crate::store::{LayerId, ModelMeta};

const PROBE_KIND: &str = "probe";

/// A probe together with the model it reads and the settings it was
/// trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeCheckpoint {
    pub probe: ProbeModel,
    pub model_meta: ModelMeta,
    pub train_config: TrainConfig,
}

#[derive(Serialize, Deserialize)]
struct ProbeHeader {
    kind: String,
    model_meta: ModelMeta,
    layer: LayerId,
    offset: i32,
    train_config: TrainConfig,
    dtype: Dtype,
    payload_len: u64,
    tensors: Vec<TensorEntry>,
}

/// Canonical checkpoint file name for a grid cell.
pub fn probe_file_name(layer: LayerId, offset: i32) -> String {
    format!("probe_l{layer}_o{offset}.probe")
}

impl ProbeCheckpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let p = &self.probe;
        if !p.is_finite() {
            return Err(Error::NonFinite("probe parameters".into()));
        }
        if p.hidden_dim != self.model_meta.hidden_dim || p.vocab_size != self.model_meta.vocab_size {
            return Err(Error::Config(format!(
                "probe shape {}×{} does not match model {}×{}",
                p.vocab_size, p.hidden_dim, self.model_meta.vocab_size, self.model_meta.hidden_dim
            )));
        }
        // Probes are kept at full precision regardless of the shard dtype.
        let dtype = Dtype::F64;
        let mut payload = Vec::new();
        dtype.encode_f64(&p.weights, &mut payload);
        let bias_offset = payload.len() as u64;
        dtype.encode_f64(&p.bias, &mut payload);
        let header = ProbeHeader {
            kind: PROBE_KIND.into(),
            model_meta: self.model_meta.clone(),
            layer: p.layer,
            offset: p.offset,
            train_config: self.train_config.clone(),
            dtype,
            payload_len: payload.len() as u64,
            tensors: vec![
                TensorEntry {
                    name: Some("weights".into()),
                    layer_id: None,
                    byte_offset: 0,
                    rows: p.vocab_size as u64,
                    cols: p.hidden_dim as u64,
                },
                TensorEntry {
                    name: Some("bias".into()),
                    layer_id: None,
                    byte_offset: bias_offset,
                    rows: p.vocab_size as u64,
                    cols: 1,
                },
            ],
        };
        container::encode(&header, &payload)
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let (header, payload): (ProbeHeader, _) = container::decode(bytes, origin)?;
        if header.kind != PROBE_KIND {
            return Err(Error::Header(format!(
                "expected kind {PROBE_KIND:?}, found {:?}",
                header.kind
            )));
        }
        let tensor = |name: &str| {
            header
                .tensors
                .iter()
                .find(|t| t.name.as_deref() == Some(name))
                .ok_or_else(|| Error::Header(format!("probe file lacks tensor {name:?}")))
        };
        let w = tensor("weights")?;
        let b = tensor("bias")?;
        let (vocab_size, hidden_dim) = (w.rows as usize, w.cols as usize);
        if b.rows as usize != vocab_size || b.cols != 1 {
            return Err(Error::Header("bias shape does not match weights".into()));
        }
        let probe = ProbeModel {
            weights: header.dtype.decode_f64(w.slice(payload, header.dtype)?),
            bias: header.dtype.decode_f64(b.slice(payload, header.dtype)?),
            hidden_dim,
            vocab_size,
            layer: header.layer,
            offset: header.offset,
        };
        if !probe.is_finite() {
            return Err(Error::NonFinite(format!(
                "probe parameters in {}",
                origin.display()
            )));
        }
        Ok(Self {
            probe,
            model_meta: header.model_meta,
            train_config: header.train_config,
        })
    }
}

pub fn write_probe(checkpoint: &ProbeCheckpoint, path: &Path) -> Result<()> {
    container::write_file(path, &checkpoint.to_bytes()?)
}

pub fn read_probe(path: &Path) -> Result<ProbeCheckpoint> {
    ProbeCheckpoint::from_bytes(&container::read_file(path)?, path)
}
