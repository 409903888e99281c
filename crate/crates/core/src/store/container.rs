// SPDX-License-Identifier: MIT OR Apache-2.0

//! Binary container shared by activation shards and probe checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "ACTS" | version: u32 | header_len: u64 | header (UTF-8 JSON) | payload
//! ```
//!
//! Every header carries `payload_len`, the exact number of payload bytes
//! that must follow it. Matrices inside the payload are row-major.

use std::fmt;
use std::path::Path;

use half::f16;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};

pub const MAGIC: &[u8; 4] = b"ACTS";
pub const FORMAT_VERSION: u32 = 1;
const PREAMBLE_LEN: usize = 4 + 4 + 8;

/// Element type of a stored payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Dtype {
    F16,
    F32,
    F64,
}

impl Dtype {
    pub fn tag(self) -> &'static str {
        match self {
            Dtype::F16 => "f16",
            Dtype::F32 => "f32",
            Dtype::F64 => "f64",
        }
    }

    pub fn size(self) -> usize {
        match self {
            Dtype::F16 => 2,
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    pub fn parse(tag: &str) -> Result<Self> {
        match tag {
            "f16" => Ok(Dtype::F16),
            "f32" => Ok(Dtype::F32),
            "f64" => Ok(Dtype::F64),
            other => Err(Error::UnknownDtype(other.to_string())),
        }
    }

    /// Appends `values` to `out` in this dtype. Narrowing rounds to nearest.
    pub fn encode_f32(self, values: &[f32], out: &mut Vec<u8>) {
        out.reserve(values.len() * self.size());
        match self {
            Dtype::F16 => values
                .iter()
                .for_each(|v| out.extend_from_slice(&f16::from_f32(*v).to_le_bytes())),
            Dtype::F32 => values
                .iter()
                .for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
            Dtype::F64 => values
                .iter()
                .for_each(|v| out.extend_from_slice(&f64::from(*v).to_le_bytes())),
        }
    }

    /// Decodes `bytes` into f32. Callers guarantee `bytes.len()` is a
    /// multiple of `self.size()`.
    pub fn decode_f32(self, bytes: &[u8]) -> Vec<f32> {
        match self {
            Dtype::F16 => bytes
                .chunks_exact(2)
                .map(|c| f16::from_le_bytes([c[0], c[1]]).to_f32())
                .collect(),
            Dtype::F32 => bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
            Dtype::F64 => bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()) as f32)
                .collect(),
        }
    }

    pub fn encode_f64(self, values: &[f64], out: &mut Vec<u8>) {
        match self {
            Dtype::F64 => values
                .iter()
                .for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
            narrow => {
                let tmp: Vec<f32> = values.iter().map(|v| *v as f32).collect();
                narrow.encode_f32(&tmp, out);
            }
        }
    }

    pub fn decode_f64(self, bytes: &[u8]) -> Vec<f64> {
        match self {
            Dtype::F64 => bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
            narrow => narrow.decode_f32(bytes).into_iter().map(f64::from).collect(),
        }
    }
}

impl fmt::Display for Dtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl TryFrom<String> for Dtype {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        Dtype::parse(&s)
    }
}

impl From<Dtype> for String {
    fn from(d: Dtype) -> String {
        d.tag().to_string()
    }
}

/// Location of one matrix inside the payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer_id: Option<i32>,
    pub byte_offset: u64,
    pub rows: u64,
    pub cols: u64,
}

impl TensorEntry {
    pub fn byte_len(&self, dtype: Dtype) -> u64 {
        self.rows * self.cols * dtype.size() as u64
    }

    /// Returns the payload slice this entry covers, checking bounds.
    pub fn slice<'a>(&self, payload: &'a [u8], dtype: Dtype) -> Result<&'a [u8]> {
        let start = self.byte_offset;
        let end = start
            .checked_add(self.byte_len(dtype))
            .ok_or_else(|| Error::LengthMismatch("tensor extent overflows".into()))?;
        if end > payload.len() as u64 {
            return Err(Error::LengthMismatch(format!(
                "tensor at bytes {start}..{end} exceeds payload of {} bytes",
                payload.len()
            )));
        }
        Ok(&payload[start as usize..end as usize])
    }
}

/// Serializes `header` and `payload` into container bytes. The header must
/// already carry a `payload_len` equal to `payload.len()`.
pub fn encode<H: Serialize>(header: &H, payload: &[u8]) -> Result<Vec<u8>> {
    let header_bytes = serde_json::to_vec(header)?;
    let mut out = Vec::with_capacity(PREAMBLE_LEN + header_bytes.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header_bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    out.extend_from_slice(payload);
    Ok(out)
}

/// Splits container bytes into the parsed header and the payload, verifying
/// magic, version and the declared payload length.
pub fn decode<'a, H: for<'de> Deserialize<'de>>(bytes: &'a [u8], origin: &Path) -> Result<(H, &'a [u8])> {
    if bytes.len() < MAGIC.len() || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic(origin.to_path_buf()));
    }
    if bytes.len() < PREAMBLE_LEN {
        return Err(Error::Truncated(format!(
            "{}: preamble needs {PREAMBLE_LEN} bytes, file holds {}",
            origin.display(),
            bytes.len()
        )));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let rest = &bytes[PREAMBLE_LEN..];
    if header_len > rest.len() as u64 {
        return Err(Error::Truncated(format!(
            "{}: header declares {header_len} bytes, {} remain",
            origin.display(),
            rest.len()
        )));
    }
    let (header_bytes, payload) = rest.split_at(header_len as usize);
    let value: serde_json::Value = serde_json::from_slice(header_bytes)
        .map_err(|e| Error::Header(format!("{}: {e}", origin.display())))?;
    // Checked on the raw value so a bad dtype tag reports as such rather
    // than as a generic header error.
    if let Some(tag) = value.get("dtype").and_then(|v| v.as_str()) {
        Dtype::parse(tag)?;
    }
    let declared = value
        .get("payload_len")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Header("missing payload_len".into()))?;
    let actual = payload.len() as u64;
    if declared > actual {
        return Err(Error::Truncated(format!(
            "{}: declared payload {declared} bytes, file holds {actual}",
            origin.display()
        )));
    }
    if declared < actual {
        return Err(Error::LengthMismatch(format!(
            "{}: declared payload {declared} bytes, file holds {actual}",
            origin.display()
        )));
    }
    let header: H =
        serde_json::from_value(value).map_err(|e| Error::Header(format!("{}: {e}", origin.display())))?;
    Ok((header, payload))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(io_err(path))
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dtype_tags_roundtrip() {
        for d in [Dtype::F16, Dtype::F32, Dtype::F64] {
            assert_eq!(Dtype::parse(d.tag()).unwrap(), d);
        }
        assert!(matches!(Dtype::parse("bf16"), Err(Error::UnknownDtype(_))));
    }

    #[test]
    fn f16_payload_is_two_bytes_per_element() {
        let mut out = Vec::new();
        Dtype::F16.encode_f32(&[1.0, -2.5, 0.333], &mut out);
        assert_eq!(out.len(), 6);
        // 1.0 in binary16 is 0x3C00.
        assert_eq!(&out[..2], &[0x00, 0x3C]);
    }
}
