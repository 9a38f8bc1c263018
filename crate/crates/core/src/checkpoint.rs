//! Self-describing binary container for model parameters.
//!
//! Layout:
//!
//! ```text
//! magic        8 bytes   "GTGCKPT1"
//! header_len   u32 LE
//! header       JSON      { format_version, kind, precision, arch, tensors, metadata }
//! payload      tensors in header order, row-major, little-endian f32/f64
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::nn::{ParamStore, Precision, Scalar, Tensor};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"GTGCKPT1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub kind: String,
    pub precision: Precision,
    pub arch: Value,
    pub tensors: Vec<TensorInfo>,
    #[serde(default)]
    pub metadata: Value,
}

pub fn encode<F: Scalar>(
    kind: &str,
    arch: Value,
    metadata: Value,
    params: &ParamStore<F>,
) -> Result<Vec<u8>> {
    let header = CheckpointHeader {
        format_version: FORMAT_VERSION,
        kind: kind.to_string(),
        precision: F::PRECISION,
        arch,
        tensors: params
            .tensors()
            .iter()
            .map(|t| TensorInfo {
                name: t.name.clone(),
                shape: t.shape.clone(),
            })
            .collect(),
        metadata,
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(12 + header_bytes.len() + params.num_params() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    for t in params.tensors() {
        for &v in &t.data {
            v.write_le(&mut out);
        }
    }
    Ok(out)
}

fn split_header(bytes: &[u8]) -> Result<(CheckpointHeader, &[u8])> {
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() < len {
        return Err(Error::Checkpoint("truncated header".into()));
    }
    let header: CheckpointHeader = serde_json::from_slice(&body[..len])?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {}",
            header.format_version
        )));
    }
    Ok((header, &body[len..]))
}

/// Read only the header; used to dispatch on precision before decoding.
pub fn peek_header(bytes: &[u8]) -> Result<CheckpointHeader> {
    split_header(bytes).map(|(h, _)| h)
}

pub fn decode<F: Scalar>(bytes: &[u8]) -> Result<(CheckpointHeader, ParamStore<F>)> {
    let (header, payload) = split_header(bytes)?;
    if header.precision != F::PRECISION {
        return Err(Error::Checkpoint(format!(
            "checkpoint precision {:?} does not match requested {:?}",
            header.precision,
            F::PRECISION
        )));
    }
    let width = F::PRECISION.byte_width();
    let total: usize = header
        .tensors
        .iter()
        .map(|t| t.shape.iter().product::<usize>())
        .sum();
    if payload.len() != total * width {
        return Err(Error::Checkpoint(format!(
            "payload has {} bytes, header describes {}",
            payload.len(),
            total * width
        )));
    }
    let mut offset = 0;
    let tensors = header
        .tensors
        .iter()
        .map(|info| {
            let n: usize = info.shape.iter().product();
            let data = payload[offset..offset + n * width]
                .chunks_exact(width)
                .map(F::read_le)
                .collect();
            offset += n * width;
            Tensor {
                name: info.name.clone(),
                shape: info.shape.clone(),
                data,
            }
        })
        .collect();
    Ok((header, ParamStore::from_tensors(tensors)))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}
