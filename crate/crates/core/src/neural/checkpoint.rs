//! `MCTX1` checkpoint container.
//!
//! Layout:
//!
//! ```text
//! [8 bytes]  magic  b"MCTX1\0\0\0"
//! [4 bytes]  header length N, little-endian u32
//! [N bytes]  UTF-8 JSON: {"<name>": {"shape": [..], "dtype": "f32"|"f64", "offset": <bytes>}, ...}
//! [...]      little-endian payloads, in header (sorted-name) order
//! ```
//!
//! `offset` counts from the first payload byte.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tensor::{NamedTensor, Tensor};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"MCTX1\0\0\0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Entry {
    shape: Vec<usize>,
    dtype: Dtype,
    offset: usize,
}

pub fn encode(tensors: &[NamedTensor], dtype: Dtype) -> Result<Vec<u8>> {
    let mut sorted: Vec<&NamedTensor> = tensors.iter().collect();
    sorted.sort_by(|a, b| a.name.cmp(&b.name));
    if let Some(w) = sorted.windows(2).find(|w| w[0].name == w[1].name) {
        return Err(Error::Checkpoint(format!("duplicate tensor name `{}`", w[0].name)));
    }
    let mut header = BTreeMap::new();
    let mut payload = Vec::new();
    for nt in sorted {
        header.insert(
            nt.name.clone(),
            Entry {
                shape: nt.tensor.shape().to_vec(),
                dtype,
                offset: payload.len(),
            },
        );
        for &x in nt.tensor.data() {
            match dtype {
                Dtype::F64 => payload.extend_from_slice(&x.to_le_bytes()),
                Dtype::F32 => payload.extend_from_slice(&(x as f32).to_le_bytes()),
            }
        }
    }
    let header = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut out = Vec::with_capacity(12 + header.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<Vec<NamedTensor>> {
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(Error::Checkpoint("not an MCTX1 checkpoint (bad magic)".into()));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let header_end = 12 + hlen;
    if bytes.len() < header_end {
        return Err(Error::Checkpoint("truncated header".into()));
    }
    let header: BTreeMap<String, Entry> =
        serde_json::from_slice(&bytes[12..header_end]).map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    let payload = &bytes[header_end..];
    let mut out = Vec::with_capacity(header.len());
    for (name, entry) in header {
        let count: usize = entry.shape.iter().product();
        let size = entry.dtype.size();
        let end = entry.offset + count * size;
        if end > payload.len() {
            return Err(Error::Checkpoint(format!("tensor `{name}` runs past end of file")));
        }
        let raw = &payload[entry.offset..end];
        let data: Vec<f64> = match entry.dtype {
            Dtype::F64 => raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect(),
            Dtype::F32 => raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                .collect(),
        };
        out.push(NamedTensor {
            tensor: Tensor::from_vec(&entry.shape, data)?,
            name,
        });
    }
    Ok(out)
}

pub fn save(path: &Path, tensors: &[NamedTensor], dtype: Dtype) -> Result<()> {
    let bytes = encode(tensors, dtype)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Vec<NamedTensor>> {
    if !path.exists() {
        return Err(Error::MissingFile {
            path: path.to_path_buf(),
            hint: "checkpoint not found; run the matching train command first".into(),
        });
    }
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
