//! `EMOVAE1` tensor container.
//!
//! Layout: the 8 magic bytes `EMOVAE1\n`, a little-endian `u64` header
//! length, a UTF-8 JSON header, then every tensor's `f64` values in
//! little-endian row-major order. The header is
//! `{"meta": {...}, "tensors": [{"name", "shape": [rows, cols], "offset"}]}`
//! with `offset` counted in bytes from the start of the data section.

use std::path::Path;

use emovae_core::numeric::Matrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"EMOVAE1\n";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: [usize; 2],
    offset: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    meta: Value,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub meta: Value,
    tensors: Vec<(String, Matrix)>,
}

impl Container {
    pub fn new(meta: Value) -> Self {
        Container {
            meta,
            tensors: Vec::new(),
        }
    }

    /// Appends a tensor; names must be unique.
    pub fn push(&mut self, name: impl Into<String>, tensor: Matrix) -> Result<()> {
        let name = name.into();
        if self.get(&name).is_some() {
            return Err(Error::Config(format!("duplicate tensor name '{name}'")));
        }
        self.tensors.push((name, tensor));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn tensors(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.tensors.iter().map(|(n, m)| (n.as_str(), m))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut offset = 0u64;
        let entries = self
            .tensors
            .iter()
            .map(|(name, m)| {
                let e = TensorEntry {
                    name: name.clone(),
                    shape: [m.rows(), m.cols()],
                    offset,
                };
                offset += 8 * m.as_slice().len() as u64;
                e
            })
            .collect();
        let header = serde_json::to_vec(&Header {
            meta: self.meta.clone(),
            tensors: entries,
        })
        .expect("header serializes");
        let mut out = Vec::with_capacity(16 + header.len() + offset as usize);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for (_, m) in &self.tensors {
            for v in m.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |detail: String| Error::Container {
            path: path.to_path_buf(),
            detail,
        };
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("missing EMOVAE1 magic".into()));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
        let data_start = 16usize
            .checked_add(usize::try_from(header_len).map_err(|_| bad("header too large".into()))?)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| bad(format!("header length {header_len} exceeds file size")))?;
        let header: Header =
            serde_json::from_slice(&bytes[16..data_start]).map_err(|e| bad(format!("header: {e}")))?;
        let data = &bytes[data_start..];
        let mut out = Container::new(header.meta);
        let mut expected_offset = 0u64;
        for t in header.tensors {
            let n = t.shape[0]
                .checked_mul(t.shape[1])
                .ok_or_else(|| bad(format!("tensor '{}' shape overflows", t.name)))?;
            if t.offset != expected_offset {
                return Err(bad(format!(
                    "tensor '{}' at offset {} (expected {expected_offset})",
                    t.name, t.offset
                )));
            }
            let start = t.offset as usize;
            let end = start + 8 * n;
            if end > data.len() {
                return Err(bad(format!("tensor '{}' runs past the end of the data", t.name)));
            }
            let values = data[start..end]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            let m = Matrix::from_vec(t.shape[0], t.shape[1], values)
                .map_err(|e| bad(format!("tensor '{}': {e}", t.name)))?;
            expected_offset = end as u64;
            out.push(t.name, m).map_err(|e| bad(e.to_string()))?;
        }
        if expected_offset as usize != data.len() {
            return Err(bad(format!(
                "{} trailing bytes after the last tensor",
                data.len() - expected_offset as usize
            )));
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}
