//! Tensor persistence: a JSON manifest (name, shape, byte offset) next to a
//! raw little-endian `f32` blob.
//!
//! In-memory parameters are `f64`; saving narrows each value to `f32`. Loading
//! widens exactly, so `encode(decode(blob))` reproduces the blob bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::{Error, Result};

pub const BLOB_FORMAT: &str = "f32-le";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset of the first element within the blob.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    /// Blob file name, resolved relative to the manifest's directory.
    pub blob: String,
    pub total_bytes: usize,
    pub tensors: Vec<TensorEntry>,
}

/// Serializes named tensors into a manifest and blob bytes.
pub fn encode_tensors(named: &[(String, &Tensor)], blob_name: &str) -> (Manifest, Vec<u8>) {
    let mut blob = Vec::new();
    let mut entries = Vec::with_capacity(named.len());
    for (name, t) in named {
        entries.push(TensorEntry {
            name: name.clone(),
            shape: t.shape().to_vec(),
            offset: blob.len(),
        });
        for &v in t.data() {
            blob.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let manifest = Manifest {
        format: BLOB_FORMAT.to_string(),
        blob: blob_name.to_string(),
        total_bytes: blob.len(),
        tensors: entries,
    };
    (manifest, blob)
}

pub fn decode_tensors(manifest: &Manifest, blob: &[u8]) -> Result<Vec<(String, Tensor)>> {
    if manifest.format != BLOB_FORMAT {
        return Err(Error::format(format!("unsupported blob format {:?}", manifest.format)));
    }
    if blob.len() != manifest.total_bytes {
        return Err(Error::format(format!(
            "blob has {} bytes, manifest says {}",
            blob.len(),
            manifest.total_bytes
        )));
    }
    manifest
        .tensors
        .iter()
        .map(|e| {
            let n: usize = e.shape.iter().product();
            let end = e.offset + 4 * n;
            let bytes = blob.get(e.offset..end).ok_or_else(|| {
                Error::format(format!("tensor {} extends past the blob", e.name))
            })?;
            let data = bytes
                .chunks_exact(4)
                .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
                .collect();
            Ok((e.name.clone(), Tensor::new(e.shape.clone(), data)?))
        })
        .collect()
}

/// Writes `<stem>.json` and `<stem>.bin` into `dir`.
pub fn save_tensors(named: &[(String, &Tensor)], dir: impl AsRef<Path>, stem: &str) -> Result<()> {
    let blob_name = format!("{stem}.bin");
    let (manifest, blob) = encode_tensors(named, &blob_name);
    fs::write(dir.as_ref().join(&blob_name), blob)?;
    fs::write(
        dir.as_ref().join(format!("{stem}.json")),
        serde_json::to_vec_pretty(&manifest)?,
    )?;
    Ok(())
}

pub fn load_tensors(manifest_path: impl AsRef<Path>) -> Result<Vec<(String, Tensor)>> {
    let manifest_path = manifest_path.as_ref();
    let manifest: Manifest = serde_json::from_slice(&fs::read(manifest_path)?)?;
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let blob = fs::read(dir.join(&manifest.blob))?;
    decode_tensors(&manifest, &blob)
}
