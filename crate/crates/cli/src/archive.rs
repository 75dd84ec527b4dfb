//! Single-file tensor archive: a JSON manifest followed by named f64
//! matrices. Used for checkpoints, backbone weights, and embedding
//! caches.
//!
//! Layout, all integers little-endian:
//!   magic "ETAR" | u32 format version | u32 manifest length | manifest
//!   JSON | u32 tensor count | per tensor: u16 name length, name bytes,
//!   u32 rows, u32 cols, rows*cols f64 values.

use std::fs;
use std::path::Path;

use entcap_core::rng::sha256_hex;
use entcap_core::Matrix;

use crate::error::{io_error, CliError, Result};

const MAGIC: &[u8; 4] = b"ETAR";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug)]
pub struct Archive {
    pub manifest: serde_json::Value,
    pub tensors: Vec<(String, Matrix)>,
}

pub fn write_archive(
    path: &Path,
    manifest: &serde_json::Value,
    tensors: &[(&str, &Matrix)],
) -> Result<()> {
    let manifest_bytes = serde_json::to_vec(manifest)
        .map_err(|e| CliError::runtime(format!("manifest serialization failed: {e}")))?;
    let mut out = Vec::with_capacity(64 + manifest_bytes.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(manifest_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(&manifest_bytes);
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, matrix) in tensors {
        let name_bytes = name.as_bytes();
        if name_bytes.len() > u16::MAX as usize {
            return Err(CliError::runtime(format!("tensor name too long: {name}")));
        }
        out.extend_from_slice(&(name_bytes.len() as u16).to_le_bytes());
        out.extend_from_slice(name_bytes);
        out.extend_from_slice(&(matrix.rows as u32).to_le_bytes());
        out.extend_from_slice(&(matrix.cols as u32).to_le_bytes());
        for v in &matrix.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
        }
    }
    fs::write(path, out).map_err(|e| io_error(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let slice = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(slice)
            }
            None => Err(CliError::runtime(format!(
                "{}: archive truncated at byte {}",
                self.path.display(),
                self.pos
            ))),
        }
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn read_archive(path: &Path) -> Result<Archive> {
    let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
        path,
    };
    if r.take(4)? != MAGIC {
        return Err(CliError::runtime(format!(
            "{}: not a tensor archive (bad magic)",
            path.display()
        )));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(CliError::runtime(format!(
            "{}: archive format version {version} is not supported (expected {FORMAT_VERSION})",
            path.display()
        )));
    }
    let manifest_len = r.u32()? as usize;
    let manifest: serde_json::Value = serde_json::from_slice(r.take(manifest_len)?)
        .map_err(|e| CliError::runtime(format!("{}: bad manifest: {e}", path.display())))?;
    let count = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = r.u16()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec()).map_err(|_| {
            CliError::runtime(format!("{}: tensor name is not UTF-8", path.display()))
        })?;
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let data_bytes = r.take(rows * cols * 8)?;
        let data: Vec<f64> = data_bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.push((name, Matrix::from_vec(rows, cols, data)));
    }
    if r.pos != bytes.len() {
        return Err(CliError::runtime(format!(
            "{}: {} trailing bytes after the last tensor",
            path.display(),
            bytes.len() - r.pos
        )));
    }
    Ok(Archive { manifest, tensors })
}

/// Digest over names, shapes, and values in order; stored in manifests
/// so corrupted or hand-edited archives are rejected on load.
pub fn tensor_checksum<'a>(tensors: impl Iterator<Item = (&'a str, &'a Matrix)>) -> String {
    let mut bytes = Vec::new();
    for (name, matrix) in tensors {
        bytes.extend_from_slice(name.as_bytes());
        bytes.push(0);
        bytes.extend_from_slice(&(matrix.rows as u64).to_le_bytes());
        bytes.extend_from_slice(&(matrix.cols as u64).to_le_bytes());
        for v in &matrix.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    sha256_hex(&bytes)
}
