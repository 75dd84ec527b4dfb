//! Disk cache for class-name embeddings: one tensor file per
//! (vocabulary, ensemble, backbone) combination with a sidecar manifest
//! naming exactly that combination.

use std::fs;
use std::path::{Path, PathBuf};

use entcap_core::encoder::DualEncoder;
use entcap_core::retrieval::VocabEmbeddings;
use entcap_core::vocab::EntityVocabulary;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::archive::{read_archive, write_archive};
use crate::error::{io_error, CliError, Result};

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct Sidecar {
    vocab_checksum: String,
    ensemble: bool,
    backbone_id: String,
    names: usize,
    dim: usize,
}

fn cache_paths(
    dir: &Path,
    vocab: &EntityVocabulary,
    backbone_id: &str,
    ensemble: bool,
) -> (PathBuf, PathBuf) {
    let mode = if ensemble { "ens" } else { "single" };
    let stem = format!(
        "vocab-{}-{}-{}",
        &vocab.checksum()[..16],
        backbone_id,
        mode
    );
    (
        dir.join(format!("{stem}.etar")),
        dir.join(format!("{stem}.manifest.json")),
    )
}

/// Class-name embeddings for retrieval, straight from the cache when a
/// matching file exists, computed and cached otherwise.
pub fn vocab_embeddings(
    vocab: &EntityVocabulary,
    encoder: &dyn DualEncoder,
    ensemble: bool,
    dir: &Path,
) -> Result<VocabEmbeddings> {
    let (tensor_path, sidecar_path) = cache_paths(dir, vocab, encoder.id(), ensemble);
    if tensor_path.exists() && sidecar_path.exists() {
        let sidecar_text =
            fs::read_to_string(&sidecar_path).map_err(|e| io_error(&sidecar_path, e))?;
        let sidecar: Sidecar = serde_json::from_str(&sidecar_text).map_err(|e| {
            CliError::runtime(format!("{}: bad sidecar manifest: {e}", sidecar_path.display()))
        })?;
        let expected = Sidecar {
            vocab_checksum: vocab.checksum(),
            ensemble,
            backbone_id: encoder.id().to_string(),
            names: vocab.len(),
            dim: encoder.dim(),
        };
        if sidecar != expected {
            return Err(CliError::runtime(format!(
                "{}: sidecar does not match the requested vocabulary/backbone (delete the cache entry to recompute)",
                sidecar_path.display()
            )));
        }
        let archive = read_archive(&tensor_path)?;
        let (_, matrix) = archive
            .tensors
            .into_iter()
            .find(|(n, _)| n == "embeddings")
            .ok_or_else(|| {
                CliError::runtime(format!("{}: no embeddings tensor", tensor_path.display()))
            })?;
        return Ok(VocabEmbeddings::from_rows(vocab.names().to_vec(), matrix)?);
    }

    let embeddings = VocabEmbeddings::compute(vocab, encoder, ensemble)?;
    write_archive(&tensor_path, &json!({}), &[("embeddings", embeddings.matrix())])?;
    let sidecar = Sidecar {
        vocab_checksum: vocab.checksum(),
        ensemble,
        backbone_id: encoder.id().to_string(),
        names: vocab.len(),
        dim: encoder.dim(),
    };
    let text = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| CliError::runtime(format!("sidecar serialization failed: {e}")))?;
    fs::write(&sidecar_path, text + "\n").map_err(|e| io_error(&sidecar_path, e))?;
    Ok(embeddings)
}
