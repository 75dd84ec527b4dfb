//! Frozen backbone weights: generated on first use, exported to the
//! cache directory as a checksummed archive, and verified on reload.

use std::path::{Path, PathBuf};

use entcap_core::encoder::HashProjectionEncoder;
use serde_json::json;

use crate::archive::{read_archive, tensor_checksum, write_archive};
use crate::error::{CliError, Result};

pub const CACHE_DIR_ENV: &str = "ENTCAP_CACHE_DIR";

/// Cache directory: $ENTCAP_CACHE_DIR, or `.entcap-cache` under the
/// working directory.
pub fn cache_dir() -> PathBuf {
    match std::env::var_os(CACHE_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => PathBuf::from(".entcap-cache"),
    }
}

fn backbone_path(dir: &Path, id: &str) -> PathBuf {
    let safe: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    dir.join(format!("backbone-{safe}.etar"))
}

/// Load the named backbone from the cache, exporting it first when the
/// archive does not exist yet. A cached archive whose checksum or id
/// does not match is rejected rather than silently regenerated.
pub fn load_backbone(id: &str, dir: &Path) -> Result<HashProjectionEncoder> {
    let path = backbone_path(dir, id);
    if path.exists() {
        let archive = read_archive(&path)?;
        let stored_id = archive.manifest.get("id").and_then(|v| v.as_str());
        if stored_id != Some(id) {
            return Err(CliError::runtime(format!(
                "{}: archive holds backbone {:?}, expected {id:?}",
                path.display(),
                stored_id.unwrap_or("<missing>")
            )));
        }
        let expected = archive
            .manifest
            .get("checksum")
            .and_then(|v| v.as_str())
            .ok_or_else(|| {
                CliError::runtime(format!("{}: manifest has no checksum", path.display()))
            })?;
        let actual =
            tensor_checksum(archive.tensors.iter().map(|(n, m)| (n.as_str(), m)));
        if actual != expected {
            return Err(CliError::runtime(format!(
                "{}: checksum mismatch, the cached backbone is corrupted (delete it to regenerate)",
                path.display()
            )));
        }
        let (name, projection) = archive
            .tensors
            .into_iter()
            .find(|(n, _)| n == "projection")
            .ok_or_else(|| {
                CliError::runtime(format!("{}: no projection tensor", path.display()))
            })?;
        debug_assert_eq!(name, "projection");
        return Ok(HashProjectionEncoder::from_weights(id, projection)?);
    }

    let encoder = HashProjectionEncoder::generate(id);
    let checksum = tensor_checksum([("projection", encoder.projection())].into_iter());
    let manifest = json!({
        "kind": "backbone",
        "id": id,
        "checksum": checksum,
    });
    write_archive(&path, &manifest, &[("projection", encoder.projection())])?;
    Ok(encoder)
}
