//! Checkpoint archives: every model tensor plus a manifest carrying the
//! model shape, the training configuration snapshot, the tokenizer word
//! list, and the provenance identifiers.

use std::collections::BTreeMap;
use std::path::Path;

use entcap_core::config::TrainingConfig;
use entcap_core::model::{CaptionerModel, ModelConfig};
use serde_json::json;

use crate::archive::{read_archive, tensor_checksum, write_archive};
use crate::error::{CliError, Result};

pub struct LoadedCheckpoint {
    pub model: CaptionerModel,
    pub training: TrainingConfig,
    pub vocab_checksum: String,
    pub backbone_id: String,
}

impl std::fmt::Debug for LoadedCheckpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LoadedCheckpoint")
            .field("training", &self.training)
            .field("vocab_checksum", &self.vocab_checksum)
            .field("backbone_id", &self.backbone_id)
            .finish_non_exhaustive()
    }
}

pub fn save_checkpoint(
    path: &Path,
    model: &CaptionerModel,
    training: &TrainingConfig,
    vocab_checksum: &str,
    backbone_id: &str,
) -> Result<()> {
    let ids: Vec<_> = model.params.ids().collect();
    let tensors: Vec<(&str, &entcap_core::Matrix)> = ids
        .iter()
        .map(|&id| (model.params.name(id), model.params.value(id)))
        .collect();
    let manifest = json!({
        "kind": "checkpoint",
        "model": &model.cfg,
        "training": training,
        "words": model.tokenizer.words(),
        "vocab_checksum": vocab_checksum,
        "backbone_id": backbone_id,
        "lm_finetuned": training.lm_finetune,
        "param_checksum": tensor_checksum(tensors.iter().copied()),
    });
    write_archive(path, &manifest, &tensors)
}

pub fn load_checkpoint(path: &Path) -> Result<LoadedCheckpoint> {
    let archive = read_archive(path)?;
    let manifest = &archive.manifest;
    let kind = manifest.get("kind").and_then(|v| v.as_str());
    if kind != Some("checkpoint") {
        return Err(CliError::runtime(format!(
            "{}: not a checkpoint archive (kind {:?})",
            path.display(),
            kind.unwrap_or("<missing>")
        )));
    }
    let field = |name: &str| {
        manifest.get(name).cloned().ok_or_else(|| {
            CliError::runtime(format!("{}: manifest is missing {name}", path.display()))
        })
    };
    let bad = |name: &str, e: serde_json::Error| {
        CliError::runtime(format!("{}: bad {name} in manifest: {e}", path.display()))
    };
    let model_cfg: ModelConfig =
        serde_json::from_value(field("model")?).map_err(|e| bad("model", e))?;
    let training: TrainingConfig =
        serde_json::from_value(field("training")?).map_err(|e| bad("training", e))?;
    let words: Vec<String> =
        serde_json::from_value(field("words")?).map_err(|e| bad("words", e))?;
    let vocab_checksum = field("vocab_checksum")?
        .as_str()
        .map(String::from)
        .ok_or_else(|| CliError::runtime(format!("{}: vocab_checksum is not a string", path.display())))?;
    let backbone_id = field("backbone_id")?
        .as_str()
        .map(String::from)
        .ok_or_else(|| CliError::runtime(format!("{}: backbone_id is not a string", path.display())))?;
    let expected_checksum = field("param_checksum")?
        .as_str()
        .map(String::from)
        .ok_or_else(|| CliError::runtime(format!("{}: param_checksum is not a string", path.display())))?;

    let actual = tensor_checksum(archive.tensors.iter().map(|(n, m)| (n.as_str(), m)));
    if actual != expected_checksum {
        return Err(CliError::runtime(format!(
            "{}: parameter checksum mismatch, the checkpoint is corrupted",
            path.display()
        )));
    }

    let mut by_name: BTreeMap<String, entcap_core::Matrix> =
        archive.tensors.into_iter().collect();
    let model = CaptionerModel::from_parts(model_cfg, &words, |name| by_name.remove(name))?;
    Ok(LoadedCheckpoint {
        model,
        training,
        vocab_checksum,
        backbone_id,
    })
}
