//! Configuration layering for every command: a named preset supplies
//! the base values, an optional JSON config file overrides the preset,
//! and command-line flags override both.

use std::path::Path;

use entcap_core::config::{
    CustomTemplate, LrSchedule, MaskResample, PromptOrder, TrainingConfig,
};
use entcap_core::encoder::DEFAULT_ENCODER_ID;
use entcap_core::prompt::TemplateId;
use entcap_core::retrieval::RetrievalConfig;
use serde::{Deserialize, Serialize};

use crate::error::{io_error, CliError, Result};

pub const TRAIN_PRESETS: [&str; 4] = ["coco", "flickr30k", "flickrstyle10k", "fixture"];
pub const RETRIEVAL_PRESETS: [&str; 4] = ["cross_domain", "coco", "flickr30k", "flickrstyle10k"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelScale {
    Fixture,
    Full,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("config file {}: {e}", path.display())))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFileConfig {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub weight_decay: Option<f64>,
    pub r_mask: Option<f64>,
    pub noise_variance: Option<f64>,
    pub template_id: Option<TemplateId>,
    pub custom_template: Option<CustomTemplate>,
    pub prompt_order: Option<PromptOrder>,
    pub seed: Option<u64>,
    pub lm_finetune: Option<bool>,
    pub mask_resample: Option<MaskResample>,
    pub lr_schedule: Option<LrSchedule>,
    pub model_scale: Option<ModelScale>,
    pub soft_len: Option<usize>,
    pub single_word_vocab: Option<bool>,
    pub backbone: Option<String>,
}

/// Command-line overrides for training, the highest layer.
#[derive(Debug, Default)]
pub struct TrainOverrides {
    pub seed: Option<u64>,
    pub mask_rate: Option<f64>,
    pub template: Option<TemplateId>,
    pub soft_len: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedTrain {
    pub preset: String,
    pub training: TrainingConfig,
    pub model_scale: ModelScale,
    pub soft_len: Option<usize>,
    pub single_word_vocab: bool,
    pub backbone: String,
}

pub fn resolve_train(
    preset: &str,
    config_path: Option<&Path>,
    overrides: &TrainOverrides,
) -> Result<ResolvedTrain> {
    let mut training = TrainingConfig::preset(preset).ok_or_else(|| {
        CliError::config(format!(
            "preset: unknown training preset {preset:?} (known: {})",
            TRAIN_PRESETS.join(", ")
        ))
    })?;
    let file: TrainFileConfig = match config_path {
        Some(path) => read_json(path)?,
        None => TrainFileConfig::default(),
    };

    macro_rules! layer {
        ($($field:ident),*) => {
            $(if let Some(v) = file.$field.clone() { training.$field = v; })*
        };
    }
    layer!(
        epochs,
        batch_size,
        learning_rate,
        weight_decay,
        r_mask,
        noise_variance,
        template_id,
        prompt_order,
        seed,
        lm_finetune,
        mask_resample,
        lr_schedule
    );
    if file.custom_template.is_some() {
        training.custom_template = file.custom_template.clone();
    }

    if let Some(seed) = overrides.seed {
        training.seed = seed;
    }
    if let Some(r) = overrides.mask_rate {
        training.r_mask = r;
    }
    if let Some(t) = overrides.template {
        training.template_id = t;
    }

    let soft_len = overrides.soft_len.or(file.soft_len);
    if soft_len == Some(0) {
        return Err(CliError::config("soft_len: must be at least 1".to_string()));
    }
    training.validate()?;
    Ok(ResolvedTrain {
        preset: preset.to_string(),
        training,
        model_scale: file.model_scale.unwrap_or(ModelScale::Fixture),
        soft_len,
        single_word_vocab: file.single_word_vocab.unwrap_or(true),
        backbone: file.backbone.unwrap_or_else(|| DEFAULT_ENCODER_ID.to_string()),
    })
}

pub fn parse_template_flag(name: &str) -> Result<TemplateId> {
    match name {
        "default" => Ok(TemplateId::Default),
        "variant1" => Ok(TemplateId::Variant1),
        "variant2" => Ok(TemplateId::Variant2),
        "variant3" => Ok(TemplateId::Variant3),
        "custom" => Ok(TemplateId::Custom),
        other => Err(CliError::config(format!(
            "template: unknown template {other:?} (known: default, variant1, variant2, variant3, custom)"
        ))),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptionFileConfig {
    pub tau: Option<f64>,
    pub k: Option<usize>,
    pub p_thres: Option<f64>,
    pub ensemble: Option<bool>,
    pub beam: Option<usize>,
    pub max_tokens: Option<usize>,
    pub single_word_vocab: Option<bool>,
    pub backbone: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedCaption {
    pub preset: String,
    pub retrieval: RetrievalConfig,
    pub beam: usize,
    pub max_tokens: usize,
    pub single_word_vocab: bool,
    pub backbone: Option<String>,
    pub seed: u64,
}

pub fn resolve_caption(
    preset: &str,
    config_path: Option<&Path>,
    beam_flag: Option<usize>,
    seed: u64,
) -> Result<ResolvedCaption> {
    let mut retrieval = RetrievalConfig::preset(preset).ok_or_else(|| {
        CliError::config(format!(
            "preset: unknown retrieval preset {preset:?} (known: {})",
            RETRIEVAL_PRESETS.join(", ")
        ))
    })?;
    let file: CaptionFileConfig = match config_path {
        Some(path) => read_json(path)?,
        None => CaptionFileConfig::default(),
    };
    if let Some(v) = file.tau {
        retrieval.tau = v;
    }
    if let Some(v) = file.k {
        retrieval.k = v;
    }
    if let Some(v) = file.p_thres {
        retrieval.p_thres = v;
    }
    if let Some(v) = file.ensemble {
        retrieval.ensemble = v;
    }
    let beam = beam_flag.or(file.beam).unwrap_or(5);
    if beam == 0 {
        return Err(CliError::config("beam: must be at least 1".to_string()));
    }
    let max_tokens = file.max_tokens.unwrap_or(64);
    if max_tokens == 0 {
        return Err(CliError::config("max_tokens: must be at least 1".to_string()));
    }
    retrieval.validate()?;
    Ok(ResolvedCaption {
        preset: preset.to_string(),
        retrieval,
        beam,
        max_tokens,
        single_word_vocab: file.single_word_vocab.unwrap_or(true),
        backbone: file.backbone,
        seed,
    })
}
