//! Training configuration and the published per-dataset presets.

use alloc::format;
use alloc::string::String;
use alloc::string::ToString;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::prompt::{HardPromptTemplate, TemplateId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptOrder {
    SoftThenHard,
    HardThenSoft,
}

/// Whether entity masking is redrawn on every visit to a caption or
/// fixed once per caption for a whole run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskResample {
    PerStep,
    PerCaption,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CustomTemplate {
    pub prefix: String,
    pub separator: String,
    pub suffix: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub r_mask: f64,
    pub noise_variance: f64,
    pub template_id: TemplateId,
    pub custom_template: Option<CustomTemplate>,
    pub prompt_order: PromptOrder,
    pub seed: u64,
    pub lm_finetune: bool,
    pub mask_resample: MaskResample,
    pub lr_schedule: LrSchedule,
}

impl TrainingConfig {
    fn base() -> Self {
        TrainingConfig {
            epochs: 1,
            batch_size: 1,
            learning_rate: 2e-5,
            weight_decay: 0.0,
            r_mask: 0.4,
            noise_variance: 0.016,
            template_id: TemplateId::Default,
            custom_template: None,
            prompt_order: PromptOrder::SoftThenHard,
            seed: 0,
            lm_finetune: true,
            mask_resample: MaskResample::PerStep,
            lr_schedule: LrSchedule::Constant,
        }
    }

    /// Published per-dataset hyperparameters, plus a `fixture` preset
    /// sized for the bundled 50-caption corpus.
    pub fn preset(name: &str) -> Option<Self> {
        let mut cfg = Self::base();
        match name {
            "coco" => {
                cfg.epochs = 15;
                cfg.batch_size = 80;
                cfg.learning_rate = 2e-5;
                cfg.r_mask = 0.4;
            }
            "flickr30k" => {
                cfg.epochs = 30;
                cfg.batch_size = 80;
                cfg.learning_rate = 2e-5;
                cfg.r_mask = 0.4;
            }
            "flickrstyle10k" => {
                cfg.epochs = 25;
                cfg.batch_size = 128;
                cfg.learning_rate = 3e-4;
                cfg.r_mask = 0.4;
            }
            "fixture" => {
                cfg.epochs = 200;
                cfg.batch_size = 10;
                cfg.learning_rate = 1e-3;
                cfg.r_mask = 0.4;
                cfg.noise_variance = 1e-4;
            }
            _ => return None,
        }
        Some(cfg)
    }

    /// The rendered-template settings as one object.
    pub fn template(&self) -> Result<HardPromptTemplate, CoreError> {
        match (self.template_id, &self.custom_template) {
            (TemplateId::Custom, Some(t)) => Ok(HardPromptTemplate::custom(
                &t.prefix,
                &t.separator,
                &t.suffix,
            )),
            (TemplateId::Custom, None) => Err(CoreError::Config(
                "template_id is custom but no custom_template given".to_string(),
            )),
            (id, _) => Ok(HardPromptTemplate::preset(id)),
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let positive = [
            ("epochs", self.epochs as f64),
            ("batch_size", self.batch_size as f64),
            ("learning_rate", self.learning_rate),
        ];
        for (field, value) in positive {
            if value <= 0.0 {
                return Err(CoreError::Config(format!("{field} must be positive")));
            }
        }
        if self.weight_decay < 0.0 {
            return Err(CoreError::Config("weight_decay must not be negative".to_string()));
        }
        if !(0.0..=1.0).contains(&self.r_mask) {
            return Err(CoreError::Config(format!(
                "r_mask must lie in [0, 1], got {}",
                self.r_mask
            )));
        }
        if self.noise_variance < 0.0 {
            return Err(CoreError::Config(
                "noise_variance must not be negative".to_string(),
            ));
        }
        self.template().map(|_| ())
    }
}
