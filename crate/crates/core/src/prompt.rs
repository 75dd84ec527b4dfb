//! Entity-aware hard prompts: masking, template rendering, and the text
//! queries used to embed vocabulary entries for retrieval.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::rng::Stream;
use crate::vocab::Entity;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    Default,
    Variant1,
    Variant2,
    Variant3,
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardPromptTemplate {
    pub prefix: String,
    pub separator: String,
    pub suffix: String,
    pub template_id: TemplateId,
}

impl HardPromptTemplate {
    pub fn preset(id: TemplateId) -> Self {
        let (prefix, suffix) = match id {
            TemplateId::Default => ("There are ", " in the image."),
            TemplateId::Variant1 => ("There are ", " in the scene. The image shows"),
            TemplateId::Variant2 => ("A photo of ", ", a caption to describe this image is"),
            TemplateId::Variant3 => (
                "To describe this image, let us think step by step. In this image, we can see ",
                ", so a sentence to describe this picture is",
            ),
            TemplateId::Custom => panic!("custom templates carry their own strings"),
        };
        HardPromptTemplate {
            prefix: prefix.to_string(),
            separator: ", ".to_string(),
            suffix: suffix.to_string(),
            template_id: id,
        }
    }

    pub fn custom(prefix: &str, separator: &str, suffix: &str) -> Self {
        HardPromptTemplate {
            prefix: prefix.to_string(),
            separator: separator.to_string(),
            suffix: suffix.to_string(),
            template_id: TemplateId::Custom,
        }
    }

    /// Every fixed word any preset can emit; callers fold these into the
    /// decoder vocabulary so rendered prompts never hit unknown tokens.
    pub fn preset_texts() -> Vec<String> {
        [
            TemplateId::Default,
            TemplateId::Variant1,
            TemplateId::Variant2,
            TemplateId::Variant3,
        ]
        .into_iter()
        .map(|id| {
            let t = Self::preset(id);
            format!("{}{}{}", t.prefix, t.separator, t.suffix)
        })
        .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HardPrompt {
    pub text: String,
    pub entities_used: Vec<Entity>,
}

/// Independently drop each entity with probability `r_mask`, preserving
/// the order of survivors.
pub fn mask_entities(
    entities: &[Entity],
    r_mask: f64,
    rng: &mut Stream,
) -> Result<Vec<Entity>, CoreError> {
    if !(0.0..=1.0).contains(&r_mask) {
        return Err(CoreError::Domain(format!(
            "masking ratio {r_mask} outside [0, 1]"
        )));
    }
    Ok(entities
        .iter()
        .filter(|_| !rng.bernoulli(r_mask))
        .cloned()
        .collect())
}

/// Render entities into the template. An empty entity list produces an
/// empty prompt, leaving the soft prompt alone to carry the signal.
pub fn render_hard_prompt(entities: &[Entity], template: &HardPromptTemplate) -> HardPrompt {
    if entities.is_empty() {
        return HardPrompt {
            text: String::new(),
            entities_used: Vec::new(),
        };
    }
    let mut text = template.prefix.clone();
    for (i, e) in entities.iter().enumerate() {
        if i > 0 {
            text.push_str(&template.separator);
        }
        text.push_str(&e.name);
    }
    text.push_str(&template.suffix);
    HardPrompt {
        text,
        entities_used: entities.to_vec(),
    }
}

/// Templates averaged per class name when prompt ensembling is on.
const ENSEMBLE_QUERIES: &[(&str, &str)] = &[
    ("A photo of ", ""),
    ("A photo of the ", ""),
    ("There is ", " in the photo"),
];

/// The description strings embedded for one vocabulary entry: a single
/// query normally, or the full ensemble when enabled.
pub fn entity_queries(name: &str, ensemble: bool) -> Result<Vec<String>, CoreError> {
    if name.trim().is_empty() {
        return Err(CoreError::Domain("entity name is empty".to_string()));
    }
    if ensemble {
        Ok(ENSEMBLE_QUERIES
            .iter()
            .map(|(pre, post)| format!("{pre}{name}{post}"))
            .collect())
    } else {
        Ok(vec![format!("A photo of {name}")])
    }
}
