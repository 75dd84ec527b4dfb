//! Corpus-level caption metrics and the visual-guidance probe.

mod bleu;
mod cider;
mod clip;
mod entity;
pub mod golden;
mod gvis;

pub use bleu::bleu;
pub use cider::cider;
pub use clip::clip_score;
pub use entity::{entity_precision, EntityPrecision};
pub use gvis::{visual_guidance_curve, GvisCurve, GvisPoint};

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Corpus scores for one slice of the data. Metrics that were not
/// computed (or are deliberately absent) stay `None` and serialize as
/// null.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricScores {
    pub bleu1: f64,
    pub bleu2: f64,
    pub bleu3: f64,
    pub bleu4: f64,
    pub cider: f64,
    pub clip_s: Option<f64>,
    pub entity_precision: Option<f64>,
    pub meteor: Option<f64>,
    pub spice: Option<f64>,
}

impl MetricScores {
    pub fn finite(&self) -> bool {
        let fixed = [self.bleu1, self.bleu2, self.bleu3, self.bleu4, self.cider];
        let optional = [self.clip_s, self.entity_precision, self.meteor, self.spice];
        fixed.iter().all(|v| v.is_finite())
            && optional.iter().all(|v| v.map_or(true, f64::is_finite))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub id: String,
    pub caption: String,
    pub references: Vec<String>,
    pub domain_tag: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntityCounts {
    pub correct: usize,
    pub extracted: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub overall: MetricScores,
    pub domains: BTreeMap<String, MetricScores>,
    pub samples: Vec<SampleOutcome>,
    pub entity_counts: Option<EntityCounts>,
    pub g_vis: Option<GvisCurve>,
}

impl EvaluationReport {
    pub fn validate(&self) -> Result<(), CoreError> {
        if !self.overall.finite() {
            return Err(CoreError::Domain(
                "overall scores contain a non-finite value".into(),
            ));
        }
        for (name, scores) in &self.domains {
            if !scores.finite() {
                return Err(CoreError::Domain(alloc::format!(
                    "scores for domain {name} contain a non-finite value"
                )));
            }
        }
        if let Some(curve) = &self.g_vis {
            for p in &curve.points {
                if !p.g_vis.is_finite() || !p.g_lang.is_finite() || !p.cider_m.is_finite() {
                    return Err(CoreError::Domain(
                        "guidance curve contains a non-finite value".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Whitespace words of a caption, the unit every corpus metric counts.
pub(crate) fn words(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// n-gram occurrence counts keyed by the joined gram. Tokens never
/// contain the separator byte, so joins are unambiguous.
pub(crate) fn ngram_counts(tokens: &[&str], n: usize) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    if tokens.len() < n {
        return counts;
    }
    for window in tokens.windows(n) {
        let key = window.join("\u{1}");
        *counts.entry(key).or_insert(0) += 1;
    }
    counts
}

pub(crate) fn check_paired(
    candidates: usize,
    references: usize,
) -> Result<(), CoreError> {
    if candidates != references {
        return Err(CoreError::InputMismatch(alloc::format!(
            "{candidates} candidates but {references} reference sets"
        )));
    }
    if candidates == 0 {
        return Err(CoreError::InputMismatch("empty corpus".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ngram_counting() {
        let toks = ["a", "b", "a", "b"];
        let uni = ngram_counts(&toks, 1);
        assert_eq!(uni["a"], 2);
        assert_eq!(uni["b"], 2);
        let bi = ngram_counts(&toks, 2);
        assert_eq!(bi["a\u{1}b"], 2);
        assert_eq!(bi["b\u{1}a"], 1);
        assert!(ngram_counts(&toks, 5).is_empty());
    }

    #[test]
    fn report_validation_flags_non_finite() {
        let scores = MetricScores {
            bleu1: 0.5,
            bleu2: 0.4,
            bleu3: 0.3,
            bleu4: 0.2,
            cider: f64::NAN,
            clip_s: None,
            entity_precision: None,
            meteor: None,
            spice: None,
        };
        let report = EvaluationReport {
            schema_version: REPORT_SCHEMA_VERSION,
            overall: scores,
            domains: BTreeMap::new(),
            samples: Vec::new(),
            entity_counts: None,
            g_vis: None,
        };
        assert!(report.validate().is_err());
    }
}
