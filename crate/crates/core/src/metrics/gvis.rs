//! Importance of visual guidance: truncate each model caption to its
//! first m words, let a bare language model finish the sentence, and
//! compare consensus scores with and without the continuation.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;

use super::cider;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GvisPoint {
    pub m: usize,
    pub cider_m: f64,
    pub g_vis: f64,
    pub g_lang: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GvisCurve {
    pub cider_model: f64,
    pub points: Vec<GvisPoint>,
}

/// For each m: every caption keeps its first m whitespace words and the
/// continuation closure completes the sentence; captions with at most m
/// words pass through untouched, so at full length the curve hits zero
/// exactly. The closure receives the prefix words and returns the whole
/// continued sentence.
pub fn visual_guidance_curve(
    model_captions: &[String],
    reference_sets: &[Vec<String>],
    m_values: &[usize],
    mut continue_prefix: impl FnMut(&[&str]) -> Result<String, CoreError>,
) -> Result<GvisCurve, CoreError> {
    let cider_model = cider(model_captions, reference_sets)?;
    if cider_model == 0.0 {
        return Err(CoreError::UndefinedRatio(
            "model captions score zero, the guidance ratio is undefined".into(),
        ));
    }

    let mut points = Vec::with_capacity(m_values.len());
    for &m in m_values {
        let mut continued = Vec::with_capacity(model_captions.len());
        for caption in model_captions {
            let caption_words: Vec<&str> = caption.split_whitespace().collect();
            if caption_words.len() <= m {
                continued.push(caption.clone());
            } else {
                continued.push(continue_prefix(&caption_words[..m])?);
            }
        }
        let cider_m = if &continued == model_captions {
            cider_model
        } else {
            cider(&continued, reference_sets)?
        };
        let ratio = cider_m / cider_model;
        points.push(GvisPoint {
            m,
            cider_m,
            g_vis: 1.0 - ratio,
            g_lang: ratio,
        });
    }
    Ok(GvisCurve {
        cider_model,
        points,
    })
}
