//! Reference-free caption scoring against the image embedding.

use alloc::string::String;

use crate::encoder::{DualEncoder, Embedding};
use crate::error::CoreError;
use crate::tensor::cosine;

use super::check_paired;

const WEIGHT: f64 = 2.5;

/// Mean over pairs of `2.5 * max(cos(image, text), 0)`, embedding each
/// caption with the same frozen encoder that produced the images.
pub fn clip_score(
    encoder: &dyn DualEncoder,
    image_embeddings: &[Embedding],
    captions: &[String],
) -> Result<f64, CoreError> {
    check_paired(image_embeddings.len(), captions.len())?;
    let mut total = 0.0;
    for (image, caption) in image_embeddings.iter().zip(captions) {
        if image.dim() != encoder.dim() {
            return Err(CoreError::InputMismatch(alloc::format!(
                "image embedding has {} dimensions, encoder produces {}",
                image.dim(),
                encoder.dim()
            )));
        }
        let text = encoder.embed_text(caption)?.embedding;
        let sim = cosine(&image.values, &text.values);
        total += WEIGHT * crate::math::fmax(sim, 0.0);
    }
    Ok(total / image_embeddings.len() as f64)
}
