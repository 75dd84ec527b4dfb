//! Inspect entity retrieval for one image: selected entities plus the
//! leading candidates that did not clear the threshold.

use std::fs;

use serde_json::json;

use entcap_core::encoder::{DualEncoder, DEFAULT_ENCODER_ID};
use entcap_core::retrieval::{classify_entities, entity_probabilities};

use crate::backbone::{cache_dir, load_backbone};
use crate::configio::resolve_caption;
use crate::corpusio::load_vocabulary;
use crate::embcache::vocab_embeddings;
use crate::error::{io_error, CliError, Result};
use crate::imageio::{image_id, load_raster};

use super::{require_exists, RetrieveArgs};

const CANDIDATE_ROWS: usize = 10;

pub fn run(args: RetrieveArgs) -> Result<()> {
    require_exists("image", &args.image)?;
    require_exists("vocab", &args.vocab)?;
    if let Some(config) = &args.config {
        require_exists("config", config)?;
    }

    let resolved = resolve_caption(&args.preset, args.config.as_deref(), None, args.seed)?;
    let backbone_id = resolved
        .backbone
        .clone()
        .unwrap_or_else(|| DEFAULT_ENCODER_ID.to_string());

    let cache = cache_dir();
    let encoder = load_backbone(&backbone_id, &cache)?;
    let vocab = load_vocabulary(&args.vocab, resolved.single_word_vocab)?;
    let vocab_emb = vocab_embeddings(&vocab, &encoder, resolved.retrieval.ensemble, &cache)?;

    let raster = load_raster(&args.image)?;
    let embedding = encoder.embed_image(&raster)?;
    let probs = entity_probabilities(&embedding, &vocab_emb, resolved.retrieval.tau)?;
    let selected = classify_entities(&embedding, &vocab_emb, &resolved.retrieval)?;

    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| {
        probs[b]
            .partial_cmp(&probs[a])
            .unwrap()
            .then_with(|| a.cmp(&b))
    });
    let candidates: Vec<serde_json::Value> = order
        .iter()
        .take(CANDIDATE_ROWS)
        .map(|&i| json!({ "name": vocab_emb.names()[i], "p": probs[i] }))
        .collect();

    let document = json!({
        "config": {
            "command": "retrieve",
            "preset": resolved.preset,
            "retrieval": resolved.retrieval,
            "backbone": backbone_id,
            "single_word_vocab": resolved.single_word_vocab,
            "image": args.image.display().to_string(),
            "vocab": args.vocab.display().to_string(),
            "vocab_checksum": vocab.checksum(),
            "seed": resolved.seed,
        },
        "image": image_id(&args.image),
        "entities": selected
            .iter()
            .map(|e| json!({ "name": e.name, "score": e.score.unwrap_or(0.0) }))
            .collect::<Vec<_>>(),
        "candidates": candidates,
    });
    let mut text = serde_json::to_string_pretty(&document)
        .map_err(|e| CliError::runtime(format!("retrieval serialization failed: {e}")))?;
    text.push('\n');

    match &args.out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
                }
            }
            fs::write(path, text).map_err(|e| io_error(path, e))?;
            println!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}
