//! Caption a directory of images with a trained checkpoint.

use std::fs;
use std::time::Instant;

use serde_json::json;

use entcap_core::decode::{generate, GenerateOptions};
use entcap_core::encoder::DualEncoder;
use entcap_core::prompt::render_hard_prompt;
use entcap_core::retrieval::classify_entities;
use entcap_core::Matrix;

use crate::archive::write_archive;
use crate::backbone::{cache_dir, load_backbone};
use crate::checkpoint::load_checkpoint;
use crate::configio::resolve_caption;
use crate::corpusio::{CaptionLine, EntityScore, StageTiming};
use crate::embcache::vocab_embeddings;
use crate::error::{io_error, CliError, Result};
use crate::imageio::{collect_images, image_id, load_raster};

use super::{require_exists, CaptionArgs};

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

pub fn run(args: CaptionArgs) -> Result<()> {
    require_exists("checkpoint", &args.checkpoint)?;
    require_exists("images", &args.images)?;
    require_exists("vocab", &args.vocab)?;
    if let Some(config) = &args.config {
        require_exists("config", config)?;
    }

    let resolved = resolve_caption(&args.preset, args.config.as_deref(), args.beam, args.seed)?;
    let loaded = load_checkpoint(&args.checkpoint)?;
    if let Some(requested) = &resolved.backbone {
        if requested != &loaded.backbone_id {
            return Err(CliError::config(format!(
                "backbone: config asks for {requested:?} but the checkpoint was trained \
                 against {:?}; captioning always embeds with the training backbone",
                loaded.backbone_id
            )));
        }
    }

    let cache = cache_dir();
    let encoder = load_backbone(&loaded.backbone_id, &cache)?;
    let vocab = crate::corpusio::load_vocabulary(&args.vocab, resolved.single_word_vocab)?;
    let vocab_emb = vocab_embeddings(&vocab, &encoder, resolved.retrieval.ensemble, &cache)?;
    let images = collect_images(&args.images)?;

    let template = loaded.training.template()?;
    let opts = GenerateOptions {
        beam_size: resolved.beam,
        max_tokens: resolved.max_tokens,
        prompt_order: loaded.training.prompt_order,
    };

    let mut lines: Vec<CaptionLine> = Vec::with_capacity(images.len() + 1);
    lines.push(CaptionLine::Config(json!({
        "command": "caption",
        "preset": resolved.preset,
        "retrieval": resolved.retrieval,
        "beam": resolved.beam,
        "max_tokens": resolved.max_tokens,
        "seed": resolved.seed,
        "single_word_vocab": resolved.single_word_vocab,
        "backbone": loaded.backbone_id,
        "checkpoint": args.checkpoint.display().to_string(),
        "checkpoint_vocab_checksum": loaded.vocab_checksum,
        "images": args.images.display().to_string(),
        "vocab": args.vocab.display().to_string(),
        "vocab_checksum": vocab.checksum(),
        "timing": args.timing,
    })));

    let mut embedded: Vec<(String, Vec<f64>)> = Vec::new();
    let mut captioned = 0usize;
    let mut failed = 0usize;
    for path in &images {
        let id = image_id(path);
        let encode_start = Instant::now();
        let embedding = match load_raster(path).and_then(|raster| {
            encoder.embed_image(&raster).map_err(CliError::from)
        }) {
            Ok(e) => e,
            Err(e) => {
                failed += 1;
                lines.push(CaptionLine::Error {
                    id,
                    error: e.to_string(),
                });
                continue;
            }
        };
        let encode_ms = ms(encode_start);
        embedded.push((id.clone(), embedding.values.clone()));

        let retrieve_start = Instant::now();
        let entities = match classify_entities(&embedding, &vocab_emb, &resolved.retrieval) {
            Ok(es) => es,
            Err(e) => {
                failed += 1;
                lines.push(CaptionLine::Error {
                    id,
                    error: e.to_string(),
                });
                continue;
            }
        };
        let retrieve_ms = ms(retrieve_start);

        let decode_start = Instant::now();
        let prompt = render_hard_prompt(&entities, &template);
        let hard_ids = loaded.model.tokenizer.encode(&prompt.text);
        let generated = match generate(&loaded.model, &embedding.values, &hard_ids, &opts) {
            Ok(g) => g,
            Err(e) => {
                failed += 1;
                lines.push(CaptionLine::Error {
                    id,
                    error: e.to_string(),
                });
                continue;
            }
        };
        let decode_ms = ms(decode_start);

        captioned += 1;
        lines.push(CaptionLine::Caption {
            id,
            caption: generated.text,
            entities: entities
                .iter()
                .map(|e| EntityScore {
                    name: e.name.clone(),
                    score: e.score.unwrap_or(0.0),
                })
                .collect(),
            retrieval: resolved.retrieval,
            timing: args.timing.then_some(StageTiming {
                encode_ms,
                retrieve_ms,
                decode_ms,
            }),
        });
    }

    let mut text = String::new();
    for line in &lines {
        let row = serde_json::to_string(line)
            .map_err(|e| CliError::runtime(format!("caption record serialization failed: {e}")))?;
        text.push_str(&row);
        text.push('\n');
    }
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
        }
    }
    fs::write(&args.out, text).map_err(|e| io_error(&args.out, e))?;

    if let Some(emb_out) = &args.embeddings_out {
        let ids: Vec<&str> = embedded.iter().map(|(id, _)| id.as_str()).collect();
        let dim = encoder.dim();
        let mut matrix = Matrix::zeros(embedded.len(), dim);
        for (i, (_, values)) in embedded.iter().enumerate() {
            matrix.row_mut(i).copy_from_slice(values);
        }
        let manifest = json!({
            "kind": "image_embeddings",
            "backbone": loaded.backbone_id,
            "dim": dim,
            "ids": ids,
        });
        write_archive(emb_out, &manifest, &[("embeddings", &matrix)])?;
        println!("wrote {}", emb_out.display());
    }

    println!(
        "captioned {captioned} of {} images ({failed} failed)",
        images.len()
    );
    println!("wrote {}", args.out.display());
    Ok(())
}
