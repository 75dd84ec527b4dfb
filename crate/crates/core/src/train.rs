//! Text-only training loop: noised text embeddings in, caption token
//! losses out, AdamW over the projector (and optionally the decoder).

use alloc::format;
use alloc::string::String;
use alloc::string::ToString;
use alloc::vec::Vec;

use crate::config::{MaskResample, TrainingConfig};
use crate::corpus::CaptionRecord;
use crate::encoder::{inject_noise, DualEncoder};
use crate::error::CoreError;
use crate::model::{CaptionerModel, PreparedCaption};
use crate::nouns::extract_nouns;
use crate::optim::AdamW;
use crate::params::{ParamId, Tape};
use crate::pos::PosTagger;
use crate::prompt::{mask_entities, render_hard_prompt};
use crate::rng::Stream;
use crate::tokenizer;
use crate::vocab::{Entity, EntityVocabulary};

#[derive(Clone, Debug, PartialEq)]
pub enum TrainEvent {
    Step {
        epoch: usize,
        step: usize,
        loss: f64,
    },
    EpochEnd {
        epoch: usize,
        mean_loss: f64,
    },
    RecordSkipped {
        id: String,
        reason: String,
    },
    TextTruncated {
        id: String,
    },
}

#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub epochs_run: usize,
    pub steps: usize,
    pub final_epoch_loss: f64,
    pub trained_records: usize,
    pub skipped_records: usize,
}

struct Prepared {
    embedding: Vec<f64>,
    caption_ids: Vec<u32>,
    entities: Vec<Entity>,
    fixed_survivors: Option<Vec<Entity>>,
}

/// Run the full loop over every record given. Records are used as-is;
/// split filtering is the caller's concern.
pub fn train(
    model: &mut CaptionerModel,
    records: &[CaptionRecord],
    entity_vocab: &EntityVocabulary,
    tagger: &dyn PosTagger,
    encoder: &dyn DualEncoder,
    cfg: &TrainingConfig,
    mut on_event: impl FnMut(TrainEvent),
) -> Result<TrainSummary, CoreError> {
    cfg.validate()?;
    let template = cfg.template()?;
    if encoder.dim() != model.cfg.encoder_dim() {
        return Err(CoreError::InputMismatch(format!(
            "encoder produces {} dimensions, the projector expects {}",
            encoder.dim(),
            model.cfg.encoder_dim()
        )));
    }

    let mut fixed_mask_rng = Stream::derive(cfg.seed, "mask");
    let mut prepared = Vec::new();
    let mut skipped = 0usize;
    for record in records {
        let mut caption_ids = model.tokenizer.encode(&record.text);
        if caption_ids.is_empty() {
            skipped += 1;
            on_event(TrainEvent::RecordSkipped {
                id: record.id.clone(),
                reason: "caption has no tokens".to_string(),
            });
            continue;
        }
        caption_ids.push(tokenizer::EOS);

        let entities = extract_nouns(&record.text, entity_vocab, tagger);
        let full_prompt = render_hard_prompt(&entities, &template);
        let longest_hard = model.tokenizer.encode(&full_prompt.text).len();
        let worst_case =
            model.cfg.projector.query_count + longest_hard + caption_ids.len();
        if worst_case > model.cfg.lm.max_len {
            skipped += 1;
            on_event(TrainEvent::RecordSkipped {
                id: record.id.clone(),
                reason: format!(
                    "sequence of up to {worst_case} rows exceeds the model maximum {}",
                    model.cfg.lm.max_len
                ),
            });
            continue;
        }

        let text_embedding = encoder.embed_text(&record.text)?;
        if text_embedding.truncated {
            on_event(TrainEvent::TextTruncated {
                id: record.id.clone(),
            });
        }

        let fixed_survivors = match cfg.mask_resample {
            MaskResample::PerCaption => Some(mask_entities(
                &entities,
                cfg.r_mask,
                &mut fixed_mask_rng,
            )?),
            MaskResample::PerStep => None,
        };

        prepared.push(Prepared {
            embedding: text_embedding.embedding.values,
            caption_ids,
            entities,
            fixed_survivors,
        });
    }

    if prepared.is_empty() {
        return Err(CoreError::InputMismatch(
            "no trainable records after filtering".to_string(),
        ));
    }

    let trainable: Vec<ParamId> = if cfg.lm_finetune {
        model.params.ids().collect()
    } else {
        model.projector_param_ids()
    };
    let is_trainable = |id: ParamId| trainable.binary_search(&id).is_ok();

    let mut optimizer = AdamW::new(cfg.learning_rate, cfg.weight_decay);
    let mut mask_rng = Stream::derive(cfg.seed, "mask:step");
    let mut noise_rng = Stream::derive(cfg.seed, "noise");

    let mut steps = 0usize;
    let mut final_epoch_loss = 0.0;
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..prepared.len()).collect();
        let mut shuffle_rng = Stream::derive(cfg.seed, &format!("shuffle:{epoch}"));
        shuffle_rng.shuffle(&mut order);

        let mut loss_sum = 0.0;
        for (step_in_epoch, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut items = Vec::with_capacity(batch.len());
            for &idx in batch {
                let rec = &prepared[idx];
                let survivors = match &rec.fixed_survivors {
                    Some(fixed) => fixed.clone(),
                    None => mask_entities(&rec.entities, cfg.r_mask, &mut mask_rng)?,
                };
                let prompt = render_hard_prompt(&survivors, &template);
                let hard_ids = model.tokenizer.encode(&prompt.text);
                let clean = crate::encoder::Embedding {
                    values: rec.embedding.clone(),
                    normalized: true,
                };
                let noised = inject_noise(&clean, cfg.noise_variance, &mut noise_rng)?;
                items.push(PreparedCaption {
                    embedding: noised.values,
                    hard_ids,
                    caption_ids: rec.caption_ids.clone(),
                });
            }

            let mut tape = Tape::new(&model.params);
            let loss_node = model.batch_loss_node(&mut tape, &items, cfg.prompt_order)?;
            let loss = tape.g.scalar(loss_node);
            if !loss.is_finite() {
                return Err(CoreError::Divergence {
                    epoch,
                    step: step_in_epoch,
                    loss,
                });
            }
            tape.g.backward(loss_node);

            let grads: Vec<(ParamId, crate::tensor::Matrix)> = tape
                .bindings()
                .filter(|(pid, _)| is_trainable(*pid))
                .map(|(pid, nid)| (pid, tape.g.grad(nid).clone()))
                .collect();
            drop(tape);
            optimizer.step(&mut model.params, &grads);

            steps += 1;
            loss_sum += loss * batch.len() as f64;
            on_event(TrainEvent::Step {
                epoch,
                step: step_in_epoch,
                loss,
            });
        }

        let mean_loss = loss_sum / prepared.len() as f64;
        final_epoch_loss = mean_loss;
        on_event(TrainEvent::EpochEnd { epoch, mean_loss });
    }

    Ok(TrainSummary {
        epochs_run: cfg.epochs,
        steps,
        final_epoch_loss,
        trained_records: prepared.len(),
        skipped_records: skipped,
    })
}
