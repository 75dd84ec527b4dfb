//! Train a captioner on a text corpus and write checkpoint plus log.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::time::Instant;

use serde_json::json;

use entcap_core::corpus::Split;
use entcap_core::encoder::DualEncoder;
use entcap_core::model::{CaptionerModel, ModelConfig};
use entcap_core::pos::LexiconTagger;
use entcap_core::prompt::HardPromptTemplate;
use entcap_core::tokenizer::WordTokenizer;
use entcap_core::train::{train, TrainEvent};
use entcap_core::CoreError;

use crate::backbone::{cache_dir, load_backbone};
use crate::checkpoint::save_checkpoint;
use crate::configio::{parse_template_flag, resolve_train, ModelScale, TrainOverrides};
use crate::corpusio::{guess_format, load_corpus, load_vocabulary, CorpusFormat};
use crate::error::{io_error, CliError, Result};

use super::{require_exists, TrainArgs};

struct LogWriter {
    out: BufWriter<File>,
    path: std::path::PathBuf,
    failed: Option<CliError>,
    start: Instant,
}

impl LogWriter {
    fn create(path: std::path::PathBuf) -> Result<Self> {
        let file = File::create(&path).map_err(|e| io_error(&path, e))?;
        Ok(LogWriter {
            out: BufWriter::new(file),
            path,
            failed: None,
            start: Instant::now(),
        })
    }

    fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    /// Events arrive through a closure that cannot return errors, so IO
    /// failures are parked here and surfaced once the loop hands back.
    fn line(&mut self, value: &serde_json::Value) {
        if self.failed.is_some() {
            return;
        }
        let result = serde_json::to_string(value)
            .map_err(|e| CliError::runtime(format!("log serialization failed: {e}")))
            .and_then(|text| {
                writeln!(self.out, "{text}").map_err(|e| io_error(&self.path, e))
            });
        if let Err(e) = result {
            self.failed = Some(e);
        }
    }

    fn finish(mut self) -> Result<()> {
        if let Some(e) = self.failed.take() {
            return Err(e);
        }
        self.out.flush().map_err(|e| io_error(&self.path, e))
    }
}

pub fn run(args: TrainArgs) -> Result<()> {
    require_exists("corpus", &args.corpus)?;
    require_exists("vocab", &args.vocab)?;
    if let Some(config) = &args.config {
        require_exists("config", config)?;
    }

    let overrides = TrainOverrides {
        seed: args.seed,
        mask_rate: args.mask_rate,
        template: args
            .template
            .as_deref()
            .map(parse_template_flag)
            .transpose()?,
        soft_len: args.soft_len,
    };
    let resolved = resolve_train(&args.preset, args.config.as_deref(), &overrides)?;

    let format = match args.format.as_deref() {
        Some(name) => name.parse::<CorpusFormat>()?,
        None => guess_format(&args.corpus),
    };
    let records = load_corpus(&args.corpus, format)?;
    let records: Vec<_> = records
        .into_iter()
        .filter(|r| r.split == Split::Train)
        .collect();
    if records.is_empty() {
        return Err(CliError::runtime(format!(
            "{}: no train-split captions found",
            args.corpus.display()
        )));
    }

    let vocab = load_vocabulary(&args.vocab, resolved.single_word_vocab)?;
    let encoder = load_backbone(&resolved.backbone, &cache_dir())?;

    let template = resolved.training.template()?;
    let mut fit_texts: Vec<String> = records.iter().map(|r| r.text.clone()).collect();
    fit_texts.extend(vocab.names().iter().cloned());
    fit_texts.extend(HardPromptTemplate::preset_texts());
    fit_texts.push(format!(
        "{}{}{}",
        template.prefix, template.separator, template.suffix
    ));
    let tokenizer = WordTokenizer::fit(fit_texts.iter().map(|s| s.as_str()));

    let mut model_cfg = match resolved.model_scale {
        ModelScale::Fixture => {
            ModelConfig::fixture(tokenizer.vocab_size(), encoder.dim())
        }
        ModelScale::Full => ModelConfig::full_scale(tokenizer.vocab_size()),
    };
    if let Some(soft_len) = resolved.soft_len {
        model_cfg.projector.query_count = soft_len;
    }

    let mut model = CaptionerModel::init(model_cfg, tokenizer, resolved.training.seed)?;

    fs::create_dir_all(&args.out).map_err(|e| io_error(&args.out, e))?;
    let checkpoint_path = args.out.join("checkpoint.etar");
    let log_path = args.out.join("train.log.jsonl");
    let mut log = LogWriter::create(log_path.clone())?;

    let format_name = match format {
        CorpusFormat::PlainLines => "plain_lines",
        CorpusFormat::KarpathyJson => "karpathy_json",
    };
    log.line(&json!({
        "kind": "config",
        "command": "train",
        "preset": resolved.preset,
        "training": resolved.training,
        "model": model.cfg,
        "corpus": args.corpus.display().to_string(),
        "corpus_format": format_name,
        "vocab": args.vocab.display().to_string(),
        "vocab_checksum": vocab.checksum(),
        "single_word_vocab": resolved.single_word_vocab,
        "backbone": resolved.backbone,
        "out": args.out.display().to_string(),
    }));

    let tagger = LexiconTagger::new();
    let outcome = train(
        &mut model,
        &records,
        &vocab,
        &tagger,
        &encoder,
        &resolved.training,
        |event| {
            let line = match event {
                TrainEvent::Step { epoch, step, loss } => json!({
                    "kind": "step",
                    "epoch": epoch,
                    "step": step,
                    "loss": loss,
                    "wall_clock": log.elapsed(),
                }),
                TrainEvent::EpochEnd { epoch, mean_loss } => json!({
                    "kind": "epoch_end",
                    "epoch": epoch,
                    "mean_loss": mean_loss,
                    "wall_clock": log.elapsed(),
                }),
                TrainEvent::RecordSkipped { id, reason } => json!({
                    "kind": "record_skipped",
                    "id": id,
                    "reason": reason,
                }),
                TrainEvent::TextTruncated { id } => json!({
                    "kind": "text_truncated",
                    "id": id,
                }),
            };
            log.line(&line);
        },
    );

    let summary = match outcome {
        Ok(summary) => summary,
        Err(CoreError::Divergence { epoch, step, loss }) => {
            log.line(&json!({
                "kind": "divergence",
                "epoch": epoch,
                "step": step,
                "loss": loss.to_string(),
                "wall_clock": log.elapsed(),
            }));
            log.finish()?;
            return Err(CliError::from(CoreError::Divergence { epoch, step, loss }));
        }
        Err(e) => return Err(e.into()),
    };

    log.line(&json!({
        "kind": "summary",
        "epochs_run": summary.epochs_run,
        "steps": summary.steps,
        "final_epoch_loss": summary.final_epoch_loss,
        "trained_records": summary.trained_records,
        "skipped_records": summary.skipped_records,
        "wall_clock": log.elapsed(),
    }));
    log.finish()?;

    save_checkpoint(
        &checkpoint_path,
        &model,
        &resolved.training,
        &vocab.checksum(),
        &resolved.backbone,
    )?;

    println!(
        "trained {} records for {} epochs, final loss {:.6}",
        summary.trained_records, summary.epochs_run, summary.final_epoch_loss
    );
    println!("wrote {}", checkpoint_path.display());
    println!("wrote {}", log_path.display());
    Ok(())
}
