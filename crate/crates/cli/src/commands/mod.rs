//! Argument definitions and dispatch for the five commands.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::{CliError, Result};

mod caption;
mod diagnose;
mod evaluate;
mod retrieve;
mod train;

#[derive(Parser)]
#[command(
    name = "entcap",
    version,
    about = "Entity-aware captioning: text-only training, zero-shot captioning, evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Train the projector (and optionally the decoder) on a text corpus.
    Train(TrainArgs),
    /// Caption images with a trained checkpoint.
    Caption(CaptionArgs),
    /// Score a captions file against references.
    Evaluate(EvaluateArgs),
    /// Measure how far captions depend on their visual prefix.
    Diagnose(DiagnoseArgs),
    /// Inspect entity retrieval for a single image.
    Retrieve(RetrieveArgs),
}

#[derive(clap::Args)]
pub struct TrainArgs {
    /// Caption corpus: one caption per line, or the split JSON layout.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Corpus format: plain_lines or karpathy_json (guessed by extension).
    #[arg(long)]
    pub format: Option<String>,
    /// Entity vocabulary, one class name per line.
    #[arg(long)]
    pub vocab: PathBuf,
    /// Training preset: coco, flickr30k, flickrstyle10k, or fixture.
    #[arg(long, default_value = "fixture")]
    pub preset: String,
    /// JSON config file layered over the preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Entity masking rate override.
    #[arg(long = "mask-rate")]
    pub mask_rate: Option<f64>,
    /// Hard prompt template: default, variant1, variant2, variant3, custom.
    #[arg(long)]
    pub template: Option<String>,
    /// Soft prompt length override.
    #[arg(long = "soft-len")]
    pub soft_len: Option<usize>,
    /// Output directory for checkpoint.etar and train.log.jsonl.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::Args)]
pub struct CaptionArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// One image file or a directory of images.
    #[arg(long)]
    pub images: PathBuf,
    /// Entity vocabulary used for retrieval.
    #[arg(long)]
    pub vocab: PathBuf,
    /// Retrieval preset: cross_domain, coco, flickr30k, flickrstyle10k.
    #[arg(long, default_value = "cross_domain")]
    pub preset: String,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub beam: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Record per-stage wall-clock times in each caption record.
    #[arg(long)]
    pub timing: bool,
    /// Output captions file (JSON lines).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the image embeddings as a tensor archive.
    #[arg(long = "embeddings-out")]
    pub embeddings_out: Option<PathBuf>,
}

#[derive(clap::Args)]
pub struct EvaluateArgs {
    /// Captions file produced by the caption command.
    #[arg(long)]
    pub captions: PathBuf,
    /// References: split JSON layout or JSON lines of {id, references}.
    #[arg(long)]
    pub references: PathBuf,
    /// Image embedding archive (enables the image-text agreement score).
    #[arg(long = "image-embeddings")]
    pub image_embeddings: Option<PathBuf>,
    /// Entity vocabulary (enables entity precision).
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Output report path (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::Args)]
pub struct DiagnoseArgs {
    /// Checkpoint whose decoder serves as the continuation model.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Continuation model id; "checkpoint" is the bundled choice.
    #[arg(long = "pure-lm", default_value = "checkpoint")]
    pub pure_lm: String,
    #[arg(long)]
    pub captions: PathBuf,
    #[arg(long)]
    pub references: PathBuf,
    /// Comma-separated prefix lengths; "full" is the longest caption.
    #[arg(long, default_value = "full")]
    pub m: String,
    /// Output curve path; .csv or .json by extension.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::Args)]
pub struct RetrieveArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long, default_value = "cross_domain")]
    pub preset: String,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Input paths are checked up front so a typo fails fast with exit 2.
pub(crate) fn require_exists(field: &str, path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::config(format!(
            "{field}: path {} does not exist",
            path.display()
        )))
    }
}

pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => train::run(args),
        Command::Caption(args) => caption::run(args),
        Command::Evaluate(args) => evaluate::run(args),
        Command::Diagnose(args) => diagnose::run(args),
        Command::Retrieve(args) => retrieve::run(args),
    }
}
