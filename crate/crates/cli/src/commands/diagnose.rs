//! Visual-guidance diagnostics: how much of each caption the decoder
//! would have produced from a text prefix alone.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde_json::json;

use entcap_core::decode::lm_continue;
use entcap_core::metrics::GvisCurve;
use entcap_core::CoreError;

use crate::checkpoint::load_checkpoint;
use crate::corpusio::{captioned_pairs, load_references, read_caption_lines};
use crate::error::{io_error, CliError, Result};

use super::{require_exists, DiagnoseArgs};

/// The m list: comma-separated prefix lengths, each a positive number or
/// the word "full" (the longest caption's word count). Empty means no
/// curve points.
fn parse_m_list(spec: &str, full_len: usize) -> Result<Vec<usize>> {
    let trimmed = spec.trim();
    if trimmed.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for token in trimmed.split(',') {
        let token = token.trim();
        if token == "full" {
            out.push(full_len.max(1));
            continue;
        }
        let value: usize = token.parse().map_err(|_| {
            CliError::config(format!("m: {token:?} is not a number or \"full\""))
        })?;
        if value == 0 {
            return Err(CliError::config("m: prefix lengths must be at least 1"));
        }
        out.push(value);
    }
    Ok(out)
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.eq_ignore_ascii_case("csv"))
        .unwrap_or(false)
}

fn write_out(path: &Path, text: String) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
        }
    }
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn render_curve(path: &Path, config: &serde_json::Value, curve: &GvisCurve) -> Result<String> {
    if is_csv(path) {
        let mut text = format!("# {config}\n");
        text.push_str(&format!("# cider_model {}\n", curve.cider_model));
        text.push_str("m,cider_m,g_vis,g_lang\n");
        for point in &curve.points {
            text.push_str(&format!(
                "{},{},{},{}\n",
                point.m, point.cider_m, point.g_vis, point.g_lang
            ));
        }
        Ok(text)
    } else {
        let document = json!({ "config": config, "curve": curve });
        serde_json::to_string_pretty(&document)
            .map(|mut t| {
                t.push('\n');
                t
            })
            .map_err(|e| CliError::runtime(format!("curve serialization failed: {e}")))
    }
}

fn render_failure(path: &Path, config: &serde_json::Value, message: &str) -> Result<String> {
    if is_csv(path) {
        Ok(format!(
            "# {config}\nm,cider_m,g_vis,g_lang\n# error: {message}\n"
        ))
    } else {
        let document = json!({ "config": config, "error": message });
        serde_json::to_string_pretty(&document)
            .map(|mut t| {
                t.push('\n');
                t
            })
            .map_err(|e| CliError::runtime(format!("curve serialization failed: {e}")))
    }
}

pub fn run(args: DiagnoseArgs) -> Result<()> {
    require_exists("checkpoint", &args.checkpoint)?;
    require_exists("captions", &args.captions)?;
    require_exists("references", &args.references)?;
    if args.pure_lm != "checkpoint" {
        return Err(CliError::config(format!(
            "pure-lm: unknown continuation model {:?} (known: checkpoint)",
            args.pure_lm
        )));
    }

    let lines = read_caption_lines(&args.captions)?;
    let pairs = captioned_pairs(&lines);
    if pairs.is_empty() {
        return Err(CliError::runtime(format!(
            "{}: no caption records to diagnose",
            args.captions.display()
        )));
    }
    let reference_sets = load_references(&args.references)?;
    let by_id: BTreeMap<&str, usize> = reference_sets
        .iter()
        .enumerate()
        .map(|(i, r)| (r.id.as_str(), i))
        .collect();
    let orphans: Vec<&str> = pairs
        .iter()
        .filter(|(id, _)| !by_id.contains_key(id.as_str()))
        .map(|(id, _)| id.as_str())
        .collect();
    if !orphans.is_empty() {
        return Err(CliError::runtime(format!(
            "{}: captions with no reference set: {}",
            args.references.display(),
            orphans.join(", ")
        )));
    }

    let captions: Vec<String> = pairs.iter().map(|(_, c)| c.clone()).collect();
    let refs: Vec<Vec<String>> = pairs
        .iter()
        .map(|(id, _)| reference_sets[by_id[id.as_str()]].references.clone())
        .collect();

    let full_len = captions
        .iter()
        .map(|c| c.split_whitespace().count())
        .max()
        .unwrap_or(1);
    let m_values = parse_m_list(&args.m, full_len)?;

    let loaded = load_checkpoint(&args.checkpoint)?;
    let model = loaded.model;
    let max_len = model.cfg.lm.max_len;

    let config = json!({
        "command": "diagnose",
        "checkpoint": args.checkpoint.display().to_string(),
        "pure_lm": args.pure_lm,
        "captions": args.captions.display().to_string(),
        "references": args.references.display().to_string(),
        "m": m_values,
        "out": args.out.display().to_string(),
    });

    // The continuation keeps the prefix words verbatim and appends the
    // decoder's greedy completion, so unknown words in the prefix are
    // not flattened through the tokenizer.
    let continue_prefix = |prefix: &[&str]| -> std::result::Result<String, CoreError> {
        let prefix_text = prefix.join(" ");
        let ids = model.tokenizer.encode(&prefix_text);
        if ids.is_empty() || ids.len() >= max_len {
            return Ok(prefix_text);
        }
        let budget = (max_len - ids.len()).min(64);
        let continuation = lm_continue(&model, &ids, budget)?;
        if continuation.is_empty() {
            return Ok(prefix_text);
        }
        Ok(format!(
            "{prefix_text} {}",
            model.tokenizer.decode(&continuation)
        ))
    };

    match entcap_core::metrics::visual_guidance_curve(
        &captions,
        &refs,
        &m_values,
        continue_prefix,
    ) {
        Ok(curve) => {
            let text = render_curve(&args.out, &config, &curve)?;
            write_out(&args.out, text)?;
            println!(
                "cider_model {:.6} over {} captions, {} curve points",
                curve.cider_model,
                captions.len(),
                curve.points.len()
            );
            println!("wrote {}", args.out.display());
            Ok(())
        }
        Err(CoreError::UndefinedRatio(message)) => {
            let text = render_failure(&args.out, &config, &message)?;
            write_out(&args.out, text)?;
            println!("wrote {}", args.out.display());
            Err(CliError::runtime(format!("diagnosis failed: {message}")))
        }
        Err(e) => Err(e.into()),
    }
}
