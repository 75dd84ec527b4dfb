//! File-side corpus plumbing: corpus and vocabulary loading, reference
//! sets, and the captions JSON-lines format shared by the commands.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use entcap_core::corpus::{parse_karpathy_json, parse_plain_lines, CaptionRecord, DomainTag};
use entcap_core::vocab::EntityVocabulary;
use serde::{Deserialize, Serialize};

use crate::error::{io_error, CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusFormat {
    PlainLines,
    KarpathyJson,
}

impl std::str::FromStr for CorpusFormat {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain_lines" => Ok(CorpusFormat::PlainLines),
            "karpathy_json" => Ok(CorpusFormat::KarpathyJson),
            other => Err(CliError::config(format!(
                "format: unknown corpus format {other:?} (expected plain_lines or karpathy_json)"
            ))),
        }
    }
}

/// `.json` files default to the split layout, everything else to one
/// caption per line.
pub fn guess_format(path: &Path) -> CorpusFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => CorpusFormat::KarpathyJson,
        _ => CorpusFormat::PlainLines,
    }
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<CaptionRecord>> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let records = match format {
        CorpusFormat::PlainLines => parse_plain_lines(&text)?,
        CorpusFormat::KarpathyJson => parse_karpathy_json(&text)?,
    };
    Ok(records)
}

/// One class name per line, `#` comments and blank lines ignored; the
/// file stem becomes the provenance label.
pub fn load_vocabulary(path: &Path, single_word_only: bool) -> Result<EntityVocabulary> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let names = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let label = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("vocabulary");
    Ok(EntityVocabulary::from_names(names, single_word_only, label)?)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReferenceSet {
    pub id: String,
    pub references: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_tag: Option<DomainTag>,
}

/// References come either as the split JSON layout (grouped by image,
/// ids are the image ids) or as JSON lines of {id, references,
/// domain_tag}. Detected by the leading byte.
pub fn load_references(path: &Path) -> Result<Vec<ReferenceSet>> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') && trimmed.contains("\"images\"") {
        let records = parse_karpathy_json(&text)?;
        return Ok(group_by_image(&records));
    }
    let mut sets = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let set: ReferenceSet = serde_json::from_str(line).map_err(|e| {
            CliError::runtime(format!(
                "{}:{}: bad reference record: {e}",
                path.display(),
                lineno + 1
            ))
        })?;
        sets.push(set);
    }
    Ok(sets)
}

fn group_by_image(records: &[CaptionRecord]) -> Vec<ReferenceSet> {
    let mut order = Vec::new();
    let mut by_id: BTreeMap<String, ReferenceSet> = BTreeMap::new();
    for r in records {
        let image_id = r.id.split('#').next().unwrap_or(&r.id).to_string();
        if !by_id.contains_key(&image_id) {
            order.push(image_id.clone());
            by_id.insert(
                image_id.clone(),
                ReferenceSet {
                    id: image_id.clone(),
                    references: Vec::new(),
                    domain_tag: r.domain_tag,
                },
            );
        }
        by_id.get_mut(&image_id).unwrap().references.push(r.text.clone());
    }
    order.into_iter().map(|id| by_id.remove(&id).unwrap()).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EntityScore {
    pub name: String,
    pub score: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageTiming {
    pub encode_ms: f64,
    pub retrieve_ms: f64,
    pub decode_ms: f64,
}

/// One line of a captions file. The first line of the file is a config
/// echo (`kind: "config"`), decode failures are `kind: "error"` lines,
/// and captions carry the retrieval settings they were produced with.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CaptionLine {
    Config(serde_json::Value),
    Caption {
        id: String,
        caption: String,
        entities: Vec<EntityScore>,
        retrieval: entcap_core::retrieval::RetrievalConfig,
        #[serde(skip_serializing_if = "Option::is_none")]
        timing: Option<StageTiming>,
    },
    Error {
        id: String,
        error: String,
    },
}

pub fn read_caption_lines(path: &Path) -> Result<Vec<CaptionLine>> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let mut lines = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: CaptionLine = serde_json::from_str(line).map_err(|e| {
            CliError::runtime(format!(
                "{}:{}: bad caption record: {e}",
                path.display(),
                lineno + 1
            ))
        })?;
        lines.push(parsed);
    }
    Ok(lines)
}

/// The captioned (id, text) pairs of a captions file, source order.
pub fn captioned_pairs(lines: &[CaptionLine]) -> Vec<(String, String)> {
    lines
        .iter()
        .filter_map(|l| match l {
            CaptionLine::Caption { id, caption, .. } => Some((id.clone(), caption.clone())),
            _ => None,
        })
        .collect()
}
