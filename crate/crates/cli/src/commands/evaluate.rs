//! Score a captions file against references and write the report.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde_json::json;

use entcap_core::corpus::DomainTag;
use entcap_core::encoder::{Embedding, HashProjectionEncoder};
use entcap_core::metrics::{
    bleu, cider, clip_score, entity_precision, EntityCounts, EntityPrecision,
    EvaluationReport, MetricScores, SampleOutcome, REPORT_SCHEMA_VERSION,
};
use entcap_core::nouns::extract_nouns;
use entcap_core::pos::LexiconTagger;
use entcap_core::vocab::EntityVocabulary;

use crate::archive::read_archive;
use crate::backbone::{cache_dir, load_backbone};
use crate::corpusio::{captioned_pairs, load_references, load_vocabulary, read_caption_lines};
use crate::error::{io_error, CliError, Result};

use super::{require_exists, EvaluateArgs};

fn domain_name(tag: DomainTag) -> &'static str {
    match tag {
        DomainTag::In => "in",
        DomainTag::Near => "near",
        DomainTag::Out => "out",
    }
}

/// Embeddings archive written by the caption command: ids in the
/// manifest, one matrix row per id, produced by the named backbone.
fn load_image_embeddings(
    path: &Path,
    needed_ids: &[String],
) -> Result<(HashProjectionEncoder, Vec<Embedding>)> {
    let archive = read_archive(path)?;
    let kind = archive.manifest.get("kind").and_then(|v| v.as_str());
    if kind != Some("image_embeddings") {
        return Err(CliError::runtime(format!(
            "{}: not an image embedding archive (kind {:?})",
            path.display(),
            kind.unwrap_or("<missing>")
        )));
    }
    let backbone = archive
        .manifest
        .get("backbone")
        .and_then(|v| v.as_str())
        .ok_or_else(|| {
            CliError::runtime(format!("{}: manifest has no backbone id", path.display()))
        })?;
    let ids: Vec<&str> = archive
        .manifest
        .get("ids")
        .and_then(|v| v.as_array())
        .map(|a| a.iter().filter_map(|v| v.as_str()).collect())
        .ok_or_else(|| {
            CliError::runtime(format!("{}: manifest has no id list", path.display()))
        })?;
    let matrix = archive
        .tensors
        .iter()
        .find(|(name, _)| name == "embeddings")
        .map(|(_, m)| m)
        .ok_or_else(|| {
            CliError::runtime(format!("{}: no embeddings tensor", path.display()))
        })?;
    if ids.len() != matrix.rows {
        return Err(CliError::runtime(format!(
            "{}: {} ids but {} embedding rows",
            path.display(),
            ids.len(),
            matrix.rows
        )));
    }

    let index: BTreeMap<&str, usize> =
        ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let mut rows = Vec::with_capacity(needed_ids.len());
    let mut missing = Vec::new();
    for id in needed_ids {
        match index.get(id.as_str()) {
            Some(&i) => rows.push(Embedding::new(matrix.row(i).to_vec())),
            None => missing.push(id.as_str()),
        }
    }
    if !missing.is_empty() {
        return Err(CliError::runtime(format!(
            "{}: no embedding for caption ids: {}",
            path.display(),
            missing.join(", ")
        )));
    }
    let encoder = load_backbone(backbone, &cache_dir())?;
    Ok((encoder, rows))
}

struct ScoreInputs<'a> {
    captions: &'a [String],
    references: &'a [Vec<String>],
    embeddings: Option<&'a (HashProjectionEncoder, Vec<Embedding>)>,
    golds: Option<&'a (EntityVocabulary, LexiconTagger, Vec<Vec<String>>)>,
}

fn score_slice(
    inputs: &ScoreInputs,
    indices: &[usize],
) -> Result<(MetricScores, Option<EntityPrecision>)> {
    let caps: Vec<String> = indices.iter().map(|&i| inputs.captions[i].clone()).collect();
    let refs: Vec<Vec<String>> = indices
        .iter()
        .map(|&i| inputs.references[i].clone())
        .collect();
    let mut scores = MetricScores {
        bleu1: bleu(&caps, &refs, 1)?,
        bleu2: bleu(&caps, &refs, 2)?,
        bleu3: bleu(&caps, &refs, 3)?,
        bleu4: bleu(&caps, &refs, 4)?,
        cider: cider(&caps, &refs)?,
        clip_s: None,
        entity_precision: None,
        meteor: None,
        spice: None,
    };
    if let Some((encoder, all)) = inputs.embeddings {
        let subset: Vec<Embedding> = indices.iter().map(|&i| all[i].clone()).collect();
        scores.clip_s = Some(clip_score(encoder, &subset, &caps)?);
    }
    let mut counts = None;
    if let Some((vocab, tagger, golds)) = inputs.golds {
        let subset: Vec<Vec<String>> = indices.iter().map(|&i| golds[i].clone()).collect();
        let ep = entity_precision(&caps, &subset, vocab, tagger)?;
        scores.entity_precision = Some(ep.value());
        counts = Some(ep);
    }
    Ok((scores, counts))
}

pub fn run(args: EvaluateArgs) -> Result<()> {
    require_exists("captions", &args.captions)?;
    require_exists("references", &args.references)?;
    if let Some(path) = &args.image_embeddings {
        require_exists("image-embeddings", path)?;
    }
    if let Some(path) = &args.vocab {
        require_exists("vocab", path)?;
    }

    let lines = read_caption_lines(&args.captions)?;
    let pairs = captioned_pairs(&lines);
    if pairs.is_empty() {
        return Err(CliError::runtime(format!(
            "{}: no caption records to score",
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

    let ids: Vec<String> = pairs.iter().map(|(id, _)| id.clone()).collect();
    let captions: Vec<String> = pairs.iter().map(|(_, c)| c.clone()).collect();
    let mut refs: Vec<Vec<String>> = Vec::with_capacity(pairs.len());
    let mut tags: Vec<Option<DomainTag>> = Vec::with_capacity(pairs.len());
    for (id, _) in &pairs {
        let set = &reference_sets[by_id[id.as_str()]];
        refs.push(set.references.clone());
        tags.push(set.domain_tag);
    }

    let embeddings = args
        .image_embeddings
        .as_deref()
        .map(|path| load_image_embeddings(path, &ids))
        .transpose()?;
    let golds = args
        .vocab
        .as_deref()
        .map(|path| -> Result<_> {
            let vocab = load_vocabulary(path, false)?;
            let tagger = LexiconTagger::new();
            let sets: Vec<Vec<String>> = refs
                .iter()
                .map(|reference_set| {
                    let mut gold = Vec::new();
                    for reference in reference_set {
                        for entity in extract_nouns(reference, &vocab, &tagger) {
                            if !gold.contains(&entity.name) {
                                gold.push(entity.name);
                            }
                        }
                    }
                    gold
                })
                .collect();
            Ok((vocab, tagger, sets))
        })
        .transpose()?;

    let inputs = ScoreInputs {
        captions: &captions,
        references: &refs,
        embeddings: embeddings.as_ref(),
        golds: golds.as_ref(),
    };

    let everything: Vec<usize> = (0..pairs.len()).collect();
    let (overall, overall_counts) = score_slice(&inputs, &everything)?;

    let mut domains = BTreeMap::new();
    if tags.iter().any(Option::is_some) {
        let mut groups: BTreeMap<&'static str, Vec<usize>> = BTreeMap::new();
        for (i, tag) in tags.iter().enumerate() {
            if let Some(tag) = tag {
                groups.entry(domain_name(*tag)).or_default().push(i);
            }
        }
        for (name, indices) in groups {
            let (scores, _) = score_slice(&inputs, &indices)
                .map_err(|e| CliError::runtime(format!("domain {name}: {e}")))?;
            domains.insert(name.to_string(), scores);
        }
    }

    let samples: Vec<SampleOutcome> = pairs
        .iter()
        .enumerate()
        .map(|(i, (id, caption))| SampleOutcome {
            id: id.clone(),
            caption: caption.clone(),
            references: refs[i].clone(),
            domain_tag: tags[i].map(|t| domain_name(t).to_string()),
        })
        .collect();

    let report = EvaluationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        overall,
        domains,
        samples,
        entity_counts: overall_counts.map(|ep| EntityCounts {
            correct: ep.correct,
            extracted: ep.extracted,
        }),
        g_vis: None,
    };
    report.validate()?;

    let document = json!({
        "config": {
            "command": "evaluate",
            "captions": args.captions.display().to_string(),
            "references": args.references.display().to_string(),
            "image_embeddings": args.image_embeddings.as_ref().map(|p| p.display().to_string()),
            "vocab": args.vocab.as_ref().map(|p| p.display().to_string()),
            "out": args.out.display().to_string(),
        },
        "report": &report,
    });
    let mut text = serde_json::to_string_pretty(&document)
        .map_err(|e| CliError::runtime(format!("report serialization failed: {e}")))?;
    text.push('\n');
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
        }
    }
    fs::write(&args.out, text).map_err(|e| io_error(&args.out, e))?;

    let r = &report.overall;
    println!(
        "bleu1 {:.4}  bleu2 {:.4}  bleu3 {:.4}  bleu4 {:.4}  cider {:.4}",
        r.bleu1, r.bleu2, r.bleu3, r.bleu4, r.cider
    );
    if let Some(clip) = r.clip_s {
        println!("clip_s {clip:.4}");
    }
    if let Some(ep) = r.entity_precision {
        println!("entity_precision {ep:.4}");
    }
    println!("wrote {}", args.out.display());
    Ok(())
}
