//! Caption corpus records and the two supported corpus layouts.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainTag {
    In,
    Near,
    Out,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaptionRecord {
    pub id: String,
    pub text: String,
    pub image_ref: Option<String>,
    pub split: Split,
    pub domain_tag: Option<DomainTag>,
}

fn normalize_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// One caption per line; blank lines are skipped; everything is a train
/// record with the 1-based line number as its id.
pub fn parse_plain_lines(text: &str) -> Result<Vec<CaptionRecord>, CoreError> {
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let caption = normalize_whitespace(line);
        if caption.is_empty() {
            continue;
        }
        records.push(CaptionRecord {
            id: (lineno + 1).to_string(),
            text: caption,
            image_ref: None,
            split: Split::Train,
            domain_tag: None,
        });
    }
    Ok(records)
}

/// The conventional captioning-split JSON layout: a top-level "images"
/// array, each image holding "sentences" with "raw" text, a "split"
/// ("restval" folds into train), an image id ("cocoid" or "imgid"),
/// and optionally "filename" and a "domain" tag.
pub fn parse_karpathy_json(text: &str) -> Result<Vec<CaptionRecord>, CoreError> {
    let root: serde_json::Value = serde_json::from_str(text).map_err(|e| CoreError::Parse {
        index: 0,
        message: format!("invalid JSON: {e}"),
    })?;
    let images = root
        .get("images")
        .and_then(|v| v.as_array())
        .ok_or_else(|| CoreError::Parse {
            index: 0,
            message: "missing top-level \"images\" array".to_string(),
        })?;

    let mut records = Vec::new();
    for (i, image) in images.iter().enumerate() {
        let err = |message: String| CoreError::Parse { index: i, message };

        let split = match image.get("split").and_then(|v| v.as_str()) {
            None | Some("train") | Some("restval") => Split::Train,
            Some("val") => Split::Val,
            Some("test") => Split::Test,
            Some(other) => return Err(err(format!("unknown split {other:?}"))),
        };
        let domain_tag = match image.get("domain").and_then(|v| v.as_str()) {
            None => None,
            Some("in") => Some(DomainTag::In),
            Some("near") => Some(DomainTag::Near),
            Some("out") => Some(DomainTag::Out),
            Some(other) => return Err(err(format!("unknown domain {other:?}"))),
        };
        let image_id = image
            .get("cocoid")
            .or_else(|| image.get("imgid"))
            .and_then(|v| v.as_u64())
            .ok_or_else(|| err("missing image id (cocoid or imgid)".to_string()))?;
        let image_ref = image
            .get("filename")
            .and_then(|v| v.as_str())
            .map(|s| s.to_string());
        let sentences = image
            .get("sentences")
            .and_then(|v| v.as_array())
            .ok_or_else(|| err("missing \"sentences\" array".to_string()))?;

        for (j, sentence) in sentences.iter().enumerate() {
            let raw = sentence
                .get("raw")
                .and_then(|v| v.as_str())
                .ok_or_else(|| err(format!("sentence {j} missing \"raw\" text")))?;
            let caption = normalize_whitespace(raw);
            if caption.is_empty() {
                return Err(err(format!("sentence {j} is empty")));
            }
            records.push(CaptionRecord {
                id: format!("{image_id}#{j}"),
                text: caption,
                image_ref: image_ref.clone(),
                split,
                domain_tag,
            });
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_lines_basics() {
        let records = parse_plain_lines("a dog\n\n  two  cats \n").unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].id, "1");
        assert_eq!(records[0].text, "a dog");
        assert_eq!(records[0].split, Split::Train);
        assert_eq!(records[1].id, "3");
        assert_eq!(records[1].text, "two cats");
    }

    #[test]
    fn plain_lines_empty_file() {
        assert!(parse_plain_lines("").unwrap().is_empty());
    }

    #[test]
    fn karpathy_layout_with_splits() {
        let json = r#"{
            "images": [
                {"cocoid": 10, "split": "train", "filename": "a.jpg",
                 "sentences": [{"raw": "A dog runs."}, {"raw": "Dog outside"}]},
                {"cocoid": 11, "split": "restval",
                 "sentences": [{"raw": "A cat sits."}]},
                {"imgid": 12, "split": "test", "domain": "near",
                 "sentences": [{"raw": "A bird flies."}]}
            ]
        }"#;
        let records = parse_karpathy_json(json).unwrap();
        assert_eq!(records.len(), 4);
        assert_eq!(records[0].id, "10#0");
        assert_eq!(records[0].image_ref.as_deref(), Some("a.jpg"));
        assert_eq!(records[0].split, Split::Train);
        assert_eq!(records[2].split, Split::Train);
        assert_eq!(records[3].split, Split::Test);
        assert_eq!(records[3].domain_tag, Some(DomainTag::Near));
    }

    #[test]
    fn karpathy_names_offending_image_index() {
        let json = r#"{"images": [
            {"cocoid": 1, "sentences": [{"raw": "ok"}]},
            {"cocoid": 2, "sentences": [{}]}
        ]}"#;
        let err = parse_karpathy_json(json).unwrap_err();
        match err {
            CoreError::Parse { index, .. } => assert_eq!(index, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn karpathy_rejects_unknown_split() {
        let json = r#"{"images": [{"cocoid": 1, "split": "dev", "sentences": [{"raw": "x"}]}]}"#;
        assert!(parse_karpathy_json(json).is_err());
    }

    #[test]
    fn records_preserve_source_order() {
        let json = r#"{"images": [
            {"cocoid": 5, "sentences": [{"raw": "first"}, {"raw": "second"}]},
            {"cocoid": 6, "sentences": [{"raw": "third"}]}
        ]}"#;
        let ids: Vec<String> = parse_karpathy_json(json)
            .unwrap()
            .into_iter()
            .map(|r| r.id)
            .collect();
        assert_eq!(ids, ["5#0", "5#1", "6#0"]);
    }
}
