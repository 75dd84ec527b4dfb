//! Entity vocabularies: the class-name lists that ground both noun
//! extraction and retrieval.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::CoreError;
use crate::rng::sha256_hex;

#[derive(Clone, Debug, PartialEq)]
pub struct Entity {
    pub name: String,
    pub score: Option<f64>,
}

impl Entity {
    pub fn new(name: &str) -> Self {
        Entity {
            name: name.to_string(),
            score: None,
        }
    }

    pub fn scored(name: &str, score: f64) -> Self {
        Entity {
            name: name.to_string(),
            score: Some(score),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EntityVocabulary {
    names: Vec<String>,
    index: BTreeMap<String, usize>,
    source_label: String,
    max_name_words: usize,
}

impl EntityVocabulary {
    /// Lowercases, trims, optionally drops multi-word names, and
    /// deduplicates keeping the first occurrence.
    pub fn from_names<I, S>(
        names: I,
        single_word_only: bool,
        source_label: &str,
    ) -> Result<Self, CoreError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut kept = Vec::new();
        let mut index = BTreeMap::new();
        let mut max_name_words = 1;
        for raw in names {
            let name = raw.as_ref().trim().to_lowercase();
            if name.is_empty() {
                continue;
            }
            let word_count = name.split_whitespace().count();
            if single_word_only && word_count > 1 {
                continue;
            }
            if index.contains_key(&name) {
                continue;
            }
            index.insert(name.clone(), kept.len());
            kept.push(name);
            max_name_words = max_name_words.max(word_count);
        }
        if kept.is_empty() {
            return Err(CoreError::Config(
                "entity vocabulary is empty after filtering".to_string(),
            ));
        }
        Ok(EntityVocabulary {
            names: kept,
            index,
            source_label: source_label.to_string(),
            max_name_words,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn source_label(&self) -> &str {
        &self.source_label
    }

    /// Longest name measured in whitespace-separated words; bounds the
    /// window for multi-word matching during noun extraction.
    pub fn max_name_words(&self) -> usize {
        self.max_name_words
    }

    /// Digest of the name list, used to pair cached embeddings and
    /// checkpoints with the exact vocabulary they were built from.
    pub fn checksum(&self) -> String {
        let joined = self.names.join("\n");
        sha256_hex(joined.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_word_filter_and_dedup() {
        let v =
            EntityVocabulary::from_names(["Dog", "dog", "traffic light"], true, "test").unwrap();
        assert_eq!(v.names(), &["dog".to_string()]);
        assert_eq!(v.len(), 1);
    }

    #[test]
    fn multi_word_names_kept_without_filter() {
        let v =
            EntityVocabulary::from_names(["Dog", "dog", "traffic light"], false, "test").unwrap();
        assert_eq!(v.names(), &["dog".to_string(), "traffic light".to_string()]);
        assert_eq!(v.max_name_words(), 2);
    }

    #[test]
    fn empty_vocabulary_is_an_error() {
        let err = EntityVocabulary::from_names(Vec::<&str>::new(), false, "test").unwrap_err();
        assert!(matches!(err, CoreError::Config(_)));
    }

    #[test]
    fn loading_own_output_is_idempotent() {
        let v = EntityVocabulary::from_names(["Cat", "dog house", "Bird"], false, "test").unwrap();
        let again = EntityVocabulary::from_names(v.names(), false, "test").unwrap();
        assert_eq!(v.names(), again.names());
        assert_eq!(v.checksum(), again.checksum());
    }

    #[test]
    fn first_occurrence_wins() {
        let v = EntityVocabulary::from_names(["zebra", "ant", "Zebra"], false, "test").unwrap();
        assert_eq!(v.names(), &["zebra".to_string(), "ant".to_string()]);
        assert_eq!(v.position("zebra"), Some(0));
        assert_eq!(v.position("ant"), Some(1));
    }

    #[test]
    fn checksum_tracks_content() {
        let a = EntityVocabulary::from_names(["dog"], false, "a").unwrap();
        let b = EntityVocabulary::from_names(["cat"], false, "a").unwrap();
        assert_ne!(a.checksum(), b.checksum());
    }
}
