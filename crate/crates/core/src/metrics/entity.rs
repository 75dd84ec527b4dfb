//! Precision of vocabulary entities mentioned by generated captions.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::nouns::extract_nouns;
use crate::pos::PosTagger;
use crate::vocab::EntityVocabulary;

use super::check_paired;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityPrecision {
    pub correct: usize,
    pub extracted: usize,
}

impl EntityPrecision {
    /// Micro-averaged precision; a corpus that surfaced no entities at
    /// all counts as zero rather than undefined.
    pub fn value(&self) -> f64 {
        if self.extracted == 0 {
            0.0
        } else {
            self.correct as f64 / self.extracted as f64
        }
    }
}

/// Count, over all captions, how many extracted entities appear in the
/// caption's gold set. Extraction reuses the training-time noun path,
/// so each distinct entity counts once per caption.
pub fn entity_precision(
    captions: &[String],
    gold_entity_sets: &[Vec<String>],
    vocab: &EntityVocabulary,
    tagger: &dyn PosTagger,
) -> Result<EntityPrecision, CoreError> {
    check_paired(captions.len(), gold_entity_sets.len())?;
    let mut correct = 0usize;
    let mut extracted = 0usize;
    for (caption, gold) in captions.iter().zip(gold_entity_sets) {
        let gold_lower: Vec<String> = gold.iter().map(|g| g.to_lowercase()).collect();
        for entity in extract_nouns(caption, vocab, tagger) {
            extracted += 1;
            if gold_lower.iter().any(|g| g == &entity.name) {
                correct += 1;
            }
        }
    }
    Ok(EntityPrecision { correct, extracted })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pos::LexiconTagger;
    use alloc::string::ToString;
    use alloc::vec;

    fn vocab() -> EntityVocabulary {
        EntityVocabulary::from_names(
            ["dog", "cat", "ball", "tree", "car"],
            true,
            "test",
        )
        .unwrap()
    }

    fn run(captions: &[&str], golds: &[Vec<&str>]) -> EntityPrecision {
        let caps: Vec<String> = captions.iter().map(|c| c.to_string()).collect();
        let golds: Vec<Vec<String>> = golds
            .iter()
            .map(|g| g.iter().map(|s| s.to_string()).collect())
            .collect();
        entity_precision(&caps, &golds, &vocab(), &LexiconTagger::new()).unwrap()
    }

    #[test]
    fn all_entities_in_gold_scores_one() {
        let p = run(
            &["a dog chases a ball", "a cat in a tree"],
            &[vec!["dog", "ball"], vec!["cat", "tree", "car"]],
        );
        assert_eq!(p.value(), 1.0);
        assert_eq!(p.correct, 4);
        assert_eq!(p.extracted, 4);
    }

    #[test]
    fn no_overlap_scores_zero() {
        let p = run(&["a dog runs"], &[vec!["cat"]]);
        assert_eq!(p.value(), 0.0);
        assert_eq!(p.extracted, 1);
    }

    #[test]
    fn hand_counted_fixture() {
        let p = run(
            &[
                "a dog chases a ball",
                "a cat sleeps",
                "a car near a tree",
                "the sky today",
            ],
            &[
                vec!["dog"],
                vec!["cat"],
                vec!["tree"],
                vec!["dog"],
            ],
        );
        assert_eq!(p.extracted, 5);
        assert_eq!(p.correct, 3);
        assert!((p.value() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn captions_without_entities_contribute_nothing() {
        let p = run(
            &["the sky above", "a dog barks"],
            &[vec!["dog"], vec!["dog"]],
        );
        assert_eq!(p.extracted, 1);
        assert_eq!(p.correct, 1);
        assert_eq!(p.value(), 1.0);
    }

    #[test]
    fn empty_extraction_everywhere_is_zero_not_undefined() {
        let p = run(&["running and jumping"], &[vec!["dog"]]);
        assert_eq!(p.extracted, 0);
        assert_eq!(p.value(), 0.0);
    }

    #[test]
    fn duplicate_mentions_count_once() {
        let p = run(&["a dog and a dog and a dog"], &[vec!["dog"]]);
        assert_eq!(p.extracted, 1);
        assert_eq!(p.correct, 1);
    }

    #[test]
    fn gold_matching_is_case_insensitive() {
        let caps = vec!["a dog runs".to_string()];
        let golds = vec![vec!["Dog".to_string()]];
        let p = entity_precision(&caps, &golds, &vocab(), &LexiconTagger::new()).unwrap();
        assert_eq!(p.correct, 1);
    }

    #[test]
    fn mismatched_lengths_error() {
        let caps = vec!["a dog".to_string()];
        assert!(entity_precision(&caps, &[], &vocab(), &LexiconTagger::new()).is_err());
    }
}
