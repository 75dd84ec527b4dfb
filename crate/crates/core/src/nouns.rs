//! Grounded-entity extraction: nouns in a caption that belong to an
//! entity vocabulary.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::pos::{lemmatize_noun, PosTag, PosTagger};
use crate::tokenizer::split_tokens;
use crate::vocab::{Entity, EntityVocabulary};

/// Nouns from `caption` that appear in `vocab`, lowercased and
/// lemmatized to singular, deduplicated in first-occurrence order.
/// Multi-word vocabulary names match contiguous token runs, longest
/// first, with the final (head) token required to be a noun.
pub fn extract_nouns(
    caption: &str,
    vocab: &EntityVocabulary,
    tagger: &dyn PosTagger,
) -> Vec<Entity> {
    let raw_tokens = split_tokens(caption);
    let tags = tagger.tag(&raw_tokens);
    let tokens: Vec<String> = raw_tokens.iter().map(|t| t.to_lowercase()).collect();

    let mut found: Vec<Entity> = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let push = |name: &str, seen: &mut BTreeSet<String>, found: &mut Vec<Entity>| {
        if seen.insert(String::from(name)) {
            found.push(Entity::new(name));
        }
    };

    let mut i = 0;
    while i < tokens.len() {
        let mut advanced = false;
        let max_span = vocab.max_name_words().min(tokens.len() - i);
        for span in (2..=max_span).rev() {
            let last = i + span - 1;
            if tags[last] != PosTag::Noun {
                continue;
            }
            let mut candidate = tokens[i..last].join(" ");
            candidate.push(' ');
            candidate.push_str(&lemmatize_noun(&tokens[last]));
            if vocab.contains(&candidate) {
                push(&candidate, &mut seen, &mut found);
                i += span;
                advanced = true;
                break;
            }
        }
        if advanced {
            continue;
        }
        if tags[i] == PosTag::Noun {
            let lemma = lemmatize_noun(&tokens[i]);
            if vocab.contains(&lemma) {
                push(&lemma, &mut seen, &mut found);
            }
        }
        i += 1;
    }
    found
}
