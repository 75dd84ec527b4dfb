//! Word-level tokenizer for the caption decoder.
//!
//! Ids 0 and 1 are reserved for the unknown and end-of-sequence tokens;
//! the remaining vocabulary is sorted, so a tokenizer is fully determined
//! by the set of texts it was fitted on.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

pub const UNK: u32 = 0;
pub const EOS: u32 = 1;

const UNK_TOKEN: &str = "<unk>";
const EOS_TOKEN: &str = "<eos>";

/// Characters that never take a space before them when detokenizing.
const NO_SPACE_BEFORE: &str = ".,!?;:%)]}'";
const NO_SPACE_AFTER: &str = "([{";

#[derive(Clone, Debug)]
pub struct WordTokenizer {
    words: Vec<String>,
    index: BTreeMap<String, u32>,
}

/// Split into lowercase-insensitive word units: runs of alphanumerics
/// (apostrophes allowed inside), with every other non-space character a
/// one-character token.
pub fn split_tokens(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() || c == '\'' {
            if start.is_none() {
                start = Some(i);
            }
            continue;
        }
        if let Some(s) = start.take() {
            out.push(&text[s..i]);
        }
        if !c.is_whitespace() {
            out.push(&text[i..i + c.len_utf8()]);
        }
    }
    if let Some(s) = start {
        out.push(&text[s..]);
    }
    out
}

impl WordTokenizer {
    pub fn fit<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut set = BTreeSet::new();
        for text in texts {
            for token in split_tokens(text) {
                set.insert(token.to_string());
            }
        }
        let mut words = Vec::with_capacity(set.len() + 2);
        words.push(UNK_TOKEN.to_string());
        words.push(EOS_TOKEN.to_string());
        words.extend(set);
        Self::from_words(words)
    }

    /// Rebuild from a serialized word list (checkpoint round-trip).
    pub fn from_words(words: Vec<String>) -> Self {
        assert!(words.len() >= 2, "word list missing reserved tokens");
        assert_eq!(words[0], UNK_TOKEN);
        assert_eq!(words[1], EOS_TOKEN);
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        WordTokenizer { words, index }
    }

    pub fn vocab_size(&self) -> usize {
        self.words.len()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn id_of(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    /// Token ids without an end-of-sequence marker; unknown words map to
    /// the reserved unknown id.
    pub fn encode(&self, text: &str) -> Vec<u32> {
        split_tokens(text)
            .into_iter()
            .map(|t| self.id_of(t).unwrap_or(UNK))
            .collect()
    }

    pub fn decode(&self, ids: &[u32]) -> String {
        let mut out = String::new();
        let mut suppress_space = true;
        for &id in ids {
            if id == EOS {
                continue;
            }
            let word = self.token(id);
            let glue_left = word.chars().count() == 1
                && word.chars().next().is_some_and(|c| NO_SPACE_BEFORE.contains(c));
            if !suppress_space && !glue_left {
                out.push(' ');
            }
            out.push_str(word);
            suppress_space = word.chars().count() == 1
                && word.chars().next().is_some_and(|c| NO_SPACE_AFTER.contains(c));
        }
        out
    }
}
