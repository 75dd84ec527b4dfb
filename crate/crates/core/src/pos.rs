//! Part-of-speech tagging for noun extraction.
//!
//! The tagger is deliberately pluggable; the bundled default is a
//! lexicon-plus-suffix tagger tuned for caption-style English, where the
//! downstream vocabulary filter forgives over-tagging nouns.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PosTag {
    Noun,
    Verb,
    Adjective,
    Adverb,
    Determiner,
    Preposition,
    Pronoun,
    Conjunction,
    Number,
    Punctuation,
    Other,
}

pub trait PosTagger {
    /// One tag per token; tokens arrive as written, matching is
    /// case-insensitive.
    fn tag(&self, tokens: &[&str]) -> Vec<PosTag>;
}

const DETERMINERS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "some", "any", "no", "every", "each",
    "either", "neither", "both", "all", "such",
];

const PRONOUNS: &[&str] = &[
    "i", "me", "my", "mine", "myself", "you", "your", "yours", "yourself", "he", "him", "his",
    "himself", "she", "her", "hers", "herself", "it", "its", "itself", "we", "us", "our", "ours",
    "ourselves", "they", "them", "their", "theirs", "themselves", "who", "whom", "whose", "which",
    "what", "someone", "something", "anyone", "anything", "everyone", "everything",
];

const PREPOSITIONS: &[&str] = &[
    "in", "on", "at", "by", "with", "from", "to", "of", "for", "over", "under", "above", "below",
    "behind", "beside", "besides", "between", "through", "during", "near", "against", "across",
    "around", "down", "up", "off", "onto", "into", "upon", "within", "without", "along", "past",
    "toward", "towards", "inside", "outside", "next",
];

const CONJUNCTIONS: &[&str] = &[
    "and", "or", "but", "nor", "so", "yet", "while", "although", "because", "if", "when", "since",
    "than", "as", "whereas",
];

const VERB_FORMS: &[&str] = &[
    "is", "are", "was", "were", "be", "been", "being", "am", "has", "have", "had", "do", "does",
    "did", "can", "could", "will", "would", "shall", "should", "may", "might", "must", "lets",
    "let",
];

/// Verb stems whose -s/-es/-ed/-ing inflections should not be read as
/// nouns in caption text.
const VERB_STEMS: &[&str] = &[
    "chase", "run", "walk", "jump", "sit", "stand", "hold", "carry", "ride", "drive", "fly",
    "swim", "eat", "drink", "play", "look", "watch", "wear", "catch", "throw", "kick", "pull",
    "push", "climb", "sleep", "lie", "lay", "rest", "graze", "perch", "fetch", "bark", "smile",
    "laugh", "talk", "speak", "say", "go", "come", "move", "stay", "wait", "reach", "grab",
    "take", "give", "make", "get", "put", "use", "see", "show", "appear", "seem", "contain",
    "include", "feature",
];

const ADJECTIVES: &[&str] = &[
    "big", "small", "large", "little", "tall", "short", "long", "old", "young", "new", "red",
    "blue", "green", "yellow", "brown", "black", "white", "gray", "grey", "orange", "pink",
    "purple", "furry", "fluffy", "cute", "happy", "sad", "busy", "empty", "full", "open",
    "closed", "wooden", "metal", "plastic", "colorful", "bright", "dark", "sunny", "cloudy",
    "wet", "dry", "dirty", "clean", "several", "many", "few", "other", "another", "same",
    "different", "various",
];

pub struct LexiconTagger;

impl LexiconTagger {
    pub fn new() -> Self {
        LexiconTagger
    }

    fn tag_word(&self, lower: &str) -> PosTag {
        if lower.chars().all(|c| !c.is_alphanumeric()) {
            return PosTag::Punctuation;
        }
        if lower.chars().all(|c| c.is_ascii_digit()) {
            return PosTag::Number;
        }
        if DETERMINERS.contains(&lower) {
            return PosTag::Determiner;
        }
        if PRONOUNS.contains(&lower) {
            return PosTag::Pronoun;
        }
        if PREPOSITIONS.contains(&lower) {
            return PosTag::Preposition;
        }
        if CONJUNCTIONS.contains(&lower) {
            return PosTag::Conjunction;
        }
        if VERB_FORMS.contains(&lower) || VERB_STEMS.contains(&lower) {
            return PosTag::Verb;
        }
        if is_verb_inflection(lower) {
            return PosTag::Verb;
        }
        if ADJECTIVES.contains(&lower) {
            return PosTag::Adjective;
        }
        if lower.len() > 3 && lower.ends_with("ly") {
            return PosTag::Adverb;
        }
        if lower.len() > 4 && (lower.ends_with("ing") || lower.ends_with("ed")) {
            return PosTag::Verb;
        }
        PosTag::Noun
    }
}

impl Default for LexiconTagger {
    fn default() -> Self {
        LexiconTagger::new()
    }
}

impl PosTagger for LexiconTagger {
    fn tag(&self, tokens: &[&str]) -> Vec<PosTag> {
        tokens
            .iter()
            .map(|t| self.tag_word(&t.to_lowercase()))
            .collect()
    }
}

/// Whether the word reads as a regular -s/-es/-ed/-ing inflection of a
/// known verb stem, allowing for dropped final e and doubled consonants.
fn is_verb_inflection(word: &str) -> bool {
    for suffix in ["ing", "ed", "es", "s"] {
        let Some(stem) = word.strip_suffix(suffix) else {
            continue;
        };
        if stem.len() < 2 {
            continue;
        }
        if VERB_STEMS.contains(&stem) {
            return true;
        }
        let mut restored = stem.to_string();
        restored.push('e');
        if VERB_STEMS.contains(&restored.as_str()) {
            return true;
        }
        let bytes = stem.as_bytes();
        if bytes.len() >= 2 && bytes[bytes.len() - 1] == bytes[bytes.len() - 2] {
            if VERB_STEMS.contains(&&stem[..stem.len() - 1]) {
                return true;
            }
        }
    }
    false
}

/// Singular lowercase lemma of a noun token.
pub fn lemmatize_noun(word: &str) -> String {
    let lower = word.to_lowercase();
    const IRREGULAR: &[(&str, &str)] = &[
        ("men", "man"),
        ("women", "woman"),
        ("children", "child"),
        ("people", "person"),
        ("feet", "foot"),
        ("teeth", "tooth"),
        ("geese", "goose"),
        ("mice", "mouse"),
        ("oxen", "ox"),
        ("sheep", "sheep"),
        ("buses", "bus"),
        ("gases", "gas"),
        ("wolves", "wolf"),
        ("leaves", "leaf"),
        ("shelves", "shelf"),
        ("knives", "knife"),
        ("wives", "wife"),
        ("lives", "life"),
        ("calves", "calf"),
        ("halves", "half"),
        ("loaves", "loaf"),
        ("thieves", "thief"),
        ("scarves", "scarf"),
        ("elves", "elf"),
        ("hooves", "hoof"),
        ("scissors", "scissors"),
        ("pants", "pants"),
        ("shorts", "shorts"),
        ("jeans", "jeans"),
    ];
    for (plural, singular) in IRREGULAR {
        if lower == *plural {
            return (*singular).to_string();
        }
    }
    if lower.len() > 4 && lower.ends_with("ies") {
        return format_replace(&lower, 3, "y");
    }
    for suffix in ["sses", "xes", "ches", "shes", "zes", "oes"] {
        if lower.ends_with(suffix) && lower.len() > suffix.len() {
            return format_replace(&lower, 2, "");
        }
    }
    if lower.ends_with('s')
        && !lower.ends_with("ss")
        && !lower.ends_with("us")
        && !(lower.ends_with("is") && lower.len() > 4)
        && lower.len() > 2
    {
        return format_replace(&lower, 1, "");
    }
    lower
}

fn format_replace(word: &str, strip: usize, append: &str) -> String {
    let mut out = word[..word.len() - strip].to_string();
    out.push_str(append);
    out
}
