//! Fixed five-sentence corpus with scores frozen from an independent
//! reference scorer (tools/golden_metrics.py, run once). Shared by the
//! unit tests here and by the acceptance suite.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

pub const GOLDEN_BLEU1: f64 = 0.891891891868;
pub const GOLDEN_BLEU2: f64 = 0.646586671916;
pub const GOLDEN_BLEU3: f64 = 0.476792326724;
pub const GOLDEN_BLEU4: f64 = 0.348675623806;
pub const GOLDEN_CIDER: f64 = 2.293610592891;
pub const GOLDEN_TOLERANCE: f64 = 1e-4;

pub fn fixture_candidates() -> Vec<String> {
    vec![
        "a dog runs across the green field".to_string(),
        "two children are playing with a ball".to_string(),
        "a man rides a bicycle down the street".to_string(),
        "a cat sleeps".to_string(),
        "the red truck is parked near the old barn by the river".to_string(),
    ]
}

pub fn fixture_references() -> Vec<Vec<String>> {
    vec![
        vec![
            "a brown dog runs across a field".to_string(),
            "the dog sprints over the grass".to_string(),
        ],
        vec![
            "two kids play with a red ball".to_string(),
            "children playing ball outside".to_string(),
        ],
        vec![
            "a man rides a bicycle down a busy street".to_string(),
            "someone rides a bike along the road".to_string(),
        ],
        vec![
            "a cat sleeps on the warm sofa".to_string(),
            "the cat is napping".to_string(),
        ],
        vec![
            "a red truck parked near an old barn".to_string(),
            "the truck sits by the river barn".to_string(),
        ],
    ]
}
