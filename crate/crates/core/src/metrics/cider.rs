//! CIDEr-D: consensus-based scoring with tf-idf n-gram vectors, a
//! length-difference Gaussian penalty, and the times-ten scale. The
//! arithmetic follows the reference scorer exactly, including its
//! convention that sentence length is counted in bigrams.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::CoreError;
use crate::math;

use super::{check_paired, ngram_counts, words};

const MAX_N: usize = 4;
const SIGMA: f64 = 6.0;

struct SentenceVec {
    tfidf: [BTreeMap<String, f64>; MAX_N],
    norm: [f64; MAX_N],
    length: f64,
}

fn counts_per_order(text: &str) -> [BTreeMap<String, usize>; MAX_N] {
    let tokens = words(text);
    core::array::from_fn(|k| ngram_counts(&tokens, k + 1))
}

fn to_vec(
    counts: &[BTreeMap<String, usize>; MAX_N],
    df: &BTreeMap<String, f64>,
    ref_len: f64,
) -> SentenceVec {
    let mut tfidf: [BTreeMap<String, f64>; MAX_N] = Default::default();
    let mut norm = [0.0; MAX_N];
    let mut length = 0.0;
    for k in 0..MAX_N {
        for (gram, &tf) in &counts[k] {
            let doc_freq = df.get(gram).copied().unwrap_or(0.0);
            let weight = tf as f64 * (ref_len - math::ln(math::fmax(1.0, doc_freq)));
            norm[k] += weight * weight;
            tfidf[k].insert(gram.clone(), weight);
            if k == 1 {
                length += tf as f64;
            }
        }
        norm[k] = math::sqrt(norm[k]);
    }
    SentenceVec {
        tfidf,
        norm,
        length,
    }
}

fn similarity(hyp: &SentenceVec, reference: &SentenceVec) -> [f64; MAX_N] {
    let delta = hyp.length - reference.length;
    let penalty = math::exp(-(delta * delta) / (2.0 * SIGMA * SIGMA));
    let mut val = [0.0; MAX_N];
    for k in 0..MAX_N {
        for (gram, &h) in &hyp.tfidf[k] {
            if let Some(&r) = reference.tfidf[k].get(gram) {
                val[k] += math::fmin(h, r) * r;
            }
        }
        if hyp.norm[k] != 0.0 && reference.norm[k] != 0.0 {
            val[k] /= hyp.norm[k] * reference.norm[k];
        }
        val[k] *= penalty;
    }
    val
}

/// Corpus CIDEr-D: mean over items of the per-item score, where each
/// item averages its per-reference tf-idf cosines over n = 1..4,
/// divides by the reference count, and scales by 10.
pub fn cider(candidates: &[String], reference_sets: &[Vec<String>]) -> Result<f64, CoreError> {
    check_paired(candidates.len(), reference_sets.len())?;
    if candidates.len() < 2 {
        return Err(CoreError::InputMismatch(
            "consensus statistics need at least two items".into(),
        ));
    }
    for (i, refs) in reference_sets.iter().enumerate() {
        if refs.is_empty() {
            return Err(CoreError::InputMismatch(alloc::format!(
                "candidate {i} has no references"
            )));
        }
    }

    let mut df: BTreeMap<String, f64> = BTreeMap::new();
    for refs in reference_sets {
        let mut seen: BTreeMap<&String, ()> = BTreeMap::new();
        let counted: Vec<[BTreeMap<String, usize>; MAX_N]> =
            refs.iter().map(|r| counts_per_order(r)).collect();
        let mut unique: Vec<&String> = Vec::new();
        for counts in &counted {
            for order in counts {
                for gram in order.keys() {
                    if seen.insert(gram, ()).is_none() {
                        unique.push(gram);
                    }
                }
            }
        }
        for gram in unique {
            *df.entry(gram.clone()).or_insert(0.0) += 1.0;
        }
    }
    let ref_len = math::ln(candidates.len() as f64);

    let mut total = 0.0;
    for (cand, refs) in candidates.iter().zip(reference_sets) {
        let hyp = to_vec(&counts_per_order(cand), &df, ref_len);
        let mut acc = [0.0; MAX_N];
        for r in refs {
            let rv = to_vec(&counts_per_order(r), &df, ref_len);
            let val = similarity(&hyp, &rv);
            for k in 0..MAX_N {
                acc[k] += val[k];
            }
        }
        let mean_over_n = acc.iter().sum::<f64>() / MAX_N as f64;
        total += mean_over_n / refs.len() as f64 * 10.0;
    }
    Ok(total / candidates.len() as f64)
}
