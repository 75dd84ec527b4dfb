//! Corpus-level BLEU with clipped counts and brevity penalty.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::CoreError;
use crate::math;

use super::{check_paired, ngram_counts, words};

/// BLEU@n over the whole corpus: clipped n-gram precision totals with
/// uniform weights 1/n, closest-reference-length brevity penalty (ties
/// go to the shorter reference). Any order with zero clipped matches
/// sends the score to exactly 0.
pub fn bleu(
    candidates: &[String],
    reference_sets: &[Vec<String>],
    n: usize,
) -> Result<f64, CoreError> {
    if !(1..=4).contains(&n) {
        return Err(CoreError::Config(alloc::format!(
            "BLEU order must be 1 to 4, got {n}"
        )));
    }
    check_paired(candidates.len(), reference_sets.len())?;
    for (i, refs) in reference_sets.iter().enumerate() {
        if refs.is_empty() {
            return Err(CoreError::InputMismatch(alloc::format!(
                "candidate {i} has no references"
            )));
        }
    }

    let mut clipped = alloc::vec![0usize; n];
    let mut guesses = alloc::vec![0usize; n];
    let mut cand_len = 0usize;
    let mut ref_len = 0usize;

    for (cand, refs) in candidates.iter().zip(reference_sets) {
        let cand_tokens = words(cand);
        cand_len += cand_tokens.len();

        let mut closest = words(&refs[0]).len();
        for r in refs {
            let rl = words(r).len();
            let better = (rl.abs_diff(cand_tokens.len()), rl)
                < (closest.abs_diff(cand_tokens.len()), closest);
            if better {
                closest = rl;
            }
        }
        ref_len += closest;

        for k in 1..=n {
            let cand_counts = ngram_counts(&cand_tokens, k);
            guesses[k - 1] += cand_tokens.len().saturating_sub(k - 1);
            for (gram, &count) in &cand_counts {
                let max_ref = refs
                    .iter()
                    .map(|r| {
                        ngram_counts(&words(r), k)
                            .get(gram)
                            .copied()
                            .unwrap_or(0)
                    })
                    .max()
                    .unwrap_or(0);
                clipped[k - 1] += count.min(max_ref);
            }
        }
    }

    let mut log_precision_sum = 0.0;
    for k in 0..n {
        if guesses[k] == 0 || clipped[k] == 0 {
            return Ok(0.0);
        }
        log_precision_sum += math::ln(clipped[k] as f64 / guesses[k] as f64);
    }
    if cand_len == 0 {
        return Ok(0.0);
    }
    let bp = if cand_len > ref_len {
        1.0
    } else {
        math::exp(1.0 - ref_len as f64 / cand_len as f64)
    };
    Ok(bp * math::exp(log_precision_sum / n as f64))
}
