//! Caption generation: greedy and beam search over the trained model,
//! plus a bare decoder continuation used by the diagnostics.

use alloc::string::String;
use alloc::string::ToString;
use alloc::vec::Vec;

use crate::config::PromptOrder;
use crate::error::CoreError;
use crate::math;
use crate::model::CaptionerModel;
use crate::params::Tape;
use crate::tensor::Matrix;
use crate::tokenizer::EOS;

#[derive(Clone, Copy, Debug)]
pub struct GenerateOptions {
    pub beam_size: usize,
    pub max_tokens: usize,
    pub prompt_order: PromptOrder,
}

impl GenerateOptions {
    pub fn beam(beam_size: usize, prompt_order: PromptOrder) -> Self {
        GenerateOptions {
            beam_size,
            max_tokens: 64,
            prompt_order,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedCaption {
    pub token_ids: Vec<u32>,
    pub text: String,
    /// Mean log probability per emitted token, end marker included.
    pub score: f64,
    pub prefix_len: usize,
}

fn log_softmax_last_row(values: &Matrix) -> Vec<f64> {
    let last = values.row(values.rows - 1);
    let max = last.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = math::ln(last.iter().map(|&x| math::exp(x - max)).sum::<f64>()) + max;
    last.iter().map(|&x| x - lse).collect()
}

fn next_logprobs(
    model: &CaptionerModel,
    soft: &Matrix,
    hard_ids: &[u32],
    tokens: &[u32],
    order: PromptOrder,
) -> Vec<f64> {
    let mut t = Tape::new(&model.params);
    let soft_node = t.input(soft.clone());
    let mut parts = Vec::with_capacity(3);
    if hard_ids.is_empty() {
        parts.push(soft_node);
    } else {
        let hard = model.lm.embed(&mut t, hard_ids);
        match order {
            PromptOrder::SoftThenHard => {
                parts.push(soft_node);
                parts.push(hard);
            }
            PromptOrder::HardThenSoft => {
                parts.push(hard);
                parts.push(soft_node);
            }
        }
    }
    if !tokens.is_empty() {
        let toks = model.lm.embed(&mut t, tokens);
        parts.push(toks);
    }
    let rows = if parts.len() == 1 {
        parts[0]
    } else {
        t.g.concat_rows(&parts)
    };
    let hidden = model.lm.forward_hidden(&mut t, rows);
    let logits = model.lm.logits(&mut t, hidden);
    log_softmax_last_row(t.g.value(logits))
}

struct Candidate {
    parent: usize,
    token: u32,
    cum: f64,
}

struct Finished {
    tokens: Vec<u32>,
    cum: f64,
    gen_len: usize,
}

fn normalized(cum: f64, gen_len: usize) -> f64 {
    cum / gen_len as f64
}

fn search(
    model: &CaptionerModel,
    soft: &Matrix,
    hard_ids: &[u32],
    beam_size: usize,
    budget: usize,
    order: PromptOrder,
) -> (Vec<u32>, f64) {
    struct Beam {
        tokens: Vec<u32>,
        cum: f64,
    }
    let mut live = alloc::vec![Beam {
        tokens: Vec::new(),
        cum: 0.0,
    }];
    let mut finished: Vec<Finished> = Vec::new();

    for _ in 0..budget {
        if live.is_empty() || finished.len() >= beam_size {
            break;
        }
        let mut candidates: Vec<Candidate> = Vec::new();
        for (parent, beam) in live.iter().enumerate() {
            let lps = next_logprobs(model, soft, hard_ids, &beam.tokens, order);
            for (token, &lp) in lps.iter().enumerate() {
                candidates.push(Candidate {
                    parent,
                    token: token as u32,
                    cum: beam.cum + lp,
                });
            }
        }
        candidates.sort_by(|a, b| {
            b.cum
                .partial_cmp(&a.cum)
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(a.token.cmp(&b.token))
                .then(a.parent.cmp(&b.parent))
        });

        let mut next_live = Vec::with_capacity(beam_size);
        for cand in candidates.iter().take(2 * beam_size) {
            if next_live.len() == beam_size {
                break;
            }
            if cand.token == EOS {
                finished.push(Finished {
                    tokens: live[cand.parent].tokens.clone(),
                    cum: cand.cum,
                    gen_len: live[cand.parent].tokens.len() + 1,
                });
            } else {
                let mut tokens = live[cand.parent].tokens.clone();
                tokens.push(cand.token);
                next_live.push(Beam {
                    tokens,
                    cum: cand.cum,
                });
            }
        }
        live = next_live;
    }

    for beam in live {
        if !beam.tokens.is_empty() {
            let gen_len = beam.tokens.len();
            finished.push(Finished {
                tokens: beam.tokens,
                cum: beam.cum,
                gen_len,
            });
        }
    }

    let mut best: Option<Finished> = None;
    for f in finished {
        let better = match &best {
            None => true,
            Some(b) => {
                let (fs, bs) = (normalized(f.cum, f.gen_len), normalized(b.cum, b.gen_len));
                fs > bs
                    || (fs == bs && f.gen_len < b.gen_len)
                    || (fs == bs && f.gen_len == b.gen_len && f.tokens < b.tokens)
            }
        };
        if better {
            best = Some(f);
        }
    }
    let best = best.expect("search always yields at least one sequence");
    (best.tokens, normalized(best.cum, best.gen_len))
}

/// Generate one caption for an image embedding and rendered prompt ids.
/// Beam width 1 is exactly greedy; wider beams never score below the
/// greedy result under the shared length-normalized log probability.
pub fn generate(
    model: &CaptionerModel,
    embedding: &[f64],
    hard_ids: &[u32],
    opts: &GenerateOptions,
) -> Result<GeneratedCaption, CoreError> {
    if opts.beam_size == 0 {
        return Err(CoreError::Config("beam size must be at least 1".to_string()));
    }
    if opts.max_tokens == 0 {
        return Err(CoreError::Config("max_tokens must be at least 1".to_string()));
    }
    for &id in hard_ids {
        if (id as usize) >= model.cfg.lm.vocab_size {
            return Err(CoreError::InputMismatch(
                "prompt token id outside the vocabulary".to_string(),
            ));
        }
    }
    let soft = model.soft_prefix(embedding)?;
    let prefix_len = model.cfg.projector.query_count + hard_ids.len();
    if prefix_len >= model.cfg.lm.max_len {
        return Err(CoreError::InputMismatch(alloc::format!(
            "prefix of {prefix_len} rows leaves no room under the model maximum {}",
            model.cfg.lm.max_len
        )));
    }
    let budget = core::cmp::min(opts.max_tokens, model.cfg.lm.max_len - prefix_len);

    let (mut tokens, mut score) = search(
        model,
        &soft,
        hard_ids,
        opts.beam_size,
        budget,
        opts.prompt_order,
    );
    if opts.beam_size > 1 {
        let (greedy_tokens, greedy_score) =
            search(model, &soft, hard_ids, 1, budget, opts.prompt_order);
        if greedy_score > score {
            tokens = greedy_tokens;
            score = greedy_score;
        }
    }

    let text = model.tokenizer.decode(&tokens);
    Ok(GeneratedCaption {
        token_ids: tokens,
        text,
        score,
        prefix_len,
    })
}

/// Greedy continuation from bare token rows, no soft or hard prompt.
/// Returns only the newly generated ids, end marker excluded.
pub fn lm_continue(
    model: &CaptionerModel,
    prefix_ids: &[u32],
    max_tokens: usize,
) -> Result<Vec<u32>, CoreError> {
    if prefix_ids.is_empty() {
        return Err(CoreError::InputMismatch(
            "continuation needs at least one token".to_string(),
        ));
    }
    if prefix_ids.len() > model.cfg.lm.max_len {
        return Err(CoreError::InputMismatch(alloc::format!(
            "prefix of {} tokens exceeds the model maximum {}",
            prefix_ids.len(),
            model.cfg.lm.max_len
        )));
    }
    for &id in prefix_ids {
        if (id as usize) >= model.cfg.lm.vocab_size {
            return Err(CoreError::InputMismatch(
                "prefix token id outside the vocabulary".to_string(),
            ));
        }
    }
    let mut seq = prefix_ids.to_vec();
    let mut out = Vec::new();
    while out.len() < max_tokens && seq.len() <= model.cfg.lm.max_len {
        let mut t = Tape::new(&model.params);
        let rows = model.lm.embed(&mut t, &seq);
        let hidden = model.lm.forward_hidden(&mut t, rows);
        let logits = model.lm.logits(&mut t, hidden);
        let lps = log_softmax_last_row(t.g.value(logits));
        let mut best = 0usize;
        for (i, &lp) in lps.iter().enumerate() {
            if lp > lps[best] {
                best = i;
            }
        }
        if best as u32 == EOS {
            break;
        }
        out.push(best as u32);
        seq.push(best as u32);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::LmConfig;
    use crate::model::ModelConfig;
    use crate::projector::ProjectorConfig;
    use crate::tokenizer::WordTokenizer;

    fn tiny_model(seed: u64) -> CaptionerModel {
        let tokenizer = WordTokenizer::fit([
            "a dog chases a red ball",
            "a cat sits quietly",
            "there are dog, cat in the image.",
        ]);
        let cfg = ModelConfig {
            projector: ProjectorConfig {
                layers: 1,
                heads: 2,
                hidden: 16,
                query_count: 3,
                input_dim: 6,
            },
            lm: LmConfig {
                vocab_size: tokenizer.vocab_size(),
                d_model: 16,
                layers: 1,
                heads: 2,
                max_len: 24,
            },
        };
        CaptionerModel::init(cfg, tokenizer, seed).unwrap()
    }

    fn embedding() -> Vec<f64> {
        alloc::vec![0.3, -0.1, 0.25, 0.0, -0.45, 0.2]
    }

    #[test]
    fn greedy_matches_stepwise_argmax() {
        let model = tiny_model(3);
        let hard = model.tokenizer.encode("there are dog in the image.");
        let opts = GenerateOptions {
            beam_size: 1,
            max_tokens: 8,
            prompt_order: PromptOrder::SoftThenHard,
        };
        let got = generate(&model, &embedding(), &hard, &opts).unwrap();

        let soft = model.soft_prefix(&embedding()).unwrap();
        let mut tokens: Vec<u32> = Vec::new();
        for _ in 0..8 {
            let lps = next_logprobs(&model, &soft, &hard, &tokens, PromptOrder::SoftThenHard);
            let mut best = 0usize;
            for (i, &lp) in lps.iter().enumerate() {
                if lp > lps[best] {
                    best = i;
                }
            }
            if best as u32 == EOS {
                break;
            }
            tokens.push(best as u32);
        }
        assert_eq!(got.token_ids, tokens);
    }

    #[test]
    fn beam_never_scores_below_greedy() {
        for seed in [1u64, 2, 3, 4, 5] {
            let model = tiny_model(seed);
            let hard = model.tokenizer.encode("there are cat in the image.");
            let greedy = generate(
                &model,
                &embedding(),
                &hard,
                &GenerateOptions {
                    beam_size: 1,
                    max_tokens: 10,
                    prompt_order: PromptOrder::SoftThenHard,
                },
            )
            .unwrap();
            let beam = generate(
                &model,
                &embedding(),
                &hard,
                &GenerateOptions {
                    beam_size: 5,
                    max_tokens: 10,
                    prompt_order: PromptOrder::SoftThenHard,
                },
            )
            .unwrap();
            assert!(
                beam.score >= greedy.score,
                "seed {seed}: beam {} < greedy {}",
                beam.score,
                greedy.score
            );
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let model = tiny_model(9);
        let hard = model.tokenizer.encode("there are dog, cat in the image.");
        let opts = GenerateOptions {
            beam_size: 3,
            max_tokens: 10,
            prompt_order: PromptOrder::SoftThenHard,
        };
        let a = generate(&model, &embedding(), &hard, &opts).unwrap();
        let b = generate(&model, &embedding(), &hard, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_prompt_reports_bare_prefix_length() {
        let model = tiny_model(4);
        let opts = GenerateOptions {
            beam_size: 2,
            max_tokens: 5,
            prompt_order: PromptOrder::SoftThenHard,
        };
        let out = generate(&model, &embedding(), &[], &opts).unwrap();
        assert_eq!(out.prefix_len, model.cfg.projector.query_count);
        assert!(out.token_ids.len() <= 5);
    }

    #[test]
    fn output_respects_the_token_budget_and_max_len() {
        let model = tiny_model(6);
        let hard = model.tokenizer.encode("there are dog in the image.");
        let opts = GenerateOptions {
            beam_size: 2,
            max_tokens: 64,
            prompt_order: PromptOrder::SoftThenHard,
        };
        let out = generate(&model, &embedding(), &hard, &opts).unwrap();
        let budget = model.cfg.lm.max_len - out.prefix_len;
        assert!(out.token_ids.len() <= budget);
    }

    #[test]
    fn oversized_prefix_is_rejected() {
        let model = tiny_model(2);
        let hard: Vec<u32> = alloc::vec![2; 21];
        let opts = GenerateOptions {
            beam_size: 1,
            max_tokens: 5,
            prompt_order: PromptOrder::SoftThenHard,
        };
        assert!(generate(&model, &embedding(), &hard, &opts).is_err());
    }

    #[test]
    fn prompt_order_changes_generation_inputs() {
        let model = tiny_model(8);
        let hard = model.tokenizer.encode("there are dog in the image.");
        let soft = model.soft_prefix(&embedding()).unwrap();
        let a = next_logprobs(&model, &soft, &hard, &[], PromptOrder::SoftThenHard);
        let b = next_logprobs(&model, &soft, &hard, &[], PromptOrder::HardThenSoft);
        let diff: f64 = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y).abs())
            .sum();
        assert!(diff > 1e-9);
    }

    #[test]
    fn continuation_is_greedy_and_bounded() {
        let model = tiny_model(5);
        let prefix = model.tokenizer.encode("a dog");
        let cont = lm_continue(&model, &prefix, 6).unwrap();
        assert!(cont.len() <= 6);
        assert!(cont.iter().all(|&id| id != EOS));
        let again = lm_continue(&model, &prefix, 6).unwrap();
        assert_eq!(cont, again);
    }

    #[test]
    fn continuation_rejects_empty_prefix() {
        let model = tiny_model(5);
        assert!(lm_continue(&model, &[], 4).is_err());
    }

    #[test]
    fn decoded_text_roundtrips_token_ids() {
        let model = tiny_model(7);
        let out = generate(
            &model,
            &embedding(),
            &model.tokenizer.encode("there are cat in the image."),
            &GenerateOptions {
                beam_size: 2,
                max_tokens: 6,
                prompt_order: PromptOrder::SoftThenHard,
            },
        )
        .unwrap();
        assert_eq!(out.text, model.tokenizer.decode(&out.token_ids));
    }
}
