//! Decoder-only causal language model with tied input/output embeddings.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::graph::NodeId;
use crate::layers::{init_ones, init_weight, init_zeros, BlockParams};
use crate::params::{ParamId, ParamSet, Tape};
use crate::rng::Stream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LmConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub layers: usize,
    pub heads: usize,
    pub max_len: usize,
}

impl LmConfig {
    /// The published decoder size (GPT-2 base shape); vocabulary size
    /// comes from the fitted tokenizer.
    pub fn full_scale(vocab_size: usize) -> Self {
        LmConfig {
            vocab_size,
            d_model: 768,
            layers: 12,
            heads: 12,
            max_len: 128,
        }
    }

    pub fn validate(&self) -> Result<(), crate::error::CoreError> {
        if self.vocab_size < 2 {
            return Err(crate::error::CoreError::Config(
                "vocabulary needs at least the reserved tokens".into(),
            ));
        }
        if self.d_model == 0 || self.layers == 0 || self.heads == 0 || self.max_len == 0 {
            return Err(crate::error::CoreError::Config(
                "language model dimensions must be positive".into(),
            ));
        }
        if self.d_model % self.heads != 0 {
            return Err(crate::error::CoreError::Config(format!(
                "model width {} not divisible by {} heads",
                self.d_model, self.heads
            )));
        }
        Ok(())
    }
}

pub struct Lm {
    pub cfg: LmConfig,
    tok_emb: ParamId,
    pos_emb: ParamId,
    blocks: Vec<BlockParams>,
    ln_f_gain: ParamId,
    ln_f_bias: ParamId,
}

impl Lm {
    pub fn init(ps: &mut ParamSet, cfg: LmConfig, rng: &mut Stream) -> Self {
        cfg.validate().expect("language model config");
        let tok_emb = init_weight(ps, "lm.tok_emb", cfg.vocab_size, cfg.d_model, rng);
        let pos_emb = init_weight(ps, "lm.pos_emb", cfg.max_len, cfg.d_model, rng);
        let blocks = (0..cfg.layers)
            .map(|i| BlockParams::init(ps, &format!("lm.block{i}"), cfg.d_model, cfg.heads, rng))
            .collect();
        Lm {
            tok_emb,
            pos_emb,
            blocks,
            ln_f_gain: init_ones(ps, "lm.ln_f.gain", cfg.d_model),
            ln_f_bias: init_zeros(ps, "lm.ln_f.bias", 1, cfg.d_model),
            cfg,
        }
    }

    /// Rows of the input-embedding table for a token sequence. May be
    /// zero rows for an empty sequence.
    pub fn embed(&self, t: &mut Tape, ids: &[u32]) -> NodeId {
        let table = t.param(self.tok_emb);
        let ids: Vec<usize> = ids.iter().map(|&i| i as usize).collect();
        t.g.gather_rows(table, &ids)
    }

    /// Hidden states after the causal blocks and final norm. Input rows
    /// are already-embedded vectors (soft prompt, hard prompt, caption);
    /// learned positional embeddings are added here.
    pub fn forward_hidden(&self, t: &mut Tape, rows: NodeId) -> NodeId {
        let len = t.g.value(rows).rows;
        assert!(len > 0, "language model input is empty");
        assert!(
            len <= self.cfg.max_len,
            "sequence length {len} exceeds the model maximum {}",
            self.cfg.max_len
        );
        let pos_table = t.param(self.pos_emb);
        let positions: Vec<usize> = (0..len).collect();
        let pos = t.g.gather_rows(pos_table, &positions);
        let mut x = t.g.add(rows, pos);
        for block in &self.blocks {
            x = block.forward(t, x, true);
        }
        let (gain, bias) = (t.param(self.ln_f_gain), t.param(self.ln_f_bias));
        t.g.layer_norm(x, gain, bias)
    }

    /// Next-token logits for every position: hidden states against the
    /// tied embedding table.
    pub fn logits(&self, t: &mut Tape, hidden: NodeId) -> NodeId {
        let table = t.param(self.tok_emb);
        t.g.matmul_nt(hidden, table)
    }
}
