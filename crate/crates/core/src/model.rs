//! The full captioner: projector and language model over one parameter
//! set, with the training loss built from prefix and caption rows.

use alloc::format;
use alloc::string::String;
use alloc::string::ToString;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::config::PromptOrder;
use crate::error::CoreError;
use crate::graph::NodeId;
use crate::lm::{Lm, LmConfig};
use crate::params::{ParamSet, Tape};
use crate::projector::{Projector, ProjectorConfig};
use crate::rng::Stream;
use crate::tensor::Matrix;
use crate::tokenizer::WordTokenizer;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub projector: ProjectorConfig,
    pub lm: LmConfig,
}

impl ModelConfig {
    pub fn full_scale(vocab_size: usize) -> Self {
        ModelConfig {
            projector: ProjectorConfig::full_scale(),
            lm: LmConfig::full_scale(vocab_size),
        }
    }

    /// Small shape for the bundled fixture corpus; trains in seconds.
    pub fn fixture(vocab_size: usize, encoder_dim: usize) -> Self {
        ModelConfig {
            projector: ProjectorConfig {
                layers: 2,
                heads: 2,
                hidden: 64,
                query_count: 4,
                input_dim: encoder_dim,
            },
            lm: LmConfig {
                vocab_size,
                d_model: 64,
                layers: 2,
                heads: 2,
                max_len: 64,
            },
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        self.projector.validate()?;
        self.lm.validate()?;
        if self.projector.hidden != self.lm.d_model {
            return Err(CoreError::Config(format!(
                "projector hidden size {} must match language model width {}",
                self.projector.hidden, self.lm.d_model
            )));
        }
        Ok(())
    }

    pub fn encoder_dim(&self) -> usize {
        self.projector.input_dim
    }
}

/// One caption made ready for the loss: its (possibly noised) text
/// embedding, the token ids of the rendered hard prompt, and the
/// caption token ids with the end marker appended.
#[derive(Clone, Debug)]
pub struct PreparedCaption {
    pub embedding: Vec<f64>,
    pub hard_ids: Vec<u32>,
    pub caption_ids: Vec<u32>,
}

pub struct CaptionerModel {
    pub cfg: ModelConfig,
    pub params: ParamSet,
    pub tokenizer: WordTokenizer,
    pub projector: Projector,
    pub lm: Lm,
}

impl CaptionerModel {
    pub fn init(cfg: ModelConfig, tokenizer: WordTokenizer, seed: u64) -> Result<Self, CoreError> {
        cfg.validate()?;
        if cfg.lm.vocab_size != tokenizer.vocab_size() {
            return Err(CoreError::Config(format!(
                "configured vocab size {} does not match tokenizer size {}",
                cfg.lm.vocab_size,
                tokenizer.vocab_size()
            )));
        }
        let mut ps = ParamSet::new();
        let mut rng = Stream::derive(seed, "params");
        let projector = Projector::init(&mut ps, cfg.projector, &mut rng);
        let lm = Lm::init(&mut ps, cfg.lm, &mut rng);
        Ok(CaptionerModel {
            cfg,
            params: ps,
            tokenizer,
            projector,
            lm,
        })
    }

    /// Rebuild a model from stored pieces: configuration, tokenizer
    /// word list, and named weight matrices. Every parameter the
    /// architecture declares must be present with its exact shape.
    pub fn from_parts(
        cfg: ModelConfig,
        words: &[String],
        mut weights: impl FnMut(&str) -> Option<Matrix>,
    ) -> Result<Self, CoreError> {
        if words.len() < 2 {
            return Err(CoreError::Config(
                "checkpoint word list is missing the reserved tokens".to_string(),
            ));
        }
        let tokenizer = WordTokenizer::from_words(words.to_vec());
        let mut model = Self::init(cfg, tokenizer, 0)?;
        let ids: Vec<crate::params::ParamId> = model.params.ids().collect();
        for id in ids {
            let name = model.params.name(id).to_string();
            let stored = weights(&name).ok_or_else(|| {
                CoreError::Config(format!("checkpoint is missing tensor {name}"))
            })?;
            let slot = model.params.value_mut(id);
            if stored.rows != slot.rows || stored.cols != slot.cols {
                return Err(CoreError::Shape(format!(
                    "tensor {name} has shape {}x{}, expected {}x{}",
                    stored.rows, stored.cols, slot.rows, slot.cols
                )));
            }
            *slot = stored;
        }
        Ok(model)
    }

    pub fn projector_param_ids(&self) -> Vec<crate::params::ParamId> {
        self.params.ids_with_prefix("projector.").collect()
    }

    pub fn lm_param_ids(&self) -> Vec<crate::params::ParamId> {
        self.params.ids_with_prefix("lm.").collect()
    }

    pub fn lm_checksum(&self) -> String {
        self.params.checksum_of(self.params.ids_with_prefix("lm."))
    }

    /// Soft prefix rows for one embedding, computed outside any loss
    /// graph. Used by generation, where the prefix is fixed per image.
    pub fn soft_prefix(&self, embedding: &[f64]) -> Result<Matrix, CoreError> {
        if embedding.len() != self.cfg.projector.input_dim {
            return Err(CoreError::InputMismatch(format!(
                "embedding has {} dimensions, the projector expects {}",
                embedding.len(),
                self.cfg.projector.input_dim
            )));
        }
        let mut t = Tape::new(&self.params);
        let e = t.input(Matrix::from_vec(1, embedding.len(), embedding.to_vec()));
        let soft = self.projector.forward(&mut t, e);
        Ok(t.g.value(soft).clone())
    }

    fn prefix_rows(
        &self,
        t: &mut Tape,
        soft: NodeId,
        hard_ids: &[u32],
        order: PromptOrder,
    ) -> NodeId {
        if hard_ids.is_empty() {
            return soft;
        }
        let hard = self.lm.embed(t, hard_ids);
        match order {
            PromptOrder::SoftThenHard => t.g.concat_rows(&[soft, hard]),
            PromptOrder::HardThenSoft => t.g.concat_rows(&[hard, soft]),
        }
    }

    /// Token-mean cross entropy for one caption under its prefix.
    /// The sequence is prefix rows followed by every caption token;
    /// logits are read one position early so each caption token is
    /// predicted from what precedes it.
    pub fn caption_loss_node(
        &self,
        t: &mut Tape,
        item: &PreparedCaption,
        order: PromptOrder,
    ) -> Result<NodeId, CoreError> {
        if item.caption_ids.is_empty() {
            return Err(CoreError::InputMismatch(
                "caption has no tokens to predict".to_string(),
            ));
        }
        if item.embedding.len() != self.cfg.projector.input_dim {
            return Err(CoreError::InputMismatch(format!(
                "embedding has {} dimensions, the projector expects {}",
                item.embedding.len(),
                self.cfg.projector.input_dim
            )));
        }
        let prefix_len = self.cfg.projector.query_count + item.hard_ids.len();
        let total = prefix_len + item.caption_ids.len();
        if total > self.cfg.lm.max_len {
            return Err(CoreError::InputMismatch(format!(
                "sequence of {total} rows exceeds the model maximum {}",
                self.cfg.lm.max_len
            )));
        }

        let e = t.input(Matrix::from_vec(
            1,
            item.embedding.len(),
            item.embedding.clone(),
        ));
        let soft = self.projector.forward(t, e);
        let prefix = self.prefix_rows(t, soft, &item.hard_ids, order);
        let caption = self.lm.embed(t, &item.caption_ids);
        let rows = t.g.concat_rows(&[prefix, caption]);
        let hidden = self.lm.forward_hidden(t, rows);
        let logits = self.lm.logits(t, hidden);
        let window = t
            .g
            .slice_rows(logits, prefix_len - 1, prefix_len - 1 + item.caption_ids.len());
        let targets: Vec<usize> = item.caption_ids.iter().map(|&i| i as usize).collect();
        Ok(t.g.mean_cross_entropy(window, &targets))
    }

    /// Mean of per-caption losses over a batch.
    pub fn batch_loss_node(
        &self,
        t: &mut Tape,
        items: &[PreparedCaption],
        order: PromptOrder,
    ) -> Result<NodeId, CoreError> {
        if items.is_empty() {
            return Err(CoreError::InputMismatch("empty batch".to_string()));
        }
        let mut losses = Vec::with_capacity(items.len());
        for item in items {
            losses.push(self.caption_loss_node(t, item, order)?);
        }
        Ok(t.g.mean_of(&losses))
    }

    /// Forward-only batch loss, for evaluation passes.
    pub fn batch_loss(
        &self,
        items: &[PreparedCaption],
        order: PromptOrder,
    ) -> Result<f64, CoreError> {
        let mut t = Tape::new(&self.params);
        let node = self.batch_loss_node(&mut t, items, order)?;
        Ok(t.g.scalar(node))
    }
}
