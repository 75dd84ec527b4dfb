//! Learnable projector: maps one frozen encoder embedding to a soft
//! prompt of L vectors in the language model's embedding space.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::graph::NodeId;
use crate::layers::{init_weight, init_zeros, BlockParams};
use crate::params::{ParamId, ParamSet, Tape};
use crate::rng::Stream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectorConfig {
    pub layers: usize,
    pub heads: usize,
    pub hidden: usize,
    pub query_count: usize,
    pub input_dim: usize,
}

impl ProjectorConfig {
    /// The published architecture: 8 layers, 8 heads, width 768, 10
    /// queries over 512-dimensional encoder embeddings.
    pub fn full_scale() -> Self {
        ProjectorConfig {
            layers: 8,
            heads: 8,
            hidden: 768,
            query_count: 10,
            input_dim: 512,
        }
    }

    pub fn validate(&self) -> Result<(), crate::error::CoreError> {
        if self.layers == 0
            || self.heads == 0
            || self.hidden == 0
            || self.query_count == 0
            || self.input_dim == 0
        {
            return Err(crate::error::CoreError::Config(
                "projector dimensions must be positive".into(),
            ));
        }
        if self.hidden % self.heads != 0 {
            return Err(crate::error::CoreError::Config(format!(
                "projector width {} not divisible by {} heads",
                self.hidden, self.heads
            )));
        }
        Ok(())
    }
}

pub struct Projector {
    pub cfg: ProjectorConfig,
    in_w: ParamId,
    in_b: ParamId,
    queries: ParamId,
    blocks: Vec<BlockParams>,
    ln_f_gain: ParamId,
    ln_f_bias: ParamId,
}

impl Projector {
    pub fn init(ps: &mut ParamSet, cfg: ProjectorConfig, rng: &mut Stream) -> Self {
        cfg.validate().expect("projector config");
        let blocks = (0..cfg.layers)
            .map(|i| BlockParams::init(ps, &format!("projector.block{i}"), cfg.hidden, cfg.heads, rng))
            .collect();
        Projector {
            in_w: init_weight(ps, "projector.in.w", cfg.input_dim, cfg.hidden, rng),
            in_b: init_zeros(ps, "projector.in.b", 1, cfg.hidden),
            queries: init_weight(ps, "projector.queries", cfg.query_count, cfg.hidden, rng),
            blocks,
            ln_f_gain: crate::layers::init_ones(ps, "projector.ln_f.gain", cfg.hidden),
            ln_f_bias: init_zeros(ps, "projector.ln_f.bias", 1, cfg.hidden),
            cfg,
        }
    }

    /// Soft prompt for one embedding node (1 x input_dim): the projected
    /// embedding and the learnable queries attend to each other through
    /// non-causal blocks; the query rows come out as the prompt.
    pub fn forward(&self, t: &mut Tape, embedding: NodeId) -> NodeId {
        let value = t.g.value(embedding);
        assert!(
            value.rows == 1 && value.cols == self.cfg.input_dim,
            "embedding node is {}x{}, expected 1x{}",
            value.rows,
            value.cols,
            self.cfg.input_dim
        );
        let (in_w, in_b) = (t.param(self.in_w), t.param(self.in_b));
        let projected = t.g.matmul(embedding, in_w);
        let projected = t.g.add_bias(projected, in_b);
        let queries = t.param(self.queries);
        let mut x = t.g.concat_rows(&[projected, queries]);
        for block in &self.blocks {
            x = block.forward(t, x, false);
        }
        let (gain, bias) = (t.param(self.ln_f_gain), t.param(self.ln_f_bias));
        let x = t.g.layer_norm(x, gain, bias);
        t.g.slice_rows(x, 1, 1 + self.cfg.query_count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Matrix;

    fn tiny_cfg() -> ProjectorConfig {
        ProjectorConfig {
            layers: 2,
            heads: 2,
            hidden: 8,
            query_count: 3,
            input_dim: 6,
        }
    }

    #[test]
    fn output_shape_is_queries_by_hidden() {
        let mut ps = ParamSet::new();
        let mut rng = Stream::from_seed(1);
        let proj = Projector::init(&mut ps, tiny_cfg(), &mut rng);
        let mut t = Tape::new(&ps);
        let e = t.input(Matrix::from_vec(1, 6, rng.normal_vec(6, 1.0)));
        let soft = proj.forward(&mut t, e);
        assert_eq!(t.g.value(soft).rows, 3);
        assert_eq!(t.g.value(soft).cols, 8);
    }

    #[test]
    fn forward_is_deterministic() {
        let mut ps = ParamSet::new();
        let mut rng = Stream::from_seed(2);
        let proj = Projector::init(&mut ps, tiny_cfg(), &mut rng);
        let input = Matrix::from_vec(1, 6, rng.normal_vec(6, 1.0));
        let run = || {
            let mut t = Tape::new(&ps);
            let e = t.input(input.clone());
            let soft = proj.forward(&mut t, e);
            t.g.value(soft).clone()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn output_depends_on_the_embedding() {
        let mut ps = ParamSet::new();
        let mut rng = Stream::from_seed(3);
        let proj = Projector::init(&mut ps, tiny_cfg(), &mut rng);
        let a = Matrix::from_vec(1, 6, rng.normal_vec(6, 1.0));
        let b = Matrix::from_vec(1, 6, rng.normal_vec(6, 1.0));
        let run = |input: &Matrix| {
            let mut t = Tape::new(&ps);
            let e = t.input(input.clone());
            let soft = proj.forward(&mut t, e);
            t.g.value(soft).clone()
        };
        assert_ne!(run(&a), run(&b));
    }

    #[test]
    fn full_scale_config_shape() {
        let cfg = ProjectorConfig::full_scale();
        assert_eq!(cfg.layers, 8);
        assert_eq!(cfg.heads, 8);
        assert_eq!(cfg.hidden, 768);
        assert_eq!(cfg.query_count, 10);
        assert_eq!(cfg.input_dim, 512);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = tiny_cfg();
        cfg.hidden = 9;
        assert!(cfg.validate().is_err());
        let mut cfg = tiny_cfg();
        cfg.query_count = 0;
        assert!(cfg.validate().is_err());
    }
}
