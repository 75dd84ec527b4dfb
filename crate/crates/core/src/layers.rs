//! Pre-norm transformer blocks used by both the projector and the
//! language model.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::graph::NodeId;
use crate::math;
use crate::params::{ParamId, ParamSet, Tape};
use crate::rng::Stream;
use crate::tensor::Matrix;

const INIT_STD: f64 = 0.02;

pub fn init_weight(ps: &mut ParamSet, name: &str, rows: usize, cols: usize, rng: &mut Stream) -> ParamId {
    ps.add(name, Matrix::from_vec(rows, cols, rng.normal_vec(rows * cols, INIT_STD)))
}

pub fn init_zeros(ps: &mut ParamSet, name: &str, rows: usize, cols: usize) -> ParamId {
    ps.add(name, Matrix::zeros(rows, cols))
}

pub fn init_ones(ps: &mut ParamSet, name: &str, cols: usize) -> ParamId {
    let mut m = Matrix::zeros(1, cols);
    for v in &mut m.data {
        *v = 1.0;
    }
    ps.add(name, m)
}

struct Head {
    wq: ParamId,
    bq: ParamId,
    wk: ParamId,
    bk: ParamId,
    wv: ParamId,
    bv: ParamId,
    wo: ParamId,
}

pub struct BlockParams {
    ln1_gain: ParamId,
    ln1_bias: ParamId,
    heads: Vec<Head>,
    attn_bias: ParamId,
    ln2_gain: ParamId,
    ln2_bias: ParamId,
    mlp_w1: ParamId,
    mlp_b1: ParamId,
    mlp_w2: ParamId,
    mlp_b2: ParamId,
    head_dim: usize,
}

impl BlockParams {
    pub fn init(ps: &mut ParamSet, prefix: &str, d_model: usize, heads: usize, rng: &mut Stream) -> Self {
        assert!(heads > 0 && d_model % heads == 0, "head count must divide the model width");
        let head_dim = d_model / heads;
        let name = |suffix: &str| -> String { format!("{prefix}.{suffix}") };
        let head_params = (0..heads)
            .map(|h| Head {
                wq: init_weight(ps, &name(&format!("attn.h{h}.wq")), d_model, head_dim, rng),
                bq: init_zeros(ps, &name(&format!("attn.h{h}.bq")), 1, head_dim),
                wk: init_weight(ps, &name(&format!("attn.h{h}.wk")), d_model, head_dim, rng),
                bk: init_zeros(ps, &name(&format!("attn.h{h}.bk")), 1, head_dim),
                wv: init_weight(ps, &name(&format!("attn.h{h}.wv")), d_model, head_dim, rng),
                bv: init_zeros(ps, &name(&format!("attn.h{h}.bv")), 1, head_dim),
                wo: init_weight(ps, &name(&format!("attn.h{h}.wo")), head_dim, d_model, rng),
            })
            .collect();
        BlockParams {
            ln1_gain: init_ones(ps, &name("ln1.gain"), d_model),
            ln1_bias: init_zeros(ps, &name("ln1.bias"), 1, d_model),
            heads: head_params,
            attn_bias: init_zeros(ps, &name("attn.bias"), 1, d_model),
            ln2_gain: init_ones(ps, &name("ln2.gain"), d_model),
            ln2_bias: init_zeros(ps, &name("ln2.bias"), 1, d_model),
            mlp_w1: init_weight(ps, &name("mlp.w1"), d_model, 4 * d_model, rng),
            mlp_b1: init_zeros(ps, &name("mlp.b1"), 1, 4 * d_model),
            mlp_w2: init_weight(ps, &name("mlp.w2"), 4 * d_model, d_model, rng),
            mlp_b2: init_zeros(ps, &name("mlp.b2"), 1, d_model),
            head_dim,
        }
    }

    fn attention(&self, t: &mut Tape, x: NodeId, causal: bool) -> NodeId {
        let scale = 1.0 / math::sqrt(self.head_dim as f64);
        let mut acc: Option<NodeId> = None;
        for head in &self.heads {
            let (wq, bq) = (t.param(head.wq), t.param(head.bq));
            let (wk, bk) = (t.param(head.wk), t.param(head.bk));
            let (wv, bv) = (t.param(head.wv), t.param(head.bv));
            let wo = t.param(head.wo);
            let q = t.g.matmul(x, wq);
            let q = t.g.add_bias(q, bq);
            let k = t.g.matmul(x, wk);
            let k = t.g.add_bias(k, bk);
            let v = t.g.matmul(x, wv);
            let v = t.g.add_bias(v, bv);
            let scores = t.g.matmul_nt(q, k);
            let scores = t.g.scale(scores, scale);
            let attn = t.g.softmax_rows(scores, causal);
            let ctx = t.g.matmul(attn, v);
            let proj = t.g.matmul(ctx, wo);
            acc = Some(match acc {
                None => proj,
                Some(prev) => t.g.add(prev, proj),
            });
        }
        let bias = t.param(self.attn_bias);
        t.g.add_bias(acc.unwrap(), bias)
    }

    fn mlp(&self, t: &mut Tape, x: NodeId) -> NodeId {
        let (w1, b1) = (t.param(self.mlp_w1), t.param(self.mlp_b1));
        let (w2, b2) = (t.param(self.mlp_w2), t.param(self.mlp_b2));
        let h = t.g.matmul(x, w1);
        let h = t.g.add_bias(h, b1);
        let h = t.g.gelu(h);
        let h = t.g.matmul(h, w2);
        t.g.add_bias(h, b2)
    }

    pub fn forward(&self, t: &mut Tape, x: NodeId, causal: bool) -> NodeId {
        let (g1, b1) = (t.param(self.ln1_gain), t.param(self.ln1_bias));
        let normed = t.g.layer_norm(x, g1, b1);
        let attn = self.attention(t, normed, causal);
        let x = t.g.add(x, attn);
        let (g2, b2) = (t.param(self.ln2_gain), t.param(self.ln2_bias));
        let normed = t.g.layer_norm(x, g2, b2);
        let mlp = self.mlp(t, normed);
        t.g.add(x, mlp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build_block(d: usize, heads: usize) -> (ParamSet, BlockParams) {
        let mut ps = ParamSet::new();
        let mut rng = Stream::from_seed(42);
        let block = BlockParams::init(&mut ps, "blk", d, heads, &mut rng);
        (ps, block)
    }

    #[test]
    fn forward_preserves_shape() {
        let (ps, block) = build_block(8, 2);
        let mut t = Tape::new(&ps);
        let mut rng = Stream::from_seed(1);
        let x = t.input(Matrix::from_vec(5, 8, rng.normal_vec(40, 1.0)));
        let y = block.forward(&mut t, x, true);
        assert_eq!(t.g.value(y).rows, 5);
        assert_eq!(t.g.value(y).cols, 8);
    }

    #[test]
    fn causal_block_ignores_future_rows() {
        let (ps, block) = build_block(8, 2);
        let mut rng = Stream::from_seed(2);
        let base = Matrix::from_vec(4, 8, rng.normal_vec(32, 1.0));

        let run = |input: &Matrix| -> Matrix {
            let mut t = Tape::new(&ps);
            let x = t.input(input.clone());
            let y = block.forward(&mut t, x, true);
            t.g.value(y).clone()
        };

        let full = run(&base);
        let mut altered = base.clone();
        for v in altered.row_mut(3) {
            *v += 5.0;
        }
        let changed = run(&altered);
        for r in 0..3 {
            for c in 0..8 {
                assert!(
                    (full.get(r, c) - changed.get(r, c)).abs() < 1e-12,
                    "row {r} depends on a later row"
                );
            }
        }
    }

    fn block_loss(ps: &ParamSet, block: &BlockParams, input: &Matrix) -> f64 {
        let mut t = Tape::new(ps);
        let x = t.input(input.clone());
        let y = block.forward(&mut t, x, true);
        let loss = t.g.mean_cross_entropy(y, &[1, 4, 0]);
        t.g.scalar(loss)
    }

    fn ps_with(ps: &ParamSet, id: ParamId, value: Matrix) -> ParamSet {
        let mut out = ParamSet::new();
        for pid in ps.ids() {
            let v = if pid == id {
                value.clone()
            } else {
                ps.value(pid).clone()
            };
            out.add(ps.name(pid), v);
        }
        out
    }

    #[test]
    fn block_gradients_match_finite_differences() {
        let d = 6;
        let mut ps = ParamSet::new();
        let mut rng = Stream::from_seed(7);
        let block = BlockParams::init(&mut ps, "blk", d, 2, &mut rng);
        let input = Matrix::from_vec(3, d, rng.normal_vec(3 * d, 0.7));

        let mut t = Tape::new(&ps);
        let x = t.input(input.clone());
        let y = block.forward(&mut t, x, true);
        let loss = t.g.mean_cross_entropy(y, &[1, 4, 0]);
        t.g.backward(loss);
        let analytic: Vec<(ParamId, Matrix)> = t
            .bindings()
            .map(|(pid, nid)| (pid, t.g.grad(nid).clone()))
            .collect();

        let h = 1e-5;
        let mut checked = 0;
        for (pid, grad) in &analytic {
            let len = ps.value(*pid).data.len();
            // Spot-check a few coordinates per parameter to keep this fast.
            for ci in [0, len / 2, len.saturating_sub(1)] {
                let mut plus = ps.value(*pid).clone();
                plus.data[ci] += h;
                let mut minus = ps.value(*pid).clone();
                minus.data[ci] -= h;
                let up = block_loss(&ps_with(&ps, *pid, plus), &block, &input);
                let down = block_loss(&ps_with(&ps, *pid, minus), &block, &input);
                let fd = (up - down) / (2.0 * h);
                let an = grad.data[ci];
                let denom = 1.0_f64.max(fd.abs()).max(an.abs());
                assert!(
                    (fd - an).abs() / denom < 1e-6,
                    "{} coord {ci}: fd {fd} vs analytic {an}",
                    ps.name(*pid)
                );
                checked += 1;
            }
        }
        assert!(checked > 30);
    }
}
