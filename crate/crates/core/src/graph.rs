//! Reverse-mode autodiff over a flat tape of matrix ops.
//!
//! A graph is built fresh for every forward pass. Nodes only reference
//! earlier nodes, so backward is a single reverse sweep over the tape.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::tensor::Matrix;

pub type NodeId = usize;

const LN_EPS: f64 = 1e-5;

enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    MatMulNT(NodeId, NodeId),
    Add(NodeId, NodeId),
    AddBias(NodeId, NodeId),
    Scale(NodeId, f64),
    SoftmaxRows(NodeId),
    LayerNorm { x: NodeId, gamma: NodeId, beta: NodeId },
    Gelu(NodeId),
    ConcatRows(Vec<NodeId>),
    SliceRows { x: NodeId, start: usize },
    GatherRows { table: NodeId, ids: Vec<usize> },
    MeanCrossEntropy { logits: NodeId, targets: Vec<usize> },
    MeanOf(Vec<NodeId>),
}

struct Node {
    op: Op,
    value: Matrix,
}

pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Matrix>,
}

impl Graph {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    fn push(&mut self, op: Op, value: Matrix) -> NodeId {
        self.nodes.push(Node { op, value });
        self.nodes.len() - 1
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id].value
    }

    /// Gradient of the last `backward` target with respect to node `id`.
    pub fn grad(&self, id: NodeId) -> &Matrix {
        &self.grads[id]
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        let v = self.value(id);
        assert!(v.rows == 1 && v.cols == 1, "node is not a scalar");
        v.data[0]
    }

    /// Leaf holding a constant (inputs) or a parameter; grads accumulate
    /// into every leaf alike and callers read the ones they care about.
    pub fn leaf(&mut self, value: Matrix) -> NodeId {
        self.push(Op::Leaf, value)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.nodes[a].value.matmul(&self.nodes[b].value);
        self.push(Op::MatMul(a, b), value)
    }

    /// A · Bᵀ without materializing the transpose.
    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.nodes[a].value.matmul_nt(&self.nodes[b].value);
        self.push(Op::MatMulNT(a, b), value)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let mut value = self.nodes[a].value.clone();
        value.add_assign(&self.nodes[b].value);
        self.push(Op::Add(a, b), value)
    }

    /// X + b with b (1 x C) broadcast over the rows of X.
    pub fn add_bias(&mut self, x: NodeId, b: NodeId) -> NodeId {
        let xv = &self.nodes[x].value;
        let bv = &self.nodes[b].value;
        assert!(bv.rows == 1 && bv.cols == xv.cols, "bias shape mismatch");
        let mut value = xv.clone();
        for r in 0..value.rows {
            let row = value.row_mut(r);
            for (o, bb) in row.iter_mut().zip(&bv.data) {
                *o += bb;
            }
        }
        self.push(Op::AddBias(x, b), value)
    }

    pub fn scale(&mut self, x: NodeId, s: f64) -> NodeId {
        let mut value = self.nodes[x].value.clone();
        value.scale_assign(s);
        self.push(Op::Scale(x, s), value)
    }

    /// Row-wise softmax. With `causal`, entry (i, j) is masked out for
    /// j > i; the matrix must be square.
    pub fn softmax_rows(&mut self, x: NodeId, causal: bool) -> NodeId {
        let xv = &self.nodes[x].value;
        if causal {
            assert_eq!(xv.rows, xv.cols, "causal softmax needs a square matrix");
        }
        let mut value = Matrix::zeros(xv.rows, xv.cols);
        for r in 0..xv.rows {
            let visible = if causal { r + 1 } else { xv.cols };
            let row = &xv.row(r)[..visible];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            let out = value.row_mut(r);
            for (j, v) in row.iter().enumerate() {
                let e = math::exp(v - max);
                out[j] = e;
                sum += e;
            }
            for o in &mut out[..visible] {
                *o /= sum;
            }
        }
        self.push(Op::SoftmaxRows(x), value)
    }

    /// Row-wise layer norm with affine parameters gamma, beta (1 x C).
    pub fn layer_norm(&mut self, x: NodeId, gamma: NodeId, beta: NodeId) -> NodeId {
        let xv = &self.nodes[x].value;
        let gv = &self.nodes[gamma].value;
        let bv = &self.nodes[beta].value;
        assert!(gv.rows == 1 && gv.cols == xv.cols, "gamma shape mismatch");
        assert!(bv.rows == 1 && bv.cols == xv.cols, "beta shape mismatch");
        let mut value = Matrix::zeros(xv.rows, xv.cols);
        for r in 0..xv.rows {
            let row = xv.row(r);
            let (mean, var) = row_moments(row);
            let inv = 1.0 / math::sqrt(var + LN_EPS);
            let out = value.row_mut(r);
            for c in 0..row.len() {
                out[c] = (row[c] - mean) * inv * gv.data[c] + bv.data[c];
            }
        }
        self.push(Op::LayerNorm { x, gamma, beta }, value)
    }

    pub fn gelu(&mut self, x: NodeId) -> NodeId {
        let xv = &self.nodes[x].value;
        let mut value = xv.clone();
        for v in &mut value.data {
            *v = 0.5 * *v * (1.0 + math::erf(*v / core::f64::consts::SQRT_2));
        }
        self.push(Op::Gelu(x), value)
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> NodeId {
        let values: Vec<&Matrix> = parts.iter().map(|&p| &self.nodes[p].value).collect();
        let value = Matrix::concat_rows(&values);
        self.push(Op::ConcatRows(parts.to_vec()), value)
    }

    pub fn slice_rows(&mut self, x: NodeId, start: usize, end: usize) -> NodeId {
        let value = self.nodes[x].value.slice_rows(start, end);
        self.push(Op::SliceRows { x, start }, value)
    }

    /// Row lookup: out[i] = table[ids[i]]. Backward scatter-adds, so
    /// repeated ids accumulate.
    pub fn gather_rows(&mut self, table: NodeId, ids: &[usize]) -> NodeId {
        let tv = &self.nodes[table].value;
        let mut value = Matrix::zeros(ids.len(), tv.cols);
        for (i, &id) in ids.iter().enumerate() {
            assert!(id < tv.rows, "gather id out of range");
            value.row_mut(i).copy_from_slice(tv.row(id));
        }
        self.push(
            Op::GatherRows {
                table,
                ids: ids.to_vec(),
            },
            value,
        )
    }

    /// Mean over rows of -log softmax(logits)[target]. Scalar output.
    pub fn mean_cross_entropy(&mut self, logits: NodeId, targets: &[usize]) -> NodeId {
        let lv = &self.nodes[logits].value;
        assert_eq!(lv.rows, targets.len(), "one target per logit row");
        assert!(!targets.is_empty(), "cross entropy over zero rows");
        let mut total = 0.0;
        for (r, &t) in targets.iter().enumerate() {
            let row = lv.row(r);
            assert!(t < row.len(), "target out of vocabulary range");
            total += math::log_sum_exp(row) - row[t];
        }
        let value = Matrix::from_vec(1, 1, vec![total / targets.len() as f64]);
        self.push(
            Op::MeanCrossEntropy {
                logits,
                targets: targets.to_vec(),
            },
            value,
        )
    }

    /// Mean of scalar nodes.
    pub fn mean_of(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "mean over zero nodes");
        let mut total = 0.0;
        for &p in parts {
            let v = &self.nodes[p].value;
            assert!(v.rows == 1 && v.cols == 1, "mean_of needs scalars");
            total += v.data[0];
        }
        let value = Matrix::from_vec(1, 1, vec![total / parts.len() as f64]);
        self.push(Op::MeanOf(parts.to_vec()), value)
    }

    /// Accumulate d(loss)/d(node) for every node on the tape.
    pub fn backward(&mut self, loss: NodeId) {
        let scalar = self.value(loss);
        assert!(scalar.rows == 1 && scalar.cols == 1, "backward needs a scalar loss");
        let mut grads: Vec<Matrix> = self
            .nodes
            .iter()
            .map(|n| Matrix::zeros(n.value.rows, n.value.cols))
            .collect();
        grads[loss].data[0] = 1.0;

        for id in (0..=loss).rev() {
            let (before, rest) = grads.split_at_mut(id);
            let gout = &rest[0];
            if gout.data.iter().all(|&g| g == 0.0) {
                continue;
            }
            let node = &self.nodes[id];
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let av = &self.nodes[*a].value;
                    let bv = &self.nodes[*b].value;
                    before[*a].add_assign(&gout.matmul_nt(bv));
                    before[*b].add_assign(&av.matmul_tn(gout));
                }
                Op::MatMulNT(a, b) => {
                    let av = &self.nodes[*a].value;
                    let bv = &self.nodes[*b].value;
                    before[*a].add_assign(&gout.matmul(bv));
                    before[*b].add_assign(&gout.matmul_tn(av));
                }
                Op::Add(a, b) => {
                    before[*a].add_assign(gout);
                    before[*b].add_assign(gout);
                }
                Op::AddBias(x, b) => {
                    before[*x].add_assign(gout);
                    let db = before[*b].row_mut(0);
                    for r in 0..gout.rows {
                        for (d, g) in db.iter_mut().zip(gout.row(r)) {
                            *d += g;
                        }
                    }
                }
                Op::Scale(x, s) => {
                    let mut gx = gout.clone();
                    gx.scale_assign(*s);
                    before[*x].add_assign(&gx);
                }
                Op::SoftmaxRows(x) => {
                    // Masked entries have y = 0, so the same rule covers
                    // the causal case.
                    let y = &node.value;
                    for r in 0..y.rows {
                        let yr = y.row(r);
                        let gr = gout.row(r);
                        let dot: f64 = yr.iter().zip(gr).map(|(y, g)| y * g).sum();
                        let out = before[*x].row_mut(r);
                        for c in 0..yr.len() {
                            out[c] += yr[c] * (gr[c] - dot);
                        }
                    }
                }
                Op::LayerNorm { x, gamma, beta } => {
                    let xv = &self.nodes[*x].value;
                    let gv = &self.nodes[*gamma].value;
                    let cols = xv.cols;
                    for r in 0..xv.rows {
                        let row = xv.row(r);
                        let (mean, var) = row_moments(row);
                        let inv = 1.0 / math::sqrt(var + LN_EPS);
                        let gr = gout.row(r);
                        let mut m1 = 0.0;
                        let mut m2 = 0.0;
                        for c in 0..cols {
                            let xh = (row[c] - mean) * inv;
                            let g = gr[c] * gv.data[c];
                            m1 += g;
                            m2 += g * xh;
                        }
                        m1 /= cols as f64;
                        m2 /= cols as f64;
                        for c in 0..cols {
                            let xh = (row[c] - mean) * inv;
                            let g = gr[c] * gv.data[c];
                            before[*x].row_mut(r)[c] += (g - m1 - xh * m2) * inv;
                            before[*gamma].row_mut(0)[c] += gr[c] * xh;
                            before[*beta].row_mut(0)[c] += gr[c];
                        }
                    }
                }
                Op::Gelu(x) => {
                    let xv = &self.nodes[*x].value;
                    let gx = before[*x].data.as_mut_slice();
                    for (i, &v) in xv.data.iter().enumerate() {
                        let cdf = 0.5 * (1.0 + math::erf(v / core::f64::consts::SQRT_2));
                        let pdf = math::exp(-0.5 * v * v) / math::sqrt(2.0 * core::f64::consts::PI);
                        gx[i] += gout.data[i] * (cdf + v * pdf);
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let rows = self.nodes[p].value.rows;
                        if rows > 0 {
                            before[p].add_assign(&gout.slice_rows(offset, offset + rows));
                        }
                        offset += rows;
                    }
                }
                Op::SliceRows { x, start } => {
                    for r in 0..gout.rows {
                        let dst = before[*x].row_mut(start + r);
                        for (d, g) in dst.iter_mut().zip(gout.row(r)) {
                            *d += g;
                        }
                    }
                }
                Op::GatherRows { table, ids } => {
                    for (i, &id) in ids.iter().enumerate() {
                        let dst = before[*table].row_mut(id);
                        for (d, g) in dst.iter_mut().zip(gout.row(i)) {
                            *d += g;
                        }
                    }
                }
                Op::MeanCrossEntropy { logits, targets } => {
                    let lv = &self.nodes[*logits].value;
                    let g = gout.data[0] / targets.len() as f64;
                    for (r, &t) in targets.iter().enumerate() {
                        let row = lv.row(r);
                        let lse = math::log_sum_exp(row);
                        let dst = before[*logits].row_mut(r);
                        for (c, &l) in row.iter().enumerate() {
                            let p = math::exp(l - lse);
                            let indicator = if c == t { 1.0 } else { 0.0 };
                            dst[c] += g * (p - indicator);
                        }
                    }
                }
                Op::MeanOf(parts) => {
                    let g = gout.data[0] / parts.len() as f64;
                    for &p in parts {
                        before[p].data[0] += g;
                    }
                }
            }
        }
        self.grads = grads;
    }
}

impl Default for Graph {
    fn default() -> Self {
        Graph::new()
    }
}

fn row_moments(row: &[f64]) -> (f64, f64) {
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}
