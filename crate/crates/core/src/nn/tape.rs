//! Reverse-mode differentiation over whole matrices.
//!
//! Every operation appends a node holding its value; [`Tape::backward`]
//! walks the nodes in reverse and accumulates parameter gradients.

use alloc::vec;
use alloc::vec::Vec;

use super::matrix::Matrix;

pub type NodeId = usize;

const LN_EPS: f64 = 1e-5;

enum Value<'p> {
    Owned(Matrix),
    Borrowed(&'p Matrix),
}

impl Value<'_> {
    fn get(&self) -> &Matrix {
        match self {
            Value::Owned(m) => m,
            Value::Borrowed(m) => m,
        }
    }
}

enum Op {
    Const,
    Param(usize),
    MatMul(NodeId, NodeId),
    MatMulBt(NodeId, NodeId),
    Add(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Scale(NodeId, f64),
    Relu(NodeId),
    MulConst(NodeId, Matrix),
    LayerNorm {
        x: NodeId,
        gain: NodeId,
        bias: NodeId,
        xhat: Matrix,
        inv_std: Vec<f64>,
    },
    Softmax(NodeId),
    SliceCols(NodeId, usize),
    ConcatCols(Vec<NodeId>),
    GatherRows(NodeId, Vec<usize>),
    CrossEntropySum {
        logits: NodeId,
        targets: Vec<Option<usize>>,
        probs: Matrix,
    },
}

struct Node<'p> {
    value: Value<'p>,
    op: Op,
}

#[derive(Default)]
pub struct Tape<'p> {
    nodes: Vec<Node<'p>>,
}

impl<'p> Tape<'p> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    fn push(&mut self, value: Matrix, op: Op) -> NodeId {
        self.nodes.push(Node {
            value: Value::Owned(value),
            op,
        });
        self.nodes.len() - 1
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        self.nodes[id].value.get()
    }

    pub fn constant(&mut self, m: Matrix) -> NodeId {
        self.push(m, Op::Const)
    }

    pub fn param(&mut self, index: usize, m: &'p Matrix) -> NodeId {
        self.nodes.push(Node {
            value: Value::Borrowed(m),
            op: Op::Param(index),
        });
        self.nodes.len() - 1
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    /// `a * b^T`
    pub fn matmul_bt(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).matmul_bt(self.value(b));
        self.push(v, Op::MatMulBt(a, b))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        self.push(v, Op::Add(a, b))
    }

    /// Adds a `1 x n` row to every row of `a`.
    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        let mut v = self.value(a).clone();
        let r = self.value(row);
        assert_eq!((1, v.cols()), r.shape(), "add_row shapes");
        for i in 0..v.rows() {
            for (x, b) in v.row_mut(i).iter_mut().zip(r.data()) {
                *x += b;
            }
        }
        self.push(v, Op::AddRow(a, row))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let mut v = self.value(a).clone();
        v.scale_assign(c);
        self.push(v, Op::Scale(a, c))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let mut v = self.value(a).clone();
        v.data_mut().iter_mut().for_each(|x| *x = x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    /// Element-wise product with a constant (dropout masks).
    pub fn mul_const(&mut self, a: NodeId, mask: Matrix) -> NodeId {
        let mut v = self.value(a).clone();
        assert_eq!(v.shape(), mask.shape());
        for (x, m) in v.data_mut().iter_mut().zip(mask.data()) {
            *x *= m;
        }
        self.push(v, Op::MulConst(a, mask))
    }

    /// Row-wise layer normalisation with `1 x n` gain and bias.
    pub fn layer_norm(&mut self, x: NodeId, gain: NodeId, bias: NodeId) -> NodeId {
        let xv = self.value(x);
        let (rows, cols) = xv.shape();
        let mut xhat = Matrix::zeros(rows, cols);
        let mut inv_std = Vec::with_capacity(rows);
        for i in 0..rows {
            let r = xv.row(i);
            let mean = r.iter().sum::<f64>() / cols as f64;
            let var = r.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let is = 1.0 / libm::sqrt(var + LN_EPS);
            for (h, v) in xhat.row_mut(i).iter_mut().zip(r) {
                *h = (v - mean) * is;
            }
            inv_std.push(is);
        }
        let (g, b) = (self.value(gain), self.value(bias));
        let mut out = xhat.clone();
        for i in 0..rows {
            for ((o, gi), bi) in out.row_mut(i).iter_mut().zip(g.data()).zip(b.data()) {
                *o = *o * gi + bi;
            }
        }
        self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
        )
    }

    /// Row-wise softmax. Entries whose `allowed` flag is false get exactly
    /// zero probability. Every row must allow at least one entry.
    pub fn softmax(&mut self, a: NodeId, allowed: Option<&[bool]>) -> NodeId {
        let av = self.value(a);
        let (rows, cols) = av.shape();
        let mut out = Matrix::zeros(rows, cols);
        for i in 0..rows {
            let ok = |j: usize| allowed.is_none_or(|m| m[i * cols + j]);
            let r = av.row(i);
            let max = (0..cols)
                .filter(|&j| ok(j))
                .map(|j| r[j])
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(max.is_finite(), "softmax row without allowed entries");
            let o = out.row_mut(i);
            let mut sum = 0.0;
            for j in 0..cols {
                if ok(j) {
                    o[j] = libm::exp(r[j] - max);
                    sum += o[j];
                }
            }
            o.iter_mut().for_each(|x| *x /= sum);
        }
        self.push(out, Op::Softmax(a))
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, width: usize) -> NodeId {
        let av = self.value(a);
        let mut out = Matrix::zeros(av.rows(), width);
        for i in 0..av.rows() {
            out.row_mut(i).copy_from_slice(&av.row(i)[start..start + width]);
        }
        self.push(out, Op::SliceCols(a, start))
    }

    pub fn concat_cols(&mut self, parts: Vec<NodeId>) -> NodeId {
        let rows = self.value(parts[0]).rows();
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Matrix::zeros(rows, cols);
        let mut off = 0;
        for &p in &parts {
            let pv = self.value(p);
            for i in 0..rows {
                out.row_mut(i)[off..off + pv.cols()].copy_from_slice(pv.row(i));
            }
            off += pv.cols();
        }
        self.push(out, Op::ConcatCols(parts))
    }

    pub fn gather_rows(&mut self, table: NodeId, rows: Vec<usize>) -> NodeId {
        let t = self.value(table);
        let mut out = Matrix::zeros(rows.len(), t.cols());
        for (i, &r) in rows.iter().enumerate() {
            out.row_mut(i).copy_from_slice(t.row(r));
        }
        self.push(out, Op::GatherRows(table, rows))
    }

    /// Summed cross-entropy of each row against its target class; rows with
    /// no target are ignored. Produces a `1 x 1` node.
    pub fn cross_entropy_sum(&mut self, logits: NodeId, targets: Vec<Option<usize>>) -> NodeId {
        let lv = self.value(logits);
        assert_eq!(lv.rows(), targets.len());
        let mut probs = Matrix::zeros(lv.rows(), lv.cols());
        let mut total = 0.0;
        for (i, t) in targets.iter().enumerate() {
            let r = lv.row(i);
            let max = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = r.iter().map(|x| libm::exp(x - max)).sum();
            let lse = max + libm::log(sum);
            for (p, x) in probs.row_mut(i).iter_mut().zip(r) {
                *p = libm::exp(x - lse);
            }
            if let Some(t) = *t {
                total += lse - r[t];
            }
        }
        self.push(
            Matrix::from_vec(1, 1, vec![total]),
            Op::CrossEntropySum { logits, targets, probs },
        )
    }

    /// Back-propagates `seed * d(root)` and adds parameter gradients into
    /// `param_grads`, indexed by the ids given to [`Tape::param`].
    pub fn backward(&self, root: NodeId, seed: f64, param_grads: &mut [Matrix]) {
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        let (r, c) = self.value(root).shape();
        grads[root] = Some(Matrix::filled(r, c, seed));

        for id in (0..=root).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            match &node.op {
                Op::Const => {}
                Op::Param(p) => param_grads[*p].add_assign(&g),
                Op::MatMul(a, b) => {
                    let da = g.matmul_bt(self.value(*b));
                    let db = self.value(*a).matmul_at(&g);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::MatMulBt(a, b) => {
                    let da = g.matmul(self.value(*b));
                    let db = g.matmul_at(self.value(*a));
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::AddRow(a, row) => {
                    let mut dr = Matrix::zeros(1, g.cols());
                    for i in 0..g.rows() {
                        for (d, x) in dr.data_mut().iter_mut().zip(g.row(i)) {
                            *d += x;
                        }
                    }
                    accumulate(&mut grads, *row, dr);
                    accumulate(&mut grads, *a, g);
                }
                Op::Scale(a, c) => {
                    let mut g = g;
                    g.scale_assign(*c);
                    accumulate(&mut grads, *a, g);
                }
                Op::Relu(a) => {
                    let mut g = g;
                    for (d, y) in g.data_mut().iter_mut().zip(node.value.get().data()) {
                        if *y <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    accumulate(&mut grads, *a, g);
                }
                Op::MulConst(a, mask) => {
                    let mut g = g;
                    for (d, m) in g.data_mut().iter_mut().zip(mask.data()) {
                        *d *= m;
                    }
                    accumulate(&mut grads, *a, g);
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    xhat,
                    inv_std,
                } => {
                    let (rows, cols) = g.shape();
                    let gv = self.value(*gain);
                    let mut dgain = Matrix::zeros(1, cols);
                    let mut dbias = Matrix::zeros(1, cols);
                    let mut dx = Matrix::zeros(rows, cols);
                    let n = cols as f64;
                    for i in 0..rows {
                        let (gr, hr) = (g.row(i), xhat.row(i));
                        let mut sum_dh = 0.0;
                        let mut sum_dh_h = 0.0;
                        for j in 0..cols {
                            dgain.data_mut()[j] += gr[j] * hr[j];
                            dbias.data_mut()[j] += gr[j];
                            let dh = gr[j] * gv.data()[j];
                            sum_dh += dh;
                            sum_dh_h += dh * hr[j];
                        }
                        let dr = dx.row_mut(i);
                        for j in 0..cols {
                            let dh = gr[j] * gv.data()[j];
                            dr[j] = inv_std[i] * (dh - sum_dh / n - hr[j] * sum_dh_h / n);
                        }
                    }
                    accumulate(&mut grads, *gain, dgain);
                    accumulate(&mut grads, *bias, dbias);
                    accumulate(&mut grads, *x, dx);
                }
                Op::Softmax(a) => {
                    let y = node.value.get();
                    let mut dx = Matrix::zeros(y.rows(), y.cols());
                    for i in 0..y.rows() {
                        let (yr, gr) = (y.row(i), g.row(i));
                        let dot: f64 = yr.iter().zip(gr).map(|(p, d)| p * d).sum();
                        for (o, (p, d)) in dx.row_mut(i).iter_mut().zip(yr.iter().zip(gr)) {
                            *o = p * (d - dot);
                        }
                    }
                    accumulate(&mut grads, *a, dx);
                }
                Op::SliceCols(a, start) => {
                    let av = self.value(*a);
                    let mut da = Matrix::zeros(av.rows(), av.cols());
                    for i in 0..g.rows() {
                        da.row_mut(i)[*start..*start + g.cols()].copy_from_slice(g.row(i));
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let w = self.value(p).cols();
                        let mut dp = Matrix::zeros(g.rows(), w);
                        for i in 0..g.rows() {
                            dp.row_mut(i).copy_from_slice(&g.row(i)[off..off + w]);
                        }
                        off += w;
                        accumulate(&mut grads, p, dp);
                    }
                }
                Op::GatherRows(table, rows) => {
                    let tv = self.value(*table);
                    let mut dt = Matrix::zeros(tv.rows(), tv.cols());
                    for (i, &r) in rows.iter().enumerate() {
                        for (d, x) in dt.row_mut(r).iter_mut().zip(g.row(i)) {
                            *d += x;
                        }
                    }
                    accumulate(&mut grads, *table, dt);
                }
                Op::CrossEntropySum { logits, targets, probs } => {
                    let s = g.get(0, 0);
                    let mut dl = probs.clone();
                    for (i, t) in targets.iter().enumerate() {
                        match t {
                            Some(t) => {
                                dl.row_mut(i).iter_mut().for_each(|x| *x *= s);
                                let v = dl.get(i, *t);
                                dl.set(i, *t, v - s);
                            }
                            None => dl.row_mut(i).iter_mut().for_each(|x| *x = 0.0),
                        }
                    }
                    accumulate(&mut grads, *logits, dl);
                }
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Matrix>], id: NodeId, g: Matrix) {
    match &mut grads[id] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}
