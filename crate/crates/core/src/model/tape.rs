//! Reverse-mode differentiation over a small set of matrix operations.
//!
//! A [`Tape`] records every operation of one forward computation together with
//! its value. [`Tape::backward`] walks the record in reverse and accumulates
//! parameter gradients into a caller-provided buffer, so gradients of several
//! tapes can be summed without intermediate allocations.
//!
//! Parameters are never copied onto the tape: leaf nodes refer to the parameter
//! slice by index, and embedding lookups/scoring read rows in place.

use super::tensor::{dot, matmul, matmul_at_acc, matmul_bt, Matrix};
use crate::loss;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Const,
    Param(usize),
    /// Row `r` is `scale * table[ids[r]]`; with `pad_zero`, id 0 yields zeros.
    Gather {
        table: usize,
        ids: Vec<u32>,
        scale: f64,
        pad_zero: bool,
    },
    Add(Var, Var),
    AddBias(Var, Var),
    MatMul(Var, Var),
    MatMulBt(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    MulConst(Var, Vec<f64>),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Matrix,
        inv_std: Vec<f64>,
    },
    MaskedSoftmax(Var),
    SliceCols {
        x: Var,
        start: usize,
    },
    ConcatCols(Vec<Var>),
    /// `1 x m` logits: `dot(h[row], table[item])` per pair.
    Pick {
        h: Var,
        table: usize,
        pairs: Vec<(usize, u32)>,
    },
    /// Scalar weighted BCE of a `1 x m` logit row; stores dloss/dlogit.
    Bce {
        logits: Var,
        grad: Vec<f64>,
    },
    Sum(Vec<Var>),
}

struct Node {
    op: Op,
    /// `None` for parameter leaves, whose value lives in the parameter slice.
    value: Option<Matrix>,
}

pub struct Tape<'p> {
    params: &'p [Matrix],
    nodes: Vec<Node>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p [Matrix]) -> Self {
        Tape {
            params,
            nodes: Vec::with_capacity(256),
        }
    }

    pub fn value(&self, v: Var) -> &Matrix {
        match (&self.nodes[v.0].value, &self.nodes[v.0].op) {
            (Some(m), _) => m,
            (None, Op::Param(p)) => &self.params[*p],
            _ => unreachable!("node without value"),
        }
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        debug_assert_eq!(m.shape(), (1, 1));
        m.data()[0]
    }

    fn push(&mut self, op: Op, value: Matrix) -> Var {
        self.nodes.push(Node {
            op,
            value: Some(value),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, m: Matrix) -> Var {
        self.push(Op::Const, m)
    }

    pub fn param(&mut self, id: usize) -> Var {
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn gather(&mut self, table: usize, ids: &[u32], scale: f64, pad_zero: bool) -> Var {
        let t = &self.params[table];
        let mut out = Matrix::zeros(ids.len(), t.cols());
        for (r, &id) in ids.iter().enumerate() {
            if pad_zero && id == 0 {
                continue;
            }
            for (o, &x) in out.row_mut(r).iter_mut().zip(t.row(id as usize)) {
                *o = scale * x;
            }
        }
        self.push(
            Op::Gather {
                table,
                ids: ids.to_vec(),
                scale,
                pad_zero,
            },
            out,
        )
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        self.push(Op::Add(a, b), out)
    }

    pub fn add_bias(&mut self, a: Var, bias: Var) -> Var {
        let mut out = self.value(a).clone();
        let b = self.value(bias);
        debug_assert_eq!(b.shape(), (1, out.cols()));
        for r in 0..out.rows() {
            for (o, &x) in out.row_mut(r).iter_mut().zip(b.data()) {
                *o += x;
            }
        }
        self.push(Op::AddBias(a, bias), out)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = matmul(self.value(a), self.value(b));
        self.push(Op::MatMul(a, b), out)
    }

    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Var {
        let out = matmul_bt(self.value(a), self.value(b));
        self.push(Op::MatMulBt(a, b), out)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let mut out = self.value(a).clone();
        out.scale(s);
        self.push(Op::Scale(a, s), out)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        for x in out.data_mut() {
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        self.push(Op::Relu(a), out)
    }

    /// Elementwise product with a constant (dropout masks, padding masks).
    pub fn mul_const(&mut self, a: Var, mask: Vec<f64>) -> Var {
        let mut out = self.value(a).clone();
        debug_assert_eq!(mask.len(), out.len());
        for (o, m) in out.data_mut().iter_mut().zip(&mask) {
            *o *= m;
        }
        self.push(Op::MulConst(a, mask), out)
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Var {
        let xv = self.value(x);
        let (rows, cols) = xv.shape();
        let g = self.value(gamma).data();
        let b = self.value(beta).data();
        let mut xhat = Matrix::zeros(rows, cols);
        let mut out = Matrix::zeros(rows, cols);
        let mut inv_std = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = xv.row(r);
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std.push(is);
            let xh = xhat.row_mut(r);
            for c in 0..cols {
                xh[c] = (row[c] - mean) * is;
            }
            let o = out.row_mut(r);
            for c in 0..cols {
                o[c] = xhat.get(r, c) * g[c] + b[c];
            }
        }
        self.push(
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
            out,
        )
    }

    /// Row softmax over entries where `allowed[r * cols + c]`; masked entries are
    /// exactly zero and a fully masked row is all zeros.
    pub fn masked_softmax(&mut self, a: Var, allowed: &[bool]) -> Var {
        let av = self.value(a);
        let (rows, cols) = av.shape();
        let mut out = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let ok = &allowed[r * cols..(r + 1) * cols];
            let row = av.row(r);
            let max = row
                .iter()
                .zip(ok)
                .filter(|(_, &k)| k)
                .fold(f64::NEG_INFINITY, |m, (&x, _)| m.max(x));
            if max == f64::NEG_INFINITY {
                continue;
            }
            let o = out.row_mut(r);
            let mut sum = 0.0;
            for c in 0..cols {
                if ok[c] {
                    o[c] = (row[c] - max).exp();
                    sum += o[c];
                }
            }
            for x in o.iter_mut() {
                *x /= sum;
            }
        }
        self.push(Op::MaskedSoftmax(a), out)
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Var {
        let xv = self.value(x);
        let mut out = Matrix::zeros(xv.rows(), len);
        for r in 0..xv.rows() {
            out.row_mut(r).copy_from_slice(&xv.row(r)[start..start + len]);
        }
        self.push(Op::SliceCols { x, start }, out)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows();
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let mut off = 0;
            for &p in parts {
                let pv = self.value(p);
                out.row_mut(r)[off..off + pv.cols()].copy_from_slice(pv.row(r));
                off += pv.cols();
            }
        }
        self.push(Op::ConcatCols(parts.to_vec()), out)
    }

    pub fn pick(&mut self, h: Var, table: usize, pairs: &[(usize, u32)]) -> Var {
        let hv = self.value(h);
        let t = &self.params[table];
        let data = pairs
            .iter()
            .map(|&(r, item)| dot(hv.row(r), t.row(item as usize)))
            .collect();
        self.push(
            Op::Pick {
                h,
                table,
                pairs: pairs.to_vec(),
            },
            Matrix::from_vec(1, pairs.len(), data),
        )
    }

    pub fn bce(&mut self, logits: Var, labels: &[bool], weights: &[f64]) -> Var {
        let (l, grad) = loss::weighted_bce(self.value(logits).data(), labels, weights);
        self.push(Op::Bce { logits, grad }, Matrix::from_vec(1, 1, vec![l]))
    }

    pub fn sum(&mut self, terms: &[Var]) -> Var {
        let s = terms.iter().map(|&t| self.scalar(t)).sum();
        self.push(Op::Sum(terms.to_vec()), Matrix::from_vec(1, 1, vec![s]))
    }

    /// Back-propagates the scalar `root`, adding `d root / d param` into
    /// `grads` (same shapes as the parameter slice). Returns the root value.
    pub fn backward(&self, root: Var, grads: &mut [Matrix]) -> Result<f64> {
        let value = self.value(root);
        if value.shape() != (1, 1) {
            return Err(Error::InvalidArgument(format!(
                "backward needs a scalar root, got {:?}",
                value.shape()
            )));
        }
        let loss = value.data()[0];
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss(format!(
                "loss = {loss} at node {} of {}",
                root.0,
                self.nodes.len()
            )));
        }
        let mut adj: Vec<Option<Matrix>> = (0..=root.0).map(|_| None).collect();
        adj[root.0] = Some(Matrix::filled(1, 1, 1.0));

        fn acc(adj: &mut [Option<Matrix>], v: Var, g: Matrix) {
            match &mut adj[v.0] {
                Some(m) => m.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }
        fn acc_with(adj: &mut [Option<Matrix>], v: Var, shape: (usize, usize), f: impl FnOnce(&mut Matrix)) {
            let slot = adj[v.0].get_or_insert_with(|| Matrix::zeros(shape.0, shape.1));
            f(slot);
        }

        for i in (0..=root.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Const => {}
                Op::Param(p) => grads[*p].add_assign(&g),
                Op::Gather {
                    table,
                    ids,
                    scale,
                    pad_zero,
                } => {
                    let gt = &mut grads[*table];
                    for (r, &id) in ids.iter().enumerate() {
                        if *pad_zero && id == 0 {
                            continue;
                        }
                        for (o, &x) in gt.row_mut(id as usize).iter_mut().zip(g.row(r)) {
                            *o += scale * x;
                        }
                    }
                }
                Op::Add(a, b) => {
                    acc(&mut adj, *b, g.clone());
                    acc(&mut adj, *a, g);
                }
                Op::AddBias(a, bias) => {
                    let cols = g.cols();
                    acc_with(&mut adj, *bias, (1, cols), |m| {
                        for r in 0..g.rows() {
                            for (o, &x) in m.data_mut().iter_mut().zip(g.row(r)) {
                                *o += x;
                            }
                        }
                    });
                    acc(&mut adj, *a, g);
                }
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    acc(&mut adj, *a, matmul_bt(&g, bv));
                    acc_with(&mut adj, *b, bv.shape(), |m| matmul_at_acc(av, &g, m));
                }
                Op::MatMulBt(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    acc(&mut adj, *a, matmul(&g, bv));
                    acc_with(&mut adj, *b, bv.shape(), |m| matmul_at_acc(&g, av, m));
                }
                Op::Scale(a, s) => {
                    let mut g = g;
                    g.scale(*s);
                    acc(&mut adj, *a, g);
                }
                Op::Relu(a) => {
                    let mut g = g;
                    for (gx, &y) in g.data_mut().iter_mut().zip(self.value(Var(i)).data()) {
                        if y <= 0.0 {
                            *gx = 0.0;
                        }
                    }
                    acc(&mut adj, *a, g);
                }
                Op::MulConst(a, mask) => {
                    let mut g = g;
                    for (gx, m) in g.data_mut().iter_mut().zip(mask) {
                        *gx *= m;
                    }
                    acc(&mut adj, *a, g);
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                } => {
                    let (rows, cols) = g.shape();
                    let gv = self.value(*gamma).data();
                    let mut dgamma = vec![0.0; cols];
                    let mut dbeta = vec![0.0; cols];
                    let mut dx = Matrix::zeros(rows, cols);
                    let n = cols as f64;
                    for r in 0..rows {
                        let gr = g.row(r);
                        let xh = xhat.row(r);
                        let mut sum_d = 0.0;
                        let mut sum_dx = 0.0;
                        for c in 0..cols {
                            dgamma[c] += gr[c] * xh[c];
                            dbeta[c] += gr[c];
                            let d = gr[c] * gv[c];
                            sum_d += d;
                            sum_dx += d * xh[c];
                        }
                        let is = inv_std[r];
                        let out = dx.row_mut(r);
                        for c in 0..cols {
                            let d = gr[c] * gv[c];
                            out[c] = is / n * (n * d - sum_d - xh[c] * sum_dx);
                        }
                    }
                    acc(&mut adj, *gamma, Matrix::from_vec(1, cols, dgamma));
                    acc(&mut adj, *beta, Matrix::from_vec(1, cols, dbeta));
                    acc(&mut adj, *x, dx);
                }
                Op::MaskedSoftmax(a) => {
                    let y = self.value(Var(i));
                    let mut dx = Matrix::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let yr = y.row(r);
                        let gr = g.row(r);
                        let s = dot(yr, gr);
                        for (o, (&yy, &gg)) in dx.row_mut(r).iter_mut().zip(yr.iter().zip(gr)) {
                            *o = yy * (gg - s);
                        }
                    }
                    acc(&mut adj, *a, dx);
                }
                Op::SliceCols { x, start } => {
                    let shape = self.value(*x).shape();
                    acc_with(&mut adj, *x, shape, |m| {
                        for r in 0..g.rows() {
                            for (o, &v) in m.row_mut(r)[*start..*start + g.cols()].iter_mut().zip(g.row(r)) {
                                *o += v;
                            }
                        }
                    });
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let cols = self.value(p).cols();
                        let mut part = Matrix::zeros(g.rows(), cols);
                        for r in 0..g.rows() {
                            part.row_mut(r).copy_from_slice(&g.row(r)[off..off + cols]);
                        }
                        off += cols;
                        acc(&mut adj, p, part);
                    }
                }
                Op::Pick { h, table, pairs } => {
                    let hv = self.value(*h);
                    let t = &self.params[*table];
                    let mut dh = Matrix::zeros(hv.rows(), hv.cols());
                    let gt = &mut grads[*table];
                    for (k, &(r, item)) in pairs.iter().enumerate() {
                        let gk = g.data()[k];
                        if gk == 0.0 {
                            continue;
                        }
                        for (o, &e) in dh.row_mut(r).iter_mut().zip(t.row(item as usize)) {
                            *o += gk * e;
                        }
                        for (o, &x) in gt.row_mut(item as usize).iter_mut().zip(hv.row(r)) {
                            *o += gk * x;
                        }
                    }
                    acc(&mut adj, *h, dh);
                }
                Op::Bce { logits, grad } => {
                    let s = g.data()[0];
                    let d = grad.iter().map(|x| x * s).collect();
                    acc(&mut adj, *logits, Matrix::from_vec(1, grad.len(), d));
                }
                Op::Sum(terms) => {
                    for &t in terms {
                        acc(&mut adj, t, g.clone());
                    }
                }
            }
        }
        Ok(loss)
    }
}
