//! Define-by-run reverse-mode differentiation graph.
//!
//! Nodes are appended in creation order, which is already a topological
//! order (an op can only reference previously created vars), so the
//! backward sweep is a single reverse pass that visits each node exactly
//! once. One `Graph` is built per training step and dropped afterwards;
//! parameters live outside the graph (see `optim::ParamStore`).

use std::cell::RefCell;

use crate::diffkernel::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

#[derive(Debug)]
enum Op {
    Leaf { trainable: bool },
    Matmul(Var, Var),
    /// a * b^T without materializing the transpose.
    MatmulNT(Var, Var),
    Add(Var, Var),
    /// Broadcast a rank-1 bias over the rows of a rank-2 operand.
    AddRow(Var, Var),
    Sub(Var, Var),
    MulElem(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Relu(Var),
    Softmax(Var, usize),
    /// Mean over rows of (logsumexp(row) - row[target]).
    CrossEntropyLogits { logits: Var, targets: Vec<usize> },
    /// Mean over rows of the per-element Huber penalty against a constant.
    HuberToConst { pred: Var, target: Tensor, delta: f64 },
    SumAll(Var),
    MeanAll(Var),
    MeanAxis0(Var),
    ConcatRows(Vec<Var>),
    SliceRows { src: Var, start: usize, len: usize },
    SliceCols { src: Var, start: usize, len: usize },
    ConcatCols(Vec<Var>),
    Transpose(Var),
    LayerNorm { x: Var, gamma: Var, beta: Var, eps: f64 },
    GradReverse(Var, f64),
    GatherRows { src: Var, idx: Vec<usize> },
    /// Mean over consecutive groups of `group` rows.
    AvgPoolRows { src: Var, group: usize },
}

struct Node {
    value: Tensor,
    grad: Tensor,
    op: Op,
}

#[derive(Default)]
pub struct Graph {
    nodes: RefCell<Vec<Node>>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    fn push(&self, value: Tensor, op: Op) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        let grad = Tensor::zeros(value.shape());
        nodes.push(Node { value, grad, op });
        Var(nodes.len() - 1)
    }

    /// Insert a non-trainable leaf (input data, constants).
    pub fn constant(&self, value: Tensor) -> Var {
        self.push(value, Op::Leaf { trainable: false })
    }

    /// Insert a trainable leaf; its gradient is read back after `backward`.
    pub fn param(&self, value: Tensor) -> Var {
        self.push(value, Op::Leaf { trainable: true })
    }

    pub fn value(&self, v: Var) -> Tensor {
        self.nodes.borrow()[v.0].value.clone()
    }

    /// Read a node's value without cloning.
    pub fn with_value<R>(&self, v: Var, f: impl FnOnce(&Tensor) -> R) -> R {
        f(&self.nodes.borrow()[v.0].value)
    }

    pub fn grad(&self, v: Var) -> Tensor {
        self.nodes.borrow()[v.0].grad.clone()
    }

    pub fn shape_of(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.0].value.shape().to_vec()
    }

    pub fn zero_grads(&self) {
        let mut nodes = self.nodes.borrow_mut();
        for n in nodes.iter_mut() {
            n.grad = Tensor::zeros(n.value.shape());
        }
    }

    fn binary_value<R>(&self, a: Var, b: Var, f: impl FnOnce(&Tensor, &Tensor) -> R) -> R {
        let nodes = self.nodes.borrow();
        f(&nodes[a.0].value, &nodes[b.0].value)
    }

    // ---- op constructors (forward is computed eagerly) ----

    pub fn matmul(&self, a: Var, b: Var) -> Result<Var> {
        let value = self.binary_value(a, b, |x, y| x.matmul(y))?;
        Ok(self.push(value, Op::Matmul(a, b)))
    }

    /// a[m,k] * b[n,k]^T.
    pub fn matmul_nt(&self, a: Var, b: Var) -> Result<Var> {
        let value = self.binary_value(a, b, |x, y| x.matmul_nt(y))?;
        Ok(self.push(value, Op::MatmulNT(a, b)))
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var> {
        let value = self.binary_value(a, b, |x, y| x.add(y))?;
        Ok(self.push(value, Op::Add(a, b)))
    }

    /// Add a rank-1 bias `b` to every row of rank-2 `a`.
    pub fn add_row(&self, a: Var, b: Var) -> Result<Var> {
        let value = self.binary_value(a, b, |x, y| -> Result<Tensor> {
            if y.shape().len() != 1 || y.cols() != x.cols() || x.shape().len() != 2 {
                return Err(Error::ShapeMismatch {
                    op: "add_row",
                    left: x.shape().to_vec(),
                    right: y.shape().to_vec(),
                });
            }
            let mut out = x.clone();
            let n = x.cols();
            for i in 0..x.rows() {
                let row = &mut out.data_mut()[i * n..(i + 1) * n];
                for (o, &bias) in row.iter_mut().zip(y.data()) {
                    *o += bias;
                }
            }
            Ok(out)
        })?;
        Ok(self.push(value, Op::AddRow(a, b)))
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var> {
        let value = self.binary_value(a, b, |x, y| x.sub(y))?;
        Ok(self.push(value, Op::Sub(a, b)))
    }

    pub fn mul_elem(&self, a: Var, b: Var) -> Result<Var> {
        let value = self.binary_value(a, b, |x, y| x.mul_elem(y))?;
        Ok(self.push(value, Op::MulElem(a, b)))
    }

    pub fn scale(&self, a: Var, c: f64) -> Var {
        let value = self.with_value(a, |x| x.scale(c));
        self.push(value, Op::Scale(a, c))
    }

    pub fn tanh(&self, a: Var) -> Var {
        let value = self.with_value(a, |x| x.map(f64::tanh));
        self.push(value, Op::Tanh(a))
    }

    pub fn relu(&self, a: Var) -> Var {
        let value = self.with_value(a, |x| x.map(|v| if v > 0.0 { v } else { 0.0 }));
        self.push(value, Op::Relu(a))
    }

    pub fn softmax(&self, a: Var, axis: usize) -> Result<Var> {
        let value = self.with_value(a, |x| x.softmax(axis))?;
        Ok(self.push(value, Op::Softmax(a, axis)))
    }

    /// Mean multi-class cross-entropy of row logits against class indices.
    pub fn cross_entropy_logits(&self, logits: Var, targets: &[usize]) -> Result<Var> {
        let value = self.with_value(logits, |x| -> Result<Tensor> {
            if x.shape().len() != 2 || x.rows() != targets.len() {
                return Err(Error::ShapeMismatch {
                    op: "cross_entropy_logits",
                    left: x.shape().to_vec(),
                    right: vec![targets.len()],
                });
            }
            let k = x.cols();
            let mut total = 0.0;
            for (i, &t) in targets.iter().enumerate() {
                if t >= k {
                    return Err(Error::Validation {
                        field: "target".into(),
                        reason: format!("class index {t} out of range for {k} classes"),
                    });
                }
                let row = x.row(i);
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln() + max;
                total += lse - row[t];
            }
            Ok(Tensor::scalar(total / targets.len() as f64))
        })?;
        Ok(self.push(
            value,
            Op::CrossEntropyLogits {
                logits,
                targets: targets.to_vec(),
            },
        ))
    }

    /// Mean over rows of the Huber penalty, summed over columns,
    /// against a constant target tensor.
    pub fn huber_to_const(&self, pred: Var, target: Tensor, delta: f64) -> Result<Var> {
        if delta <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: format!("must be positive, got {delta}"),
            });
        }
        let value = self.with_value(pred, |x| -> Result<Tensor> {
            if x.shape() != target.shape() {
                return Err(Error::ShapeMismatch {
                    op: "huber_to_const",
                    left: x.shape().to_vec(),
                    right: target.shape().to_vec(),
                });
            }
            let rows = x.rows() as f64;
            let mut total = 0.0;
            for (&p, &t) in x.data().iter().zip(target.data()) {
                let d = (p - t).abs();
                total += if d <= delta {
                    0.5 * d * d
                } else {
                    delta * (d - 0.5 * delta)
                };
            }
            Ok(Tensor::scalar(total / rows))
        })?;
        Ok(self.push(value, Op::HuberToConst { pred, target, delta }))
    }

    pub fn sum_all(&self, a: Var) -> Var {
        let value = self.with_value(a, |x| Tensor::scalar(x.sum()));
        self.push(value, Op::SumAll(a))
    }

    pub fn mean_all(&self, a: Var) -> Var {
        let value = self.with_value(a, |x| Tensor::scalar(x.mean()));
        self.push(value, Op::MeanAll(a))
    }

    /// [m,n] -> rank-1 [n], mean over rows.
    pub fn mean_axis0(&self, a: Var) -> Result<Var> {
        let value = self.with_value(a, |x| x.mean_axis0())?;
        Ok(self.push(value, Op::MeanAxis0(a)))
    }

    pub fn concat_rows(&self, parts: &[Var]) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let mut rows: Vec<Vec<f64>> = Vec::new();
            let mut cols = None;
            for &p in parts {
                let t = &nodes[p.0].value;
                if t.shape().len() != 2 {
                    return Err(Error::ShapeMismatch {
                        op: "concat_rows",
                        left: t.shape().to_vec(),
                        right: vec![0, 0],
                    });
                }
                match cols {
                    None => cols = Some(t.cols()),
                    Some(c) if c != t.cols() => {
                        return Err(Error::ShapeMismatch {
                            op: "concat_rows",
                            left: vec![c],
                            right: vec![t.cols()],
                        })
                    }
                    _ => {}
                }
                for i in 0..t.rows() {
                    rows.push(t.row(i).to_vec());
                }
            }
            Tensor::from_rows(&rows)?
        };
        Ok(self.push(value, Op::ConcatRows(parts.to_vec())))
    }

    pub fn slice_rows(&self, src: Var, start: usize, len: usize) -> Result<Var> {
        let value = self.with_value(src, |x| -> Result<Tensor> {
            if x.shape().len() != 2 || start + len > x.rows() {
                return Err(Error::ShapeMismatch {
                    op: "slice_rows",
                    left: x.shape().to_vec(),
                    right: vec![start, len],
                });
            }
            let c = x.cols();
            Tensor::matrix(len, c, x.data()[start * c..(start + len) * c].to_vec())
        })?;
        Ok(self.push(value, Op::SliceRows { src, start, len }))
    }

    pub fn slice_cols(&self, src: Var, start: usize, len: usize) -> Result<Var> {
        let value = self.with_value(src, |x| -> Result<Tensor> {
            if x.shape().len() != 2 || start + len > x.cols() {
                return Err(Error::ShapeMismatch {
                    op: "slice_cols",
                    left: x.shape().to_vec(),
                    right: vec![start, len],
                });
            }
            let (m, n) = (x.rows(), x.cols());
            let mut out = Vec::with_capacity(m * len);
            for i in 0..m {
                out.extend_from_slice(&x.data()[i * n + start..i * n + start + len]);
            }
            Tensor::matrix(m, len, out)
        })?;
        Ok(self.push(value, Op::SliceCols { src, start, len }))
    }

    pub fn concat_cols(&self, parts: &[Var]) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let m = nodes[parts[0].0].value.rows();
            let mut total_cols = 0;
            for &p in parts {
                let t = &nodes[p.0].value;
                if t.shape().len() != 2 || t.rows() != m {
                    return Err(Error::ShapeMismatch {
                        op: "concat_cols",
                        left: vec![m],
                        right: t.shape().to_vec(),
                    });
                }
                total_cols += t.cols();
            }
            let mut out = Vec::with_capacity(m * total_cols);
            for i in 0..m {
                for &p in parts {
                    out.extend_from_slice(nodes[p.0].value.row(i));
                }
            }
            Tensor::matrix(m, total_cols, out)?
        };
        Ok(self.push(value, Op::ConcatCols(parts.to_vec())))
    }

    pub fn transpose(&self, a: Var) -> Result<Var> {
        let value = self.with_value(a, |x| x.transpose())?;
        Ok(self.push(value, Op::Transpose(a)))
    }

    /// Row-wise layer normalization with trainable gain/shift.
    pub fn layer_norm(&self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let xv = &nodes[x.0].value;
            let gv = &nodes[gamma.0].value;
            let bv = &nodes[beta.0].value;
            if xv.shape().len() != 2
                || gv.shape() != [xv.cols()]
                || bv.shape() != [xv.cols()]
            {
                return Err(Error::ShapeMismatch {
                    op: "layer_norm",
                    left: xv.shape().to_vec(),
                    right: gv.shape().to_vec(),
                });
            }
            let (m, n) = (xv.rows(), xv.cols());
            let mut out = vec![0.0; m * n];
            for i in 0..m {
                let row = xv.row(i);
                let mean = row.iter().sum::<f64>() / n as f64;
                let var = row.iter().map(|&v| (v - mean).powi(2)).sum::<f64>() / n as f64;
                let inv = 1.0 / (var + eps).sqrt();
                for j in 0..n {
                    out[i * n + j] = (row[j] - mean) * inv * gv.data()[j] + bv.data()[j];
                }
            }
            Tensor::matrix(m, n, out)?
        };
        Ok(self.push(value, Op::LayerNorm { x, gamma, beta, eps }))
    }

    /// Identity forward; backward multiplies the upstream gradient by
    /// exactly `-lambda`.
    pub fn grad_reverse(&self, x: Var, lambda: f64) -> Result<Var> {
        if lambda < 0.0 || !lambda.is_finite() {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: format!("must be finite and >= 0, got {lambda}"),
            });
        }
        let value = self.value(x);
        Ok(self.push(value, Op::GradReverse(x, lambda)))
    }

    pub fn gather_rows(&self, src: Var, idx: &[usize]) -> Result<Var> {
        let value = self.with_value(src, |x| -> Result<Tensor> {
            if x.shape().len() != 2 {
                return Err(Error::ShapeMismatch {
                    op: "gather_rows",
                    left: x.shape().to_vec(),
                    right: vec![0, 0],
                });
            }
            let c = x.cols();
            let mut out = Vec::with_capacity(idx.len() * c);
            for &i in idx {
                if i >= x.rows() {
                    return Err(Error::InvalidParameter {
                        name: "idx",
                        reason: format!("row {i} out of range ({} rows)", x.rows()),
                    });
                }
                out.extend_from_slice(x.row(i));
            }
            Tensor::matrix(idx.len(), c, out)
        })?;
        Ok(self.push(
            value,
            Op::GatherRows {
                src,
                idx: idx.to_vec(),
            },
        ))
    }

    /// [g*k, n] -> [g, n], mean over consecutive groups of `group` rows.
    pub fn avg_pool_rows(&self, src: Var, group: usize) -> Result<Var> {
        let value = self.with_value(src, |x| -> Result<Tensor> {
            if x.shape().len() != 2 || group == 0 || x.rows() % group != 0 {
                return Err(Error::ShapeMismatch {
                    op: "avg_pool_rows",
                    left: x.shape().to_vec(),
                    right: vec![group],
                });
            }
            let (m, n) = (x.rows(), x.cols());
            let g = m / group;
            let mut out = vec![0.0; g * n];
            for i in 0..m {
                let o = i / group;
                for j in 0..n {
                    out[o * n + j] += x.data()[i * n + j] / group as f64;
                }
            }
            Tensor::matrix(g, n, out)
        })?;
        Ok(self.push(value, Op::AvgPoolRows { src, group }))
    }

    /// Reverse sweep from a scalar loss. Accumulates `d loss / d node` into
    /// every node's `grad`; leaves created earlier keep any prior gradient.
    pub fn backward(&self, loss: Var) -> Result<()> {
        let mut nodes = self.nodes.borrow_mut();
        if !nodes[loss.0].value.is_scalar() {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                nodes[loss.0].value.shape()
            )));
        }
        let n = nodes.len();
        // Working gradients, separate from node storage so parent values can
        // be read while gradients accumulate.
        let mut grads: Vec<Option<Tensor>> = (0..n).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue, // not reachable from the loss
            };
            nodes[i].grad.add_scaled(&g, 1.0).expect("grad shape");
            {
                let nodes = &*nodes;
                let mut send = |v: Var, contrib: Tensor| {
                    match &mut grads[v.0] {
                        Some(acc) => acc.add_scaled(&contrib, 1.0).expect("grad shape"),
                        slot @ None => *slot = Some(contrib),
                    };
                };
                match &nodes[i].op {
                    Op::Leaf { .. } => {}
                    Op::Matmul(a, b) => {
                        let (av, bv) = (&nodes[a.0].value, &nodes[b.0].value);
                        send(*a, g.matmul_nt(bv)?);
                        send(*b, av.matmul_tn(&g)?);
                    }
                    Op::MatmulNT(a, b) => {
                        let (av, bv) = (&nodes[a.0].value, &nodes[b.0].value);
                        send(*a, g.matmul(bv)?);
                        send(*b, g.matmul_tn(av)?);
                    }
                    Op::Add(a, b) => {
                        send(*a, g.clone());
                        send(*b, g);
                    }
                    Op::AddRow(a, b) => {
                        let n_cols = g.cols();
                        let mut bias = vec![0.0; n_cols];
                        for r in 0..g.rows() {
                            for (acc, &v) in bias.iter_mut().zip(g.row(r)) {
                                *acc += v;
                            }
                        }
                        send(*a, g);
                        send(*b, Tensor::vector(bias));
                    }
                    Op::Sub(a, b) => {
                        send(*a, g.clone());
                        send(*b, g.scale(-1.0));
                    }
                    Op::MulElem(a, b) => {
                        let (av, bv) = (&nodes[a.0].value, &nodes[b.0].value);
                        send(*a, g.mul_elem(bv)?);
                        send(*b, g.mul_elem(av)?);
                    }
                    Op::Scale(a, c) => send(*a, g.scale(*c)),
                    Op::Tanh(a) => {
                        let y = &nodes[i].value;
                        let d = g
                            .data()
                            .iter()
                            .zip(y.data())
                            .map(|(&gv, &yv)| gv * (1.0 - yv * yv))
                            .collect();
                        send(*a, Tensor::new(y.shape().to_vec(), d)?);
                    }
                    Op::Relu(a) => {
                        let xv = &nodes[a.0].value;
                        let d = g
                            .data()
                            .iter()
                            .zip(xv.data())
                            .map(|(&gv, &x)| if x > 0.0 { gv } else { 0.0 })
                            .collect();
                        send(*a, Tensor::new(xv.shape().to_vec(), d)?);
                    }
                    Op::Softmax(a, axis) => {
                        let y = &nodes[i].value;
                        send(*a, softmax_backward(&g, y, *axis)?);
                    }
                    Op::CrossEntropyLogits { logits, targets } => {
                        let x = &nodes[logits.0].value;
                        let scale = g.data()[0] / targets.len() as f64;
                        let mut d = x.softmax(1)?.scale(scale);
                        let k = x.cols();
                        for (r, &t) in targets.iter().enumerate() {
                            d.data_mut()[r * k + t] -= scale;
                        }
                        send(*logits, d);
                    }
                    Op::HuberToConst {
                        pred,
                        target,
                        delta,
                    } => {
                        let x = &nodes[pred.0].value;
                        let scale = g.data()[0] / x.rows() as f64;
                        let d = x
                            .data()
                            .iter()
                            .zip(target.data())
                            .map(|(&p, &t)| (p - t).clamp(-delta, *delta) * scale)
                            .collect();
                        send(*pred, Tensor::new(x.shape().to_vec(), d)?);
                    }
                    Op::SumAll(a) => {
                        let shape = nodes[a.0].value.shape().to_vec();
                        send(*a, Tensor::filled(&shape, g.data()[0]));
                    }
                    Op::MeanAll(a) => {
                        let shape = nodes[a.0].value.shape().to_vec();
                        let numel: usize = shape.iter().product();
                        send(*a, Tensor::filled(&shape, g.data()[0] / numel as f64));
                    }
                    Op::MeanAxis0(a) => {
                        let src = &nodes[a.0].value;
                        let (m, nc) = (src.rows(), src.cols());
                        let mut d = vec![0.0; m * nc];
                        for r in 0..m {
                            for j in 0..nc {
                                d[r * nc + j] = g.data()[j] / m as f64;
                            }
                        }
                        send(*a, Tensor::matrix(m, nc, d)?);
                    }
                    Op::ConcatRows(parts) => {
                        let c = g.cols();
                        let mut start = 0;
                        for &p in parts {
                            let rows = nodes[p.0].value.rows();
                            let d = g.data()[start * c..(start + rows) * c].to_vec();
                            send(p, Tensor::matrix(rows, c, d)?);
                            start += rows;
                        }
                    }
                    Op::SliceRows { src, start, len } => {
                        let s = &nodes[src.0].value;
                        let c = s.cols();
                        let mut d = Tensor::zeros(s.shape());
                        d.data_mut()[start * c..(start + len) * c].copy_from_slice(g.data());
                        send(*src, d);
                    }
                    Op::SliceCols { src, start, len } => {
                        let s = &nodes[src.0].value;
                        let (m, nc) = (s.rows(), s.cols());
                        let mut d = Tensor::zeros(s.shape());
                        for r in 0..m {
                            d.data_mut()[r * nc + start..r * nc + start + len]
                                .copy_from_slice(g.row(r));
                        }
                        send(*src, d);
                    }
                    Op::ConcatCols(parts) => {
                        let m = g.rows();
                        let mut start = 0;
                        for &p in parts {
                            let pc = nodes[p.0].value.cols();
                            let mut d = Vec::with_capacity(m * pc);
                            for r in 0..m {
                                d.extend_from_slice(&g.row(r)[start..start + pc]);
                            }
                            send(p, Tensor::matrix(m, pc, d)?);
                            start += pc;
                        }
                    }
                    Op::Transpose(a) => send(*a, g.transpose()?),
                    Op::LayerNorm { x, gamma, beta, eps } => {
                        let xv = &nodes[x.0].value;
                        let gv = &nodes[gamma.0].value;
                        let (dx, dgamma, dbeta) = layer_norm_backward(&g, xv, gv, *eps)?;
                        send(*x, dx);
                        send(*gamma, dgamma);
                        send(*beta, dbeta);
                    }
                    Op::GradReverse(a, lambda) => send(*a, g.scale(-lambda)),
                    Op::GatherRows { src, idx } => {
                        let s = &nodes[src.0].value;
                        let c = s.cols();
                        let mut d = Tensor::zeros(s.shape());
                        for (r, &i) in idx.iter().enumerate() {
                            let dst = &mut d.data_mut()[i * c..(i + 1) * c];
                            for (o, &v) in dst.iter_mut().zip(g.row(r)) {
                                *o += v;
                            }
                        }
                        send(*src, d);
                    }
                    Op::AvgPoolRows { src, group } => {
                        let s = &nodes[src.0].value;
                        let (m, nc) = (s.rows(), s.cols());
                        let mut d = vec![0.0; m * nc];
                        for r in 0..m {
                            let o = r / group;
                            for j in 0..nc {
                                d[r * nc + j] = g.data()[o * nc + j] / *group as f64;
                            }
                        }
                        send(*src, Tensor::matrix(m, nc, d)?);
                    }
                }
            }
        }
        Ok(())
    }
}

fn softmax_backward(g: &Tensor, y: &Tensor, axis: usize) -> Result<Tensor> {
    let (m, n) = if y.shape().len() == 1 {
        (1, y.cols())
    } else {
        (y.rows(), y.cols())
    };
    let along_rows = y.shape().len() == 1 || axis == 1;
    let mut d = vec![0.0; m * n];
    if along_rows {
        for i in 0..m {
            let dot: f64 = (0..n)
                .map(|j| g.data()[i * n + j] * y.data()[i * n + j])
                .sum();
            for j in 0..n {
                let idx = i * n + j;
                d[idx] = (g.data()[idx] - dot) * y.data()[idx];
            }
        }
    } else {
        for j in 0..n {
            let dot: f64 = (0..m)
                .map(|i| g.data()[i * n + j] * y.data()[i * n + j])
                .sum();
            for i in 0..m {
                let idx = i * n + j;
                d[idx] = (g.data()[idx] - dot) * y.data()[idx];
            }
        }
    }
    Tensor::new(y.shape().to_vec(), d)
}

fn layer_norm_backward(
    g: &Tensor,
    x: &Tensor,
    gamma: &Tensor,
    eps: f64,
) -> Result<(Tensor, Tensor, Tensor)> {
    let (m, n) = (x.rows(), x.cols());
    let mut dx = vec![0.0; m * n];
    let mut dgamma = vec![0.0; n];
    let mut dbeta = vec![0.0; n];
    for i in 0..m {
        let row = x.row(i);
        let grow = g.row(i);
        let mean = row.iter().sum::<f64>() / n as f64;
        let var = row.iter().map(|&v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let inv = 1.0 / (var + eps).sqrt();
        let xhat: Vec<f64> = row.iter().map(|&v| (v - mean) * inv).collect();
        let gh: Vec<f64> = grow
            .iter()
            .zip(gamma.data())
            .map(|(&gv, &ga)| gv * ga)
            .collect();
        let mean_gh = gh.iter().sum::<f64>() / n as f64;
        let mean_gh_xhat = gh
            .iter()
            .zip(&xhat)
            .map(|(&a, &b)| a * b)
            .sum::<f64>()
            / n as f64;
        for j in 0..n {
            dx[i * n + j] = inv * (gh[j] - mean_gh - xhat[j] * mean_gh_xhat);
            dgamma[j] += grow[j] * xhat[j];
            dbeta[j] += grow[j];
        }
    }
    Ok((
        Tensor::matrix(m, n, dx)?,
        Tensor::vector(dgamma),
        Tensor::vector(dbeta),
    ))
}
