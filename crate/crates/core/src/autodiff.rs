//! Tape-based reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! Every operation appends a node to the [`Tape`]; node ids are handed out in
//! creation order, so the id order is already a topological order of the
//! compute graph. `backward` walks the ids in reverse and visits each node
//! at most once.
//!
//! ```
//! use ehgnn::autodiff::Tape;
//! use ehgnn::tensor::Tensor;
//!
//! let mut tape = Tape::new();
//! let w = tape.leaf(Tensor::from_nested(&[[1.0, 1.0]]), true);
//! let x = tape.constant(Tensor::from_nested(&[[2.0], [3.0]]));
//! let y = tape.matmul(w, x).unwrap();
//! let loss = tape.sum(y);
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(w).unwrap().data(), &[2.0, 3.0]);
//! ```

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::optim::{ParamId, ParamStore};
use crate::tensor::{Tensor, TensorError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("backward requires a scalar (1x1) loss, got {0}x{1}")]
    NotScalar(usize, usize),
    #[error("backward already ran on this tape; call reset() before reusing it")]
    AlreadyBackpropagated,
    #[error("no gradient path: the loss does not depend on any tensor that requires grad")]
    NoGradientPath,
}

type Result<T> = std::result::Result<T, AutodiffError>;

/// Handle to a tensor recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduce {
    Sum,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unary {
    Tanh,
    Relu,
    Sigmoid,
    RowSoftmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binary {
    Add,
    Sub,
    Mul,
}

#[derive(Debug)]
enum Op {
    Leaf { param: Option<ParamId> },
    MatMul(Var, Var),
    Binary(Binary, Var, Var),
    AddBias(Var, Var),
    Scale(Var, f64),
    Unary(Unary, Var),
    Gather {
        src: Var,
        index: Arc<[usize]>,
    },
    Scatter {
        src: Var,
        index: Arc<[usize]>,
        // 1/count per target for mean, 1 for sum
        weights: Vec<f64>,
    },
    RowScale(Var, Var),
    VecMat {
        x: Var,
        theta: Var,
        d_out: usize,
    },
    Transpose(Var),
    ConcatCols(Var, Var),
    Sum(Var),
    Mse {
        pred: Var,
        target: Tensor,
    },
    SoftmaxCrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Tensor,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records a compute graph. One tape per forward/backward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Gradients produced by [`Tape::backward`], keyed by leaf.
#[derive(Debug, Default)]
pub struct Gradients {
    leaves: HashMap<usize, Tensor>,
    params: Vec<(ParamId, Tensor)>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.leaves.get(&v.0)
    }

    /// Gradients for leaves registered through [`Tape::param`].
    pub fn params(&self) -> &[(ParamId, Tensor)] {
        &self.params
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops the recorded graph so the tape can be reused.
    pub fn reset(&mut self) {
        self.nodes.clear();
        self.consumed = false;
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        debug_assert!(!self.consumed, "recording on a consumed tape");
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf { param: None }, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    /// Records a trainable parameter; its gradient is reported under `id`.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(
            store.value(id).clone(),
            Op::Leaf { param: Some(id) },
            true,
        )
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    pub fn binary(&mut self, kind: Binary, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        let value = match kind {
            Binary::Add => va.zip_map(vb, "add", |x, y| x + y)?,
            Binary::Sub => va.zip_map(vb, "sub", |x, y| x - y)?,
            Binary::Mul => va.zip_map(vb, "mul", |x, y| x * y)?,
        };
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::Binary(kind, a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Mul, a, b)
    }

    /// Adds a `1 x cols` row vector to every row of `a`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(bias));
        if vb.rows() != 1 || vb.cols() != va.cols() {
            return Err(TensorError::Shape {
                op: "add_bias",
                left: va.shape(),
                right: vb.shape(),
            }
            .into());
        }
        let mut value = va.clone();
        let b = vb.row(0).to_vec();
        for r in 0..value.rows() {
            for (x, y) in value.row_mut(r).iter_mut().zip(&b) {
                *x += y;
            }
        }
        let rg = self.rg(&[a, bias]);
        Ok(self.push(value, Op::AddBias(a, bias), rg))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).scale(s);
        let rg = self.rg(&[a]);
        self.push(value, Op::Scale(a, s), rg)
    }

    pub fn unary(&mut self, kind: Unary, a: Var) -> Var {
        let va = self.value(a);
        let value = match kind {
            Unary::Tanh => va.map(f64::tanh),
            Unary::Relu => va.map(|x| x.max(0.0)),
            Unary::Sigmoid => va.map(sigmoid),
            Unary::RowSoftmax => row_softmax(va),
        };
        let rg = self.rg(&[a]);
        self.push(value, Op::Unary(kind, a), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(Unary::Tanh, a)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(Unary::Relu, a)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(Unary::Sigmoid, a)
    }

    pub fn row_softmax(&mut self, a: Var) -> Var {
        self.unary(Unary::RowSoftmax, a)
    }

    /// Tag-dispatched elementwise op: `add`, `sub`, `mul` take two operands,
    /// `tanh`, `relu`, `sigmoid`, `row_softmax` take one.
    pub fn elementwise(&mut self, tag: &str, a: Var, b: Option<Var>) -> Result<Var> {
        let binary = match tag {
            "add" => Some(Binary::Add),
            "sub" => Some(Binary::Sub),
            "mul" => Some(Binary::Mul),
            _ => None,
        };
        if let Some(kind) = binary {
            let b = b.ok_or_else(|| TensorError::UnknownOp(format!("{tag} (missing operand)")))?;
            return self.binary(kind, a, b);
        }
        let kind = match tag {
            "tanh" => Unary::Tanh,
            "relu" => Unary::Relu,
            "sigmoid" => Unary::Sigmoid,
            "row_softmax" | "softmax" => Unary::RowSoftmax,
            other => return Err(TensorError::UnknownOp(other.to_string()).into()),
        };
        Ok(self.unary(kind, a))
    }

    /// Row `i` of the output is row `index[i]` of `src`.
    pub fn gather(&mut self, src: Var, index: &Arc<[usize]>) -> Result<Var> {
        let vs = self.value(src);
        if let Some((position, &i)) = index.iter().enumerate().find(|(_, &i)| i >= vs.rows()) {
            return Err(TensorError::Index {
                position,
                index: i,
                bound: vs.rows(),
            }
            .into());
        }
        let value = vs.select_rows(index);
        let rg = self.rg(&[src]);
        Ok(self.push(
            value,
            Op::Gather {
                src,
                index: Arc::clone(index),
            },
            rg,
        ))
    }

    /// Row `t` of the output is the sum (or mean) of the rows of `src` whose
    /// index is `t`. Targets that receive nothing are zero, for both modes.
    pub fn scatter(
        &mut self,
        src: Var,
        index: &Arc<[usize]>,
        num_targets: usize,
        mode: Reduce,
    ) -> Result<Var> {
        let vs = self.value(src);
        if index.len() != vs.rows() {
            return Err(TensorError::Shape {
                op: "scatter",
                left: vs.shape(),
                right: (index.len(), 1),
            }
            .into());
        }
        let mut counts = vec![0usize; num_targets];
        for (position, &t) in index.iter().enumerate() {
            if t >= num_targets {
                return Err(TensorError::Index {
                    position,
                    index: t,
                    bound: num_targets,
                }
                .into());
            }
            counts[t] += 1;
        }
        let weights: Vec<f64> = match mode {
            Reduce::Sum => vec![1.0; num_targets],
            Reduce::Mean => counts
                .iter()
                .map(|&c| if c == 0 { 0.0 } else { 1.0 / c as f64 })
                .collect(),
        };
        let cols = vs.cols();
        let mut value = Tensor::zeros(num_targets, cols);
        for (s, &t) in index.iter().enumerate() {
            let w = weights[t];
            let src_row = vs.row(s);
            for (o, &x) in value.row_mut(t).iter_mut().zip(src_row) {
                *o += w * x;
            }
        }
        let rg = self.rg(&[src]);
        Ok(self.push(
            value,
            Op::Scatter {
                src,
                index: Arc::clone(index),
                weights,
            },
            rg,
        ))
    }

    /// Multiplies row `i` of `a` by the scalar `w[i]`; `w` is `rows x 1`.
    pub fn row_scale(&mut self, a: Var, w: Var) -> Result<Var> {
        let (va, vw) = (self.value(a), self.value(w));
        if vw.cols() != 1 || vw.rows() != va.rows() {
            return Err(TensorError::Shape {
                op: "row_scale",
                left: va.shape(),
                right: vw.shape(),
            }
            .into());
        }
        let mut value = va.clone();
        for r in 0..value.rows() {
            let s = vw.get(r, 0);
            value.row_mut(r).iter_mut().for_each(|x| *x *= s);
        }
        let rg = self.rg(&[a, w]);
        Ok(self.push(value, Op::RowScale(a, w), rg))
    }

    /// Row-wise vector-matrix product: row `k` of the output is
    /// `x[k] · reshape(theta[k], d_in x d_out)`, where `theta` rows hold the
    /// `d_in x d_out` matrices in row-major order.
    pub fn vec_mat(&mut self, x: Var, theta: Var, d_out: usize) -> Result<Var> {
        let (vx, vt) = (self.value(x), self.value(theta));
        let d_in = vx.cols();
        if vx.rows() != vt.rows() || vt.cols() != d_in * d_out {
            return Err(TensorError::Shape {
                op: "vec_mat",
                left: vx.shape(),
                right: vt.shape(),
            }
            .into());
        }
        let mut value = Tensor::zeros(vx.rows(), d_out);
        for k in 0..vx.rows() {
            let (xr, tr) = (vx.row(k), vt.row(k));
            let out = value.row_mut(k);
            for (i, &xi) in xr.iter().enumerate() {
                for (o, &t) in out.iter_mut().zip(&tr[i * d_out..(i + 1) * d_out]) {
                    *o += xi * t;
                }
            }
        }
        let rg = self.rg(&[x, theta]);
        Ok(self.push(value, Op::VecMat { x, theta, d_out }, rg))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        let rg = self.rg(&[a]);
        self.push(value, Op::Transpose(a), rg)
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.rows() != vb.rows() {
            return Err(TensorError::Shape {
                op: "concat_cols",
                left: va.shape(),
                right: vb.shape(),
            }
            .into());
        }
        let cols = va.cols() + vb.cols();
        let mut data = Vec::with_capacity(va.rows() * cols);
        for r in 0..va.rows() {
            data.extend_from_slice(va.row(r));
            data.extend_from_slice(vb.row(r));
        }
        let value = Tensor::new(va.rows(), cols, data)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::ConcatCols(a, b), rg))
    }

    /// Sum of all entries, as a 1x1 tensor.
    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum());
        let rg = self.rg(&[a]);
        self.push(value, Op::Sum(a), rg)
    }

    /// Column-wise mean over rows, `1 x cols`. An empty input gives zeros.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let rows = self.value(a).rows();
        let index: Arc<[usize]> = vec![0usize; rows].into();
        self.scatter(a, &index, 1, Reduce::Mean)
    }

    /// Mean squared error over all entries, as a 1x1 tensor.
    pub fn mse(&mut self, pred: Var, target: &Tensor) -> Result<Var> {
        let vp = self.value(pred);
        if vp.shape() != target.shape() {
            return Err(TensorError::Shape {
                op: "mse",
                left: vp.shape(),
                right: target.shape(),
            }
            .into());
        }
        let n = vp.len().max(1) as f64;
        let loss: f64 = vp
            .data()
            .iter()
            .zip(target.data())
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / n;
        let rg = self.rg(&[pred]);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::Mse {
                pred,
                target: target.clone(),
            },
            rg,
        ))
    }

    /// Mean softmax cross-entropy of `logits` rows against class `labels`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let vl = self.value(logits);
        if labels.len() != vl.rows() {
            return Err(TensorError::Shape {
                op: "softmax_cross_entropy",
                left: vl.shape(),
                right: (labels.len(), 1),
            }
            .into());
        }
        if let Some((position, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= vl.cols()) {
            return Err(TensorError::Index {
                position,
                index: l,
                bound: vl.cols(),
            }
            .into());
        }
        let probs = row_softmax(vl);
        let n = labels.len().max(1) as f64;
        let loss = labels
            .iter()
            .enumerate()
            .map(|(r, &l)| -log_softmax_at(vl.row(r), l))
            .sum::<f64>()
            / n;
        let rg = self.rg(&[logits]);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::SoftmaxCrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            rg,
        ))
    }

    /// Reverse pass from a scalar `loss`. Every leaf that requires grad gets
    /// an entry in the result (zeros if the loss does not reach it).
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(AutodiffError::AlreadyBackpropagated);
        }
        let (r, c) = self.shape(loss);
        if (r, c) != (1, 1) {
            return Err(AutodiffError::NotScalar(r, c));
        }
        if !self.nodes[loss.0].requires_grad {
            return Err(AutodiffError::NoGradientPath);
        }
        self.consumed = true;

        let mut grads: Vec<Option<Tensor>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(Tensor::scalar(1.0));

        let mut out = Gradients::default();
        for id in (0..=loss.0).rev() {
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else {
                if let Op::Leaf { param } = node.op {
                    let z = Tensor::zeros(node.value.rows(), node.value.cols());
                    if let Some(p) = param {
                        out.params.push((p, z.clone()));
                    }
                    out.leaves.insert(id, z);
                }
                continue;
            };
            self.propagate(id, g, &mut grads, &mut out);
        }
        // Leaves created after the loss are unreachable from it.
        for id in loss.0 + 1..self.nodes.len() {
            let node = &self.nodes[id];
            if let (Op::Leaf { param }, true) = (&node.op, node.requires_grad) {
                let z = Tensor::zeros(node.value.rows(), node.value.cols());
                if let Some(p) = param {
                    out.params.push((*p, z.clone()));
                }
                out.leaves.insert(id, z);
            }
        }
        Ok(out)
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => acc.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    fn propagate(
        &self,
        id: usize,
        g: Tensor,
        grads: &mut [Option<Tensor>],
        out: &mut Gradients,
    ) {
        let node = &self.nodes[id];
        match &node.op {
            Op::Leaf { param } => {
                if let Some(p) = param {
                    out.params.push((*p, g.clone()));
                }
                out.leaves.insert(id, g);
            }
            Op::MatMul(a, b) => {
                if self.requires_grad(*a) {
                    let ga = g.matmul_t(self.value(*b)).expect("matmul grad shape");
                    self.accumulate(grads, *a, ga);
                }
                if self.requires_grad(*b) {
                    let gb = self.value(*a).t_matmul(&g).expect("matmul grad shape");
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Binary(kind, a, b) => match kind {
                Binary::Add => {
                    self.accumulate(grads, *a, g.clone());
                    self.accumulate(grads, *b, g);
                }
                Binary::Sub => {
                    self.accumulate(grads, *a, g.clone());
                    self.accumulate(grads, *b, g.scale(-1.0));
                }
                Binary::Mul => {
                    if self.requires_grad(*a) {
                        let ga = g.zip_map(self.value(*b), "mul", |x, y| x * y).unwrap();
                        self.accumulate(grads, *a, ga);
                    }
                    if self.requires_grad(*b) {
                        let gb = g.zip_map(self.value(*a), "mul", |x, y| x * y).unwrap();
                        self.accumulate(grads, *b, gb);
                    }
                }
            },
            Op::AddBias(a, bias) => {
                if self.requires_grad(*bias) {
                    let mut gb = Tensor::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, x) in gb.row_mut(0).iter_mut().zip(g.row(r)) {
                            *o += x;
                        }
                    }
                    self.accumulate(grads, *bias, gb);
                }
                self.accumulate(grads, *a, g);
            }
            Op::Scale(a, s) => self.accumulate(grads, *a, g.scale(*s)),
            Op::Unary(kind, a) => {
                let y = &node.value;
                let ga = match kind {
                    Unary::Tanh => g.zip_map(y, "tanh", |g, y| g * (1.0 - y * y)).unwrap(),
                    Unary::Relu => g.zip_map(y, "relu", |g, y| if y > 0.0 { g } else { 0.0 }).unwrap(),
                    Unary::Sigmoid => g.zip_map(y, "sigmoid", |g, y| g * y * (1.0 - y)).unwrap(),
                    Unary::RowSoftmax => {
                        let mut ga = Tensor::zeros(y.rows(), y.cols());
                        for r in 0..y.rows() {
                            let (yr, gr) = (y.row(r), g.row(r));
                            let inner = crate::tensor::dot(yr, gr);
                            for ((o, &yi), &gi) in ga.row_mut(r).iter_mut().zip(yr).zip(gr) {
                                *o = yi * (gi - inner);
                            }
                        }
                        ga
                    }
                };
                self.accumulate(grads, *a, ga);
            }
            Op::Gather { src, index } => {
                let vs = self.value(*src);
                let mut gs = Tensor::zeros(vs.rows(), vs.cols());
                for (i, &s) in index.iter().enumerate() {
                    for (o, x) in gs.row_mut(s).iter_mut().zip(g.row(i)) {
                        *o += x;
                    }
                }
                self.accumulate(grads, *src, gs);
            }
            Op::Scatter {
                src,
                index,
                weights,
            } => {
                let cols = g.cols();
                let mut gs = Tensor::zeros(index.len(), cols);
                for (s, &t) in index.iter().enumerate() {
                    let w = weights[t];
                    for (o, x) in gs.row_mut(s).iter_mut().zip(g.row(t)) {
                        *o = w * x;
                    }
                }
                self.accumulate(grads, *src, gs);
            }
            Op::RowScale(a, w) => {
                let (va, vw) = (self.value(*a), self.value(*w));
                if self.requires_grad(*a) {
                    let mut ga = g.clone();
                    for r in 0..ga.rows() {
                        let s = vw.get(r, 0);
                        ga.row_mut(r).iter_mut().for_each(|x| *x *= s);
                    }
                    self.accumulate(grads, *a, ga);
                }
                if self.requires_grad(*w) {
                    let gw: Vec<f64> = (0..va.rows())
                        .map(|r| crate::tensor::dot(va.row(r), g.row(r)))
                        .collect();
                    self.accumulate(grads, *w, Tensor::column(&gw));
                }
            }
            Op::VecMat { x, theta, d_out } => {
                let (vx, vt) = (self.value(*x), self.value(*theta));
                let d_out = *d_out;
                if self.requires_grad(*x) {
                    let mut gx = Tensor::zeros(vx.rows(), vx.cols());
                    for k in 0..vx.rows() {
                        let (tr, gr) = (vt.row(k), g.row(k));
                        for (i, o) in gx.row_mut(k).iter_mut().enumerate() {
                            *o = crate::tensor::dot(&tr[i * d_out..(i + 1) * d_out], gr);
                        }
                    }
                    self.accumulate(grads, *x, gx);
                }
                if self.requires_grad(*theta) {
                    let mut gt = Tensor::zeros(vt.rows(), vt.cols());
                    for k in 0..vx.rows() {
                        let (xr, gr) = (vx.row(k), g.row(k));
                        let out = gt.row_mut(k);
                        for (i, &xi) in xr.iter().enumerate() {
                            for (o, &gk) in out[i * d_out..(i + 1) * d_out].iter_mut().zip(gr) {
                                *o = xi * gk;
                            }
                        }
                    }
                    self.accumulate(grads, *theta, gt);
                }
            }
            Op::Transpose(a) => self.accumulate(grads, *a, g.transpose()),
            Op::ConcatCols(a, b) => {
                let ca = self.value(*a).cols();
                let cb = self.value(*b).cols();
                let mut ga = Vec::with_capacity(g.rows() * ca);
                let mut gb = Vec::with_capacity(g.rows() * cb);
                for r in 0..g.rows() {
                    let row = g.row(r);
                    ga.extend_from_slice(&row[..ca]);
                    gb.extend_from_slice(&row[ca..]);
                }
                self.accumulate(grads, *a, Tensor::new(g.rows(), ca, ga).unwrap());
                self.accumulate(grads, *b, Tensor::new(g.rows(), cb, gb).unwrap());
            }
            Op::Sum(a) => {
                let (r, c) = self.shape(*a);
                self.accumulate(grads, *a, Tensor::filled(r, c, g.data()[0]));
            }
            Op::Mse { pred, target } => {
                let vp = self.value(*pred);
                let k = 2.0 * g.data()[0] / vp.len().max(1) as f64;
                let gp = vp.zip_map(target, "mse", |p, t| k * (p - t)).unwrap();
                self.accumulate(grads, *pred, gp);
            }
            Op::SoftmaxCrossEntropy {
                logits,
                labels,
                probs,
            } => {
                let k = g.data()[0] / labels.len().max(1) as f64;
                let mut gl = probs.scale(k);
                for (r, &l) in labels.iter().enumerate() {
                    let v = gl.get(r, l);
                    gl.set(r, l, v - k);
                }
                self.accumulate(grads, *logits, gl);
            }
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn row_softmax(t: &Tensor) -> Tensor {
    let mut out = t.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            continue;
        }
        let mut total = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            total += *x;
        }
        row.iter_mut().for_each(|x| *x /= total);
    }
    out
}

fn log_softmax_at(row: &[f64], l: usize) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    row[l] - lse
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx(v: &[usize]) -> Arc<[usize]> {
        v.to_vec().into()
    }

    #[test]
    fn elementwise_examples() {
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::scalar(0.0));
        let t = tape.elementwise("tanh", z, None).unwrap();
        assert_eq!(tape.value(t).item(), Some(0.0));

        let a = tape.constant(Tensor::from_nested(&[[0.0, 0.0]]));
        let s = tape.row_softmax(a);
        assert_eq!(tape.value(s).data(), &[0.5, 0.5]);

        let a = tape.constant(Tensor::from_nested(&[[1.0, 2.0]]));
        let b = tape.constant(Tensor::from_nested(&[[3.0, 4.0]]));
        let c = tape.elementwise("add", a, Some(b)).unwrap();
        assert_eq!(tape.value(c).data(), &[4.0, 6.0]);
    }

    #[test]
    fn elementwise_errors() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(1, 2));
        let b = tape.constant(Tensor::zeros(2, 1));
        assert!(matches!(
            tape.elementwise("add", a, Some(b)),
            Err(AutodiffError::Tensor(TensorError::Shape { .. }))
        ));
        assert!(matches!(
            tape.elementwise("cosh", a, None),
            Err(AutodiffError::Tensor(TensorError::UnknownOp(_)))
        ));
    }

    #[test]
    fn scatter_examples() {
        let mut tape = Tape::new();
        let src = tape.constant(Tensor::column(&[1.0, 2.0, 3.0]));
        let out = tape.scatter(src, &idx(&[0, 0, 1]), 2, Reduce::Sum).unwrap();
        assert_eq!(tape.value(out).data(), &[3.0, 3.0]);

        let src = tape.constant(Tensor::column(&[4.0, 6.0]));
        let out = tape.scatter(src, &idx(&[0, 0]), 1, Reduce::Mean).unwrap();
        assert_eq!(tape.value(out).data(), &[5.0]);

        let src = tape.constant(Tensor::column(&[1.0]));
        let out = tape.scatter(src, &idx(&[0]), 2, Reduce::Sum).unwrap();
        assert_eq!(tape.value(out).data(), &[1.0, 0.0]);
        let out = tape.scatter(src, &idx(&[0]), 2, Reduce::Mean).unwrap();
        assert_eq!(tape.value(out).data(), &[1.0, 0.0]);
    }

    #[test]
    fn scatter_reports_offending_position() {
        let mut tape = Tape::new();
        let src = tape.constant(Tensor::column(&[1.0, 2.0, 3.0]));
        let err = tape.scatter(src, &idx(&[0, 5, 1]), 2, Reduce::Sum).unwrap_err();
        assert_eq!(
            err,
            AutodiffError::Tensor(TensorError::Index {
                position: 1,
                index: 5,
                bound: 2
            })
        );
    }

    #[test]
    fn backward_hand_chain_rule() {
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::from_nested(&[[1.0, 1.0]]), true);
        let x = tape.constant(Tensor::from_nested(&[[2.0], [3.0]]));
        let y = tape.matmul(w, x).unwrap();
        let loss = tape.sum(y);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(w).unwrap().data(), &[2.0, 3.0]);
    }

    #[test]
    fn backward_half_square() {
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::scalar(3.0), true);
        let sq = tape.mul(w, w).unwrap();
        let loss = tape.scale(sq, 0.5);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(w).unwrap().item(), Some(3.0));
    }

    #[test]
    fn backward_errors() {
        let mut tape = Tape::new();
        let c = tape.constant(Tensor::scalar(1.0));
        assert_eq!(tape.backward(c).unwrap_err(), AutodiffError::NoGradientPath);

        let w = tape.leaf(Tensor::zeros(2, 1), true);
        assert_eq!(tape.backward(w).unwrap_err(), AutodiffError::NotScalar(2, 1));

        let w = tape.leaf(Tensor::scalar(2.0), true);
        let l = tape.scale(w, 2.0);
        tape.backward(l).unwrap();
        assert_eq!(tape.backward(l).unwrap_err(), AutodiffError::AlreadyBackpropagated);

        tape.reset();
        let w = tape.leaf(Tensor::scalar(2.0), true);
        let l = tape.scale(w, 2.0);
        assert_eq!(tape.backward(l).unwrap().get(w).unwrap().item(), Some(2.0));
    }

    #[test]
    fn unreachable_leaf_gets_zero_grad() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::scalar(1.0), true);
        let b = tape.leaf(Tensor::zeros(1, 3), true);
        let l = tape.scale(a, 4.0);
        let g = tape.backward(l).unwrap();
        assert_eq!(g.get(b).unwrap(), &Tensor::zeros(1, 3));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::from_nested(&[[1.0, -3.0, 700.0], [0.1, 0.2, 0.3]]));
        let s = tape.row_softmax(a);
        for r in 0..2 {
            let total: f64 = tape.value(s).row(r).iter().sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
        assert!(tape.value(s).all_finite());
    }

    #[test]
    fn cross_entropy_uniform_logits() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::zeros(2, 4), true);
        let l = tape.softmax_cross_entropy(a, &[1, 3]).unwrap();
        assert!((tape.value(l).item().unwrap() - 4f64.ln()).abs() < 1e-12);
    }
}
