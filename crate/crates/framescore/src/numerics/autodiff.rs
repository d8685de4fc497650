//! Reverse-mode differentiation over a recorded computation graph.
//!
//! A [`Tape`] records matrix-valued nodes; [`Var`] is a cheap handle into it.
//! Forward values come from the kernels in [`super::tensor`]; each op carries
//! a hand-written backward rule. Shape errors on the tape are programmer
//! errors and panic — fallible validation happens at the API boundaries
//! before a graph is built.

use std::cell::RefCell;
use std::rc::Rc;

use super::tensor::{self, Tensor2, LAYER_NORM_EPS};
use crate::error::Result;

#[derive(Clone, Default)]
pub struct Tape {
    inner: Rc<RefCell<TapeInner>>,
}

#[derive(Default)]
struct TapeInner {
    values: Vec<Tensor2>,
    ops: Vec<Op>,
    grads: Vec<Tensor2>,
}

#[derive(Clone)]
pub struct Var {
    tape: Tape,
    idx: usize,
}

enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    MatMul(usize, usize),
    Transpose(usize),
    AddRowBroadcast(usize, usize),
    SoftmaxRows(usize),
    LayerNorm { x: usize, gain: usize, bias: usize },
    Relu(usize),
    Sigmoid(usize),
    SliceCols { x: usize, start: usize },
    ConcatCols(usize, usize),
    MeanAll(usize),
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    /// Record an input node. Leaves are both trainable parameters and
    /// constants; gradients are only read back for the leaves a caller
    /// cares about.
    pub fn leaf(&self, value: &Tensor2) -> Var {
        self.push(value.clone(), Op::Leaf)
    }

    fn push(&self, value: Tensor2, op: Op) -> Var {
        let mut inner = self.inner.borrow_mut();
        let idx = inner.values.len();
        inner.values.push(value);
        inner.ops.push(op);
        Var {
            tape: self.clone(),
            idx,
        }
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Var {
    pub fn value(&self) -> Tensor2 {
        self.tape.inner.borrow().values[self.idx].clone()
    }

    pub fn shape(&self) -> (usize, usize) {
        let inner = self.tape.inner.borrow();
        inner.values[self.idx].shape()
    }

    pub fn rows(&self) -> usize {
        self.shape().0
    }

    pub fn cols(&self) -> usize {
        self.shape().1
    }

    /// Gradient of the last [`Var::backward`] target with respect to this
    /// node. Zero tensor if backward has not run.
    pub fn grad(&self) -> Tensor2 {
        let inner = self.tape.inner.borrow();
        if self.idx < inner.grads.len() {
            inner.grads[self.idx].clone()
        } else {
            let (r, c) = inner.values[self.idx].shape();
            Tensor2::zeros(r, c)
        }
    }

    pub fn tape(&self) -> &Tape {
        &self.tape
    }

    fn with(&self, other: &Var, f: impl FnOnce(&Tensor2, &Tensor2) -> Tensor2, op: Op) -> Var {
        assert!(
            Rc::ptr_eq(&self.tape.inner, &other.tape.inner),
            "vars must share a tape"
        );
        let value = {
            let inner = self.tape.inner.borrow();
            f(&inner.values[self.idx], &inner.values[other.idx])
        };
        self.tape.push(value, op)
    }

    fn unary(&self, f: impl FnOnce(&Tensor2) -> Tensor2, op: Op) -> Var {
        let value = {
            let inner = self.tape.inner.borrow();
            f(&inner.values[self.idx])
        };
        self.tape.push(value, op)
    }

    pub fn add(&self, other: &Var) -> Var {
        self.with(
            other,
            |a, b| a.add(b).unwrap(),
            Op::Add(self.idx, other.idx),
        )
    }

    pub fn sub(&self, other: &Var) -> Var {
        self.with(
            other,
            |a, b| a.sub(b).unwrap(),
            Op::Sub(self.idx, other.idx),
        )
    }

    pub fn mul(&self, other: &Var) -> Var {
        self.with(
            other,
            |a, b| a.hadamard(b).unwrap(),
            Op::Mul(self.idx, other.idx),
        )
    }

    pub fn scale(&self, k: f64) -> Var {
        self.unary(|a| a.scale(k), Op::Scale(self.idx, k))
    }

    pub fn matmul(&self, other: &Var) -> Var {
        self.with(
            other,
            |a, b| tensor::matmul(a, b).unwrap(),
            Op::MatMul(self.idx, other.idx),
        )
    }

    pub fn transpose(&self) -> Var {
        self.unary(|a| a.transpose(), Op::Transpose(self.idx))
    }

    /// Broadcast-add a 1 x cols bias row to every row.
    pub fn add_row(&self, bias: &Var) -> Var {
        self.with(
            bias,
            |a, b| a.add_row_broadcast(b).unwrap(),
            Op::AddRowBroadcast(self.idx, bias.idx),
        )
    }

    pub fn softmax_rows(&self) -> Var {
        self.unary(tensor::softmax_rows, Op::SoftmaxRows(self.idx))
    }

    pub fn layer_norm(&self, gain: &Var, bias: &Var) -> Var {
        assert!(
            Rc::ptr_eq(&self.tape.inner, &gain.tape.inner)
                && Rc::ptr_eq(&self.tape.inner, &bias.tape.inner),
            "vars must share a tape"
        );
        let value = {
            let inner = self.tape.inner.borrow();
            tensor::layer_norm(
                &inner.values[self.idx],
                &inner.values[gain.idx],
                &inner.values[bias.idx],
            )
            .unwrap()
        };
        self.tape.push(
            value,
            Op::LayerNorm {
                x: self.idx,
                gain: gain.idx,
                bias: bias.idx,
            },
        )
    }

    pub fn relu(&self) -> Var {
        self.unary(tensor::relu, Op::Relu(self.idx))
    }

    pub fn sigmoid(&self) -> Var {
        self.unary(tensor::sigmoid, Op::Sigmoid(self.idx))
    }

    pub fn slice_cols(&self, start: usize, width: usize) -> Var {
        self.unary(
            |a| a.slice_cols(start, width),
            Op::SliceCols { x: self.idx, start },
        )
    }

    pub fn concat_cols(&self, other: &Var) -> Var {
        self.with(
            other,
            |a, b| a.concat_cols(b).unwrap(),
            Op::ConcatCols(self.idx, other.idx),
        )
    }

    /// Mean over all entries as a 1x1 node.
    pub fn mean_all(&self) -> Var {
        self.unary(
            |a| Tensor2::from_vec(1, 1, vec![a.mean_all()]).unwrap(),
            Op::MeanAll(self.idx),
        )
    }

    /// Scalar value of a 1x1 node.
    pub fn scalar(&self) -> f64 {
        let inner = self.tape.inner.borrow();
        let v = &inner.values[self.idx];
        assert_eq!(v.shape(), (1, 1), "scalar() needs a 1x1 node");
        v.data()[0]
    }

    /// Reverse pass seeded with dL/dself = 1 (self must be 1x1).
    pub fn backward(&self) {
        assert_eq!(self.shape(), (1, 1), "backward target must be 1x1");
        self.tape.inner.borrow_mut().backward_from(self.idx);
    }
}

impl TapeInner {
    fn backward_from(&mut self, target: usize) {
        self.grads = self
            .values
            .iter()
            .map(|v| Tensor2::zeros(v.rows(), v.cols()))
            .collect();
        self.grads[target] = Tensor2::filled(1, 1, 1.0);

        for i in (0..=target).rev() {
            let g = std::mem::take(&mut self.grads[i]);
            if g.data().iter().all(|&v| v == 0.0) {
                self.grads[i] = g;
                continue;
            }
            match self.ops[i] {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    self.grads[a].axpy(1.0, &g);
                    self.grads[b].axpy(1.0, &g);
                }
                Op::Sub(a, b) => {
                    self.grads[a].axpy(1.0, &g);
                    self.grads[b].axpy(-1.0, &g);
                }
                Op::Mul(a, b) => {
                    let da = g.hadamard(&self.values[b]).unwrap();
                    let db = g.hadamard(&self.values[a]).unwrap();
                    self.grads[a].axpy(1.0, &da);
                    self.grads[b].axpy(1.0, &db);
                }
                Op::Scale(a, k) => {
                    self.grads[a].axpy(k, &g);
                }
                Op::MatMul(a, b) => {
                    let da = tensor::matmul(&g, &self.values[b].transpose()).unwrap();
                    let db = tensor::matmul(&self.values[a].transpose(), &g).unwrap();
                    self.grads[a].axpy(1.0, &da);
                    self.grads[b].axpy(1.0, &db);
                }
                Op::Transpose(a) => {
                    self.grads[a].axpy(1.0, &g.transpose());
                }
                Op::AddRowBroadcast(a, bias) => {
                    self.grads[a].axpy(1.0, &g);
                    self.grads[bias].axpy(1.0, &g.col_sums());
                }
                Op::SoftmaxRows(a) => {
                    let y = &self.values[i];
                    let mut dx = Tensor2::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let yr = y.row(r);
                        let gr = g.row(r);
                        let dot: f64 = yr.iter().zip(gr).map(|(&yv, &gv)| yv * gv).sum();
                        for ((d, &yv), &gv) in dx.row_mut(r).iter_mut().zip(yr).zip(gr) {
                            *d = yv * (gv - dot);
                        }
                    }
                    self.grads[a].axpy(1.0, &dx);
                }
                Op::LayerNorm { x, gain, bias } => {
                    let (dx, dgain, dbias) =
                        layer_norm_backward(&self.values[x], &self.values[gain], &g);
                    self.grads[x].axpy(1.0, &dx);
                    self.grads[gain].axpy(1.0, &dgain);
                    self.grads[bias].axpy(1.0, &dbias);
                }
                Op::Relu(a) => {
                    let xa = &self.values[a];
                    let mut dx = g.clone();
                    for (d, &xv) in dx.data_mut().iter_mut().zip(xa.data()) {
                        if xv <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    self.grads[a].axpy(1.0, &dx);
                }
                Op::Sigmoid(a) => {
                    let y = &self.values[i];
                    let mut dx = g.clone();
                    for (d, &yv) in dx.data_mut().iter_mut().zip(y.data()) {
                        *d *= yv * (1.0 - yv);
                    }
                    self.grads[a].axpy(1.0, &dx);
                }
                Op::SliceCols { x, start } => {
                    let width = g.cols();
                    let gx = &mut self.grads[x];
                    for r in 0..g.rows() {
                        let src = g.row(r);
                        let dst = &mut gx.row_mut(r)[start..start + width];
                        for (d, &s) in dst.iter_mut().zip(src) {
                            *d += s;
                        }
                    }
                }
                Op::ConcatCols(a, b) => {
                    let a_cols = self.values[a].cols();
                    self.grads[a].axpy(1.0, &g.slice_cols(0, a_cols));
                    self.grads[b].axpy(1.0, &g.slice_cols(a_cols, g.cols() - a_cols));
                }
                Op::MeanAll(a) => {
                    let xa = &self.values[a];
                    let k = g.data()[0] / (xa.rows() * xa.cols()) as f64;
                    let ones = Tensor2::filled(xa.rows(), xa.cols(), 1.0);
                    self.grads[a].axpy(k, &ones);
                }
            }
            self.grads[i] = g;
        }
    }
}

/// Backward rule for per-row layer norm with affine output.
fn layer_norm_backward(x: &Tensor2, gain: &Tensor2, g: &Tensor2) -> (Tensor2, Tensor2, Tensor2) {
    let d = x.cols() as f64;
    let mut dx = Tensor2::zeros(x.rows(), x.cols());
    let mut dgain = Tensor2::zeros(1, x.cols());
    let mut dbias = Tensor2::zeros(1, x.cols());
    for r in 0..x.rows() {
        let xr = x.row(r);
        let gr = g.row(r);
        let mean = xr.iter().sum::<f64>() / d;
        let var = xr.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / d;
        let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        let xhat: Vec<f64> = xr.iter().map(|&v| (v - mean) * inv).collect();

        // d(loss)/d(xhat_j) = g_j * gain_j
        let dxhat: Vec<f64> = gr
            .iter()
            .zip(gain.row(0))
            .map(|(&gv, &gn)| gv * gn)
            .collect();
        let sum_dxhat: f64 = dxhat.iter().sum();
        let sum_dxhat_xhat: f64 = dxhat.iter().zip(&xhat).map(|(&a, &b)| a * b).sum();

        for j in 0..x.cols() {
            dx.row_mut(r)[j] = inv * (dxhat[j] - sum_dxhat / d - xhat[j] * sum_dxhat_xhat / d);
            dgain.row_mut(0)[j] += gr[j] * xhat[j];
            dbias.row_mut(0)[j] += gr[j];
        }
    }
    (dx, dgain, dbias)
}

/// x · w + bias, with bias broadcast across rows.
pub fn affine(x: &Var, weight: &Var, bias: &Var) -> Var {
    x.matmul(weight).add_row(bias)
}

/// Scaled dot-product attention recorded on the tape:
/// softmax(q kᵀ / sqrt(q.cols)) v.
pub fn attention(query: &Var, key: &Var, value: &Var) -> Var {
    let scale = 1.0 / (query.cols() as f64).sqrt();
    query
        .matmul(&key.transpose())
        .scale(scale)
        .softmax_rows()
        .matmul(value)
}

/// Mean squared error against a constant target, as a 1x1 node.
pub fn mse(pred: &Var, target: &Tensor2) -> Var {
    let t = pred.tape().leaf(target);
    let diff = pred.sub(&t);
    diff.mul(&diff).mean_all()
}

/// A named trainable tensor with its gradient accumulator.
#[derive(Clone)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor2,
    pub grad: Tensor2,
}

/// Typed index into a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamId(usize);

/// Flat container for every trainable parameter of a model. Layers hold
/// [`ParamId`]s; binding the store to a tape yields one leaf per parameter.
#[derive(Clone, Default)]
pub struct ParamStore {
    params: Vec<Parameter>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor2) -> ParamId {
        let grad = Tensor2::zeros(value.rows(), value.cols());
        self.params.push(Parameter {
            name: name.into(),
            value,
            grad,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn at(&self, index: usize) -> &Parameter {
        &self.params[index]
    }

    pub fn at_mut(&mut self, index: usize) -> &mut Parameter {
        &mut self.params[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad = Tensor2::zeros(p.value.rows(), p.value.cols());
        }
    }

    /// Number of scalar coordinates across all parameters.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.data().len()).sum()
    }

    /// Create one tape leaf per parameter, in store order.
    pub fn bind(&self, tape: &Tape) -> Binding {
        Binding {
            vars: self.params.iter().map(|p| tape.leaf(&p.value)).collect(),
        }
    }
}

/// Tape leaves for every parameter of a store, aligned by index.
pub struct Binding {
    vars: Vec<Var>,
}

impl Binding {
    pub fn var(&self, id: ParamId) -> &Var {
        &self.vars[id.0]
    }

    /// After a backward pass, add `scale` times each leaf gradient into the
    /// store's gradient accumulators.
    pub fn accumulate_grads(&self, store: &mut ParamStore, scale: f64) {
        assert_eq!(self.vars.len(), store.params.len());
        for (var, param) in self.vars.iter().zip(&mut store.params) {
            param.grad.axpy(scale, &var.grad());
        }
    }
}

/// Collect analytic gradients in store order after a backward pass.
pub fn gradients(binding: &Binding) -> Vec<Tensor2> {
    binding.vars.iter().map(Var::grad).collect()
}

/// Validate that a loss node is finite before using it.
pub fn finite_scalar(loss: &Var, context: &str) -> Result<f64> {
    let v = loss.scalar();
    if !v.is_finite() {
        return Err(crate::error::Error::Numeric(format!(
            "non-finite loss in {context}"
        )));
    }
    Ok(v)
}
