//! Reverse-mode differentiation over dense `f64` matrices.
//!
//! A [`Tape`] records every value produced in one forward pass together with
//! the operation that produced it. [`Tape::backward`] walks the record in
//! reverse and accumulates gradients for every node that depends on a
//! parameter. Constants (inputs, labels, detached values) never receive
//! gradients, which is how a sub-network is frozen for a phase.

use std::sync::Arc;

use ndarray::{Array2, Axis, Zip};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Clamp applied to probabilities before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-12;

/// Handle to a value on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    SpMM(Arc<CsrMatrix>, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    SoftmaxRows(Var),
    /// Elementwise product with a constant (dropout masks).
    Scale(Var, Array2<f64>),
    /// Sum with a constant (additive noise); the gradient passes through.
    Shift(Var),
    SelectRows(Var, Vec<usize>),
    Intersection {
        pred: Var,
        target: Array2<f64>,
        rows: Vec<usize>,
    },
    CrossEntropy {
        probs: Var,
        labels: Vec<usize>,
        rows: Vec<usize>,
    },
    BceLogits(Var, f64),
}

#[derive(Debug)]
struct Node {
    value: Array2<f64>,
    op: Op,
    tracked: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of one scalar with respect to every tracked node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    /// `None` when `v` does not influence the loss or is a constant.
    pub fn get(&self, v: Var) -> Option<&Array2<f64>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, or zeros shaped like `like` when there is none.
    pub fn get_or_zeros(&self, v: Var, like: &Array2<f64>) -> Array2<f64> {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Array2::zeros(like.raw_dim()))
    }

    /// Like [`Gradients::get_or_zeros`], but moves the gradient out.
    pub fn take_or_zeros(&mut self, v: Var, like: &Array2<f64>) -> Array2<f64> {
        self.grads
            .get_mut(v.0)
            .and_then(Option::take)
            .unwrap_or_else(|| Array2::zeros(like.raw_dim()))
    }
}

fn shape_error(op: &str, a: &Array2<f64>, b: (usize, usize)) -> Error {
    Error::Shape(format!(
        "{op}: {}x{} incompatible with {}x{}",
        a.nrows(),
        a.ncols(),
        b.0,
        b.1
    ))
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<f64>, op: Op, tracked: bool) -> Var {
        self.nodes.push(Node { value, op, tracked });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    /// A trainable leaf; gradients flow into it.
    pub fn param(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A constant leaf; no gradient is computed for it.
    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    /// Scalar value of a 1×1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.ncols() != bv.nrows() {
            return Err(shape_error("matmul", av, bv.dim()));
        }
        let value = av.dot(bv);
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, Op::MatMul(a, b), tracked))
    }

    /// Sparse constant on the left times a dense node.
    pub fn spmm(&mut self, s: &Arc<CsrMatrix>, b: Var) -> Result<Var> {
        let value = s.mul_dense(self.value(b).view())?;
        let tracked = self.tracked(b);
        Ok(self.push(value, Op::SpMM(Arc::clone(s), b), tracked))
    }

    /// Adds a 1×C row to every row of `x`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(bias));
        if bv.nrows() != 1 || bv.ncols() != xv.ncols() {
            return Err(shape_error("add_bias", xv, bv.dim()));
        }
        let value = xv + bv;
        let tracked = self.tracked(x) || self.tracked(bias);
        Ok(self.push(value, Op::AddBias(x, bias), tracked))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.dim() != bv.dim() {
            return Err(shape_error("add", av, bv.dim()));
        }
        let value = av + bv;
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, Op::Add(a, b), tracked))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).mapv(|v| v.max(0.0));
        let tracked = self.tracked(x);
        self.push(value, Op::Relu(x), tracked)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.value(x).mapv(sigmoid);
        let tracked = self.tracked(x);
        self.push(value, Op::Sigmoid(x), tracked)
    }

    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let value = softmax_rows(self.value(x));
        let tracked = self.tracked(x);
        self.push(value, Op::SoftmaxRows(x), tracked)
    }

    /// Inverted dropout: in training mode each element is zeroed with
    /// probability `rate` and survivors are scaled by `1 / (1 - rate)`.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        x: Var,
        rate: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Argument(format!("dropout rate {rate} outside [0, 1)")));
        }
        if !training || rate == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - rate);
        let mask = Array2::from_shape_simple_fn(self.value(x).raw_dim(), || {
            if rng.random::<f64>() < rate {
                0.0
            } else {
                keep
            }
        });
        let value = self.value(x) * &mask;
        let tracked = self.tracked(x);
        Ok(self.push(value, Op::Scale(x, mask), tracked))
    }

    /// Adds i.i.d. `N(0, std²)` noise in training mode.
    pub fn gaussian_noise<R: Rng + ?Sized>(
        &mut self,
        x: Var,
        std: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        if !(std >= 0.0 && std.is_finite()) {
            return Err(Error::Argument(format!("noise std {std} must be finite and non-negative")));
        }
        if !training || std == 0.0 {
            return Ok(x);
        }
        let normal = Normal::new(0.0, std).expect("validated std");
        let noise = Array2::from_shape_simple_fn(self.value(x).raw_dim(), || normal.sample(rng));
        let value = self.value(x) + &noise;
        let tracked = self.tracked(x);
        Ok(self.push(value, Op::Shift(x), tracked))
    }

    /// Gathers the listed rows, in order.
    pub fn select_rows(&mut self, x: Var, rows: &[usize]) -> Result<Var> {
        let xv = self.value(x);
        if let Some(&r) = rows.iter().find(|&&r| r >= xv.nrows()) {
            return Err(Error::Argument(format!(
                "row {r} out of range for {} rows",
                xv.nrows()
            )));
        }
        let value = xv.select(Axis(0), rows);
        let tracked = self.tracked(x);
        Ok(self.push(value, Op::SelectRows(x, rows.to_vec()), tracked))
    }

    /// Mean over `rows` of `1 − Σ min(S, T)`.
    pub fn intersection_loss(
        &mut self,
        pred: Var,
        target: &Array2<f64>,
        rows: &[usize],
    ) -> Result<Var> {
        let pv = self.value(pred);
        if pv.dim() != target.dim() {
            return Err(shape_error("intersection_loss", pv, target.dim()));
        }
        check_rows(rows, pv.nrows())?;
        let total: f64 = rows
            .iter()
            .map(|&r| {
                let overlap: f64 = pv
                    .row(r)
                    .iter()
                    .zip(target.row(r))
                    .map(|(s, t)| s.min(*t))
                    .sum();
                1.0 - overlap
            })
            .sum();
        let value = Array2::from_elem((1, 1), total / rows.len() as f64);
        let tracked = self.tracked(pred);
        Ok(self.push(
            value,
            Op::Intersection {
                pred,
                target: target.clone(),
                rows: rows.to_vec(),
            },
            tracked,
        ))
    }

    /// Mean over `rows` of `−ln p[r, labels[r]]`, with `p` clamped below at
    /// [`LOG_FLOOR`]. `labels` has one entry per row of `probs`.
    pub fn cross_entropy(&mut self, probs: Var, labels: &[usize], rows: &[usize]) -> Result<Var> {
        let pv = self.value(probs);
        if labels.len() != pv.nrows() {
            return Err(shape_error("cross_entropy", pv, (labels.len(), 1)));
        }
        check_rows(rows, pv.nrows())?;
        if let Some(&c) = rows.iter().map(|&r| &labels[r]).find(|&&c| c >= pv.ncols()) {
            return Err(Error::Argument(format!("class {c} out of range")));
        }
        let total: f64 = rows
            .iter()
            .map(|&r| -pv[[r, labels[r]]].max(LOG_FLOOR).ln())
            .sum();
        let value = Array2::from_elem((1, 1), total / rows.len() as f64);
        let tracked = self.tracked(probs);
        Ok(self.push(
            value,
            Op::CrossEntropy {
                probs,
                labels: labels.to_vec(),
                rows: rows.to_vec(),
            },
            tracked,
        ))
    }

    /// Mean binary cross-entropy of sigmoid(logits) against a constant
    /// target, in the overflow-free form `max(x,0) − x·z + ln(1 + e^{−|x|})`.
    pub fn bce_logits(&mut self, logits: Var, target: f64) -> Var {
        let lv = self.value(logits);
        let n = lv.len().max(1) as f64;
        let total: f64 = lv
            .iter()
            .map(|&x| x.max(0.0) - x * target + (-x.abs()).exp().ln_1p())
            .sum();
        let value = Array2::from_elem((1, 1), total / n);
        let tracked = self.tracked(logits);
        self.push(value, Op::BceLogits(logits, target), tracked)
    }

    /// Gradients of the 1×1 node `loss` with respect to every tracked node.
    pub fn backward(&self, loss: Var) -> Gradients {
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; loss.0 + 1];
        if self.tracked(loss) {
            grads[loss.0] = Some(Array2::ones(self.value(loss).raw_dim()));
        }
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else {
                continue;
            };
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf) {
                // Leaf gradients are what the caller asks for.
                grads[i] = Some(g);
                continue;
            }
            let send = |v: Var, delta: Array2<f64>, grads: &mut Vec<Option<Array2<f64>>>| {
                if !self.tracked(v) {
                    return;
                }
                match &mut grads[v.0] {
                    Some(acc) => *acc += &delta,
                    slot => *slot = Some(delta),
                }
            };
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    if self.tracked(*a) {
                        send(*a, g.dot(&self.value(*b).t()), &mut grads);
                    }
                    if self.tracked(*b) {
                        send(*b, self.value(*a).t().dot(&g), &mut grads);
                    }
                }
                Op::SpMM(s, b) => {
                    let delta = s
                        .transpose_mul_dense(g.view())
                        .expect("shapes checked in forward pass");
                    send(*b, delta, &mut grads);
                }
                Op::AddBias(x, bias) => {
                    if self.tracked(*bias) {
                        send(*bias, g.sum_axis(Axis(0)).insert_axis(Axis(0)), &mut grads);
                    }
                    send(*x, g, &mut grads);
                }
                Op::Add(a, b) => {
                    send(*a, g.clone(), &mut grads);
                    send(*b, g, &mut grads);
                }
                Op::Relu(x) => {
                    let mut delta = g;
                    Zip::from(&mut delta)
                        .and(self.value(*x))
                        .for_each(|d, &v| {
                            if v <= 0.0 {
                                *d = 0.0;
                            }
                        });
                    send(*x, delta, &mut grads);
                }
                Op::Sigmoid(x) => {
                    let mut delta = g;
                    Zip::from(&mut delta)
                        .and(&node.value)
                        .for_each(|d, &y| *d *= y * (1.0 - y));
                    send(*x, delta, &mut grads);
                }
                Op::SoftmaxRows(x) => {
                    let y = &node.value;
                    let mut delta = g;
                    for (mut drow, yrow) in delta.outer_iter_mut().zip(y.outer_iter()) {
                        let dot: f64 = drow.iter().zip(yrow).map(|(d, y)| d * y).sum();
                        Zip::from(&mut drow)
                            .and(&yrow)
                            .for_each(|d, &y| *d = y * (*d - dot));
                    }
                    send(*x, delta, &mut grads);
                }
                Op::Scale(x, mask) => send(*x, g * mask, &mut grads),
                Op::Shift(x) => send(*x, g, &mut grads),
                Op::SelectRows(x, rows) => {
                    let mut delta = Array2::zeros(self.value(*x).raw_dim());
                    for (k, &r) in rows.iter().enumerate() {
                        let mut row = delta.row_mut(r);
                        row += &g.row(k);
                    }
                    send(*x, delta, &mut grads);
                }
                Op::Intersection { pred, target, rows } => {
                    let pv = self.value(*pred);
                    let scale = -g[[0, 0]] / rows.len() as f64;
                    let mut delta = Array2::zeros(pv.raw_dim());
                    for &r in rows {
                        for c in 0..pv.ncols() {
                            if pv[[r, c]] < target[[r, c]] {
                                delta[[r, c]] += scale;
                            }
                        }
                    }
                    send(*pred, delta, &mut grads);
                }
                Op::CrossEntropy {
                    probs,
                    labels,
                    rows,
                } => {
                    let pv = self.value(*probs);
                    let scale = -g[[0, 0]] / rows.len() as f64;
                    let mut delta = Array2::zeros(pv.raw_dim());
                    for &r in rows {
                        let p = pv[[r, labels[r]]];
                        if p > LOG_FLOOR {
                            delta[[r, labels[r]]] += scale / p;
                        }
                    }
                    send(*probs, delta, &mut grads);
                }
                Op::BceLogits(logits, target) => {
                    let lv = self.value(*logits);
                    let scale = g[[0, 0]] / lv.len().max(1) as f64;
                    let delta = lv.mapv(|x| (sigmoid(x) - target) * scale);
                    send(*logits, delta, &mut grads);
                }
            }
        }
        Gradients { grads }
    }
}

fn check_rows(rows: &[usize], n: usize) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Argument("loss needs at least one row".into()));
    }
    if let Some(&r) = rows.iter().find(|&&r| r >= n) {
        return Err(Error::Argument(format!("row {r} out of range for {n} rows")));
    }
    Ok(())
}

/// Row-wise softmax with the row maximum subtracted first.
pub fn softmax_rows(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.outer_iter_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}
