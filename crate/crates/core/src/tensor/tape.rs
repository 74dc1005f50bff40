use std::cell::{Cell, Ref, RefCell};

use super::kernels::{self, ConvGeom, LstmCache, LstmGrads};
use super::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Unary {
    Tanh,
    Sigmoid,
    Relu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Binary {
    Add,
    Sub,
    Mul,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    Same,
    Valid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolKind {
    Max,
    Mean,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul { a: usize, b: usize, m: usize, k: usize, n: usize },
    Unary { x: usize, f: Unary },
    Binary { a: usize, b: usize, f: Binary },
    Scale { x: usize, c: f64 },
    Sum { x: usize },
    Reshape { x: usize },
    Slice { x: usize, outer: usize, mid: usize, inner: usize, start: usize, len: usize },
    Concat { parts: Vec<(usize, usize)>, outer: usize, inner: usize },
    Conv1d { x: usize, w: usize, bias: Option<usize>, geom: ConvGeom },
    Pool { x: usize, kind: PoolKind, channels: usize, t_in: usize, window: usize, stride: usize, argmax: Vec<usize> },
    MaskedMean { x: usize, channels: usize, t: usize, mask: Vec<bool>, count: usize },
    Lstm { x: usize, state: usize, w_ih: usize, w_hh: usize, b: usize, u: usize, cache: LstmCache },
    WeightedXent { logits: usize, target: usize, weight: f64, probs: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Records operations for one forward pass and sweeps them once backwards.
///
/// A tape belongs to one thread. It supports exactly one [`Tape::backward`];
/// build a fresh tape per step.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    grads: RefCell<Vec<Option<Vec<f64>>>>,
    swept: Cell<bool>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .finish()
    }
}

fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A constant; no gradient flows into it.
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, false)
    }

    /// A gradient-tracked leaf.
    pub fn param(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, true)
    }

    fn push(&self, value: Tensor, op: Op, needs_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op, needs_grad });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn needs(&self, ids: &[usize]) -> bool {
        let nodes = self.nodes.borrow();
        ids.iter().any(|&i| nodes[i].needs_grad)
    }

    /// Reverse sweep from a scalar loss. Gradients land on every node that
    /// depends on a [`Tape::param`] leaf and are read with [`Tape::grad`].
    pub fn backward(&self, loss: Var<'_>) -> Result<()> {
        if self.swept.replace(true) {
            return Err(Error::Backward(
                "tape already swept; record a new tape for another pass".into(),
            ));
        }
        let nodes = self.nodes.borrow();
        if nodes[loss.id].value.len() != 1 {
            return Err(Error::Backward(format!(
                "loss must be a scalar, got shape {:?}",
                nodes[loss.id].value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; nodes.len()];
        grads[loss.id] = Some(vec![1.0]);
        for id in (0..=loss.id).rev() {
            let node = &nodes[id];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            backprop_node(&nodes, node, &g, &mut grads);
            grads[id] = Some(g);
        }
        *self.grads.borrow_mut() = grads;
        Ok(())
    }

    /// Gradient of the swept loss with respect to `var`, if any reached it.
    pub fn grad(&self, var: Var<'_>) -> Option<Tensor> {
        let grads = self.grads.borrow();
        let g = grads.get(var.id)?.as_ref()?;
        let shape = self.nodes.borrow()[var.id].value.shape().to_vec();
        Some(Tensor::new(shape, g.clone()).expect("gradient matches value shape"))
    }

    /// Adds the gradient of `var` into `out`; a no-op when none reached it.
    pub fn accumulate_grad_into(&self, var: Var<'_>, out: &mut [f64]) {
        let grads = self.grads.borrow();
        if let Some(Some(g)) = grads.get(var.id) {
            for (o, v) in out.iter_mut().zip(g) {
                *o += v;
            }
        }
    }

    pub fn concat<'t>(&'t self, parts: &[Var<'t>], axis: usize) -> Result<Var<'t>> {
        if parts.is_empty() {
            return Err(Error::invalid("concat of zero tensors"));
        }
        let nodes = self.nodes.borrow();
        let first = nodes[parts[0].id].value.shape().to_vec();
        if axis >= first.len() {
            return Err(Error::invalid(format!("concat axis {axis} out of range for {first:?}")));
        }
        let (outer, _, inner) = split_axis(&first, axis);
        let mut mids = Vec::with_capacity(parts.len());
        for p in parts {
            let s = nodes[p.id].value.shape();
            let same_rank = s.len() == first.len();
            let agree = same_rank
                && s.iter()
                    .zip(&first)
                    .enumerate()
                    .all(|(ax, (a, b))| ax == axis || a == b);
            if !agree {
                return Err(Error::shape("concat", &first, s));
            }
            mids.push((p.id, s[axis]));
        }
        let total: usize = mids.iter().map(|m| m.1).sum();
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &(id, mid) in &mids {
                let src = nodes[id].value.data();
                data.extend_from_slice(&src[o * mid * inner..(o + 1) * mid * inner]);
            }
        }
        let mut shape = first;
        shape[axis] = total;
        let needs = mids.iter().any(|&(id, _)| nodes[id].needs_grad);
        drop(nodes);
        Ok(self.push(
            Tensor::new(shape, data)?,
            Op::Concat { parts: mids, outer, inner },
            needs,
        ))
    }

    /// Mean-subtracted softmax cross-entropy scaled by `class_weights[target]`.
    pub fn weighted_cross_entropy<'t>(
        &'t self,
        logits: Var<'t>,
        target: usize,
        class_weights: &Tensor,
    ) -> Result<Var<'t>> {
        let value = logits.value();
        let k = value.len();
        if value.ndim() != 1 || k < 2 {
            return Err(Error::invalid(format!("logits must be a vector of length >= 2, got {:?}", value.shape())));
        }
        if class_weights.len() != k {
            return Err(Error::shape("weighted_cross_entropy", value.shape(), class_weights.shape()));
        }
        if target >= k {
            return Err(Error::invalid(format!("true class {target} out of range for {k} classes")));
        }
        let weight = class_weights.data()[target];
        if weight <= 0.0 {
            return Err(Error::invalid("class weights must be positive"));
        }
        let probs = kernels::softmax(value.data());
        let m = value.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + value.data().iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        let loss = weight * (lse - value.data()[target]);
        drop(value);
        let needs = self.needs(&[logits.id]);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::WeightedXent { logits: logits.id, target, weight, probs },
            needs,
        ))
    }

    /// One LSTM step over the packed state `[h; c]`; returns the new `[h; c]`.
    ///
    /// `w_ih` is `4u×d`, `w_hh` is `4u×u`, `b` is `4u`, gate order i, f, g, o.
    pub fn lstm_cell<'t>(
        &'t self,
        x: Var<'t>,
        state: Var<'t>,
        w_ih: Var<'t>,
        w_hh: Var<'t>,
        b: Var<'t>,
    ) -> Result<Var<'t>> {
        let nodes = self.nodes.borrow();
        let (xv, sv) = (&nodes[x.id].value, &nodes[state.id].value);
        let (wi, wh, bv) = (&nodes[w_ih.id].value, &nodes[w_hh.id].value, &nodes[b.id].value);
        if sv.ndim() != 1 || sv.len() % 2 != 0 {
            return Err(Error::invalid(format!("lstm state must be [h; c], got {:?}", sv.shape())));
        }
        let u = sv.len() / 2;
        let d = xv.len();
        if xv.ndim() != 1 || wi.shape() != [4 * u, d] {
            return Err(Error::shape("lstm_cell (input kernel)", wi.shape(), &[4 * u, d]));
        }
        if wh.shape() != [4 * u, u] {
            return Err(Error::shape("lstm_cell (recurrent kernel)", wh.shape(), &[4 * u, u]));
        }
        if bv.shape() != [4 * u] {
            return Err(Error::shape("lstm_cell (bias)", bv.shape(), &[4 * u]));
        }
        let (out, cache) = kernels::lstm_forward(xv.data(), sv.data(), wi.data(), wh.data(), bv.data(), u);
        drop(nodes);
        let needs = self.needs(&[x.id, state.id, w_ih.id, w_hh.id, b.id]);
        Ok(self.push(
            Tensor::vector(out),
            Op::Lstm { x: x.id, state: state.id, w_ih: w_ih.id, w_hh: w_hh.id, b: b.id, u, cache },
            needs,
        ))
    }
}

fn acc(grads: &mut [Option<Vec<f64>>], id: usize, len: usize) -> &mut Vec<f64> {
    grads[id].get_or_insert_with(|| vec![0.0; len])
}

fn backprop_node(nodes: &[Node], node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
    let needs = |id: usize| nodes[id].needs_grad;
    let val = |id: usize| nodes[id].value.data();
    match &node.op {
        Op::Leaf => {}
        &Op::MatMul { a, b, m, k, n } => {
            if needs(a) {
                kernels::matmul_grad_a(g, val(b), acc(grads, a, m * k), m, k, n);
            }
            if needs(b) {
                kernels::matmul_grad_b(val(a), g, acc(grads, b, k * n), m, k, n);
            }
        }
        &Op::Unary { x, f } => {
            if needs(x) {
                let y = node.value.data();
                let xv = val(x);
                let dx = acc(grads, x, y.len());
                for i in 0..y.len() {
                    let local = match f {
                        Unary::Tanh => 1.0 - y[i] * y[i],
                        Unary::Sigmoid => y[i] * (1.0 - y[i]),
                        Unary::Relu => {
                            if xv[i] > 0.0 {
                                1.0
                            } else {
                                0.0
                            }
                        }
                    };
                    dx[i] += g[i] * local;
                }
            }
        }
        &Op::Binary { a, b, f } => {
            let len = g.len();
            match f {
                Binary::Add | Binary::Sub => {
                    if needs(a) {
                        acc(grads, a, len).iter_mut().zip(g).for_each(|(d, v)| *d += v);
                    }
                    if needs(b) {
                        let sign = if f == Binary::Add { 1.0 } else { -1.0 };
                        acc(grads, b, len).iter_mut().zip(g).for_each(|(d, v)| *d += sign * v);
                    }
                }
                Binary::Mul => {
                    if needs(a) {
                        let bv = val(b);
                        let da = acc(grads, a, len);
                        for i in 0..len {
                            da[i] += g[i] * bv[i];
                        }
                    }
                    if needs(b) {
                        let av = val(a);
                        let db = acc(grads, b, len);
                        for i in 0..len {
                            db[i] += g[i] * av[i];
                        }
                    }
                }
            }
        }
        &Op::Scale { x, c } => {
            if needs(x) {
                acc(grads, x, g.len()).iter_mut().zip(g).for_each(|(d, v)| *d += c * v);
            }
        }
        &Op::Sum { x } => {
            if needs(x) {
                let n = nodes[x].value.len();
                acc(grads, x, n).iter_mut().for_each(|d| *d += g[0]);
            }
        }
        &Op::Reshape { x } => {
            if needs(x) {
                acc(grads, x, g.len()).iter_mut().zip(g).for_each(|(d, v)| *d += v);
            }
        }
        &Op::Slice { x, outer, mid, inner, start, len } => {
            if needs(x) {
                let dx = acc(grads, x, outer * mid * inner);
                for o in 0..outer {
                    let dst = &mut dx[(o * mid + start) * inner..(o * mid + start + len) * inner];
                    let src = &g[o * len * inner..(o + 1) * len * inner];
                    dst.iter_mut().zip(src).for_each(|(d, v)| *d += v);
                }
            }
        }
        Op::Concat { parts, outer, inner } => {
            let total: usize = parts.iter().map(|p| p.1).sum();
            let mut offset = 0;
            for &(id, mid) in parts {
                if needs(id) {
                    let dp = acc(grads, id, outer * mid * inner);
                    for o in 0..*outer {
                        let src = &g[(o * total + offset) * inner..(o * total + offset + mid) * inner];
                        let dst = &mut dp[o * mid * inner..(o + 1) * mid * inner];
                        dst.iter_mut().zip(src).for_each(|(d, v)| *d += v);
                    }
                }
                offset += mid;
            }
        }
        &Op::Conv1d { x, w, bias, geom } => {
            let mut dx = needs(x).then(|| vec![0.0; geom.c_in * geom.t_in]);
            let mut dw = needs(w).then(|| vec![0.0; geom.c_out * geom.c_in * geom.k]);
            let mut db = bias.filter(|&b| needs(b)).map(|_| vec![0.0; geom.c_out]);
            kernels::conv1d_backward(
                val(x),
                val(w),
                g,
                geom,
                dx.as_deref_mut(),
                dw.as_deref_mut(),
                db.as_deref_mut(),
            );
            for (id, local) in [(Some(x), dx), (Some(w), dw), (bias, db)] {
                if let (Some(id), Some(local)) = (id, local) {
                    let dst = acc(grads, id, local.len());
                    dst.iter_mut().zip(&local).for_each(|(d, v)| *d += v);
                }
            }
        }
        Op::Pool { x, kind, channels, t_in, window, stride, argmax } => {
            if needs(*x) {
                let t_out = g.len() / channels;
                let dx = acc(grads, *x, channels * t_in);
                for c in 0..*channels {
                    for t in 0..t_out {
                        let gv = g[c * t_out + t];
                        match kind {
                            PoolKind::Max => dx[c * t_in + argmax[c * t_out + t]] += gv,
                            PoolKind::Mean => {
                                let start = c * t_in + t * stride;
                                let share = gv / *window as f64;
                                dx[start..start + window].iter_mut().for_each(|d| *d += share);
                            }
                        }
                    }
                }
            }
        }
        Op::MaskedMean { x, channels, t, mask, count } => {
            if needs(*x) {
                let dx = acc(grads, *x, channels * t);
                for c in 0..*channels {
                    let share = g[c] / *count as f64;
                    for (s, &keep) in mask.iter().enumerate() {
                        if keep {
                            dx[c * t + s] += share;
                        }
                    }
                }
            }
        }
        Op::Lstm { x, state, w_ih, w_hh, b, u, cache } => {
            let (x, state, w_ih, w_hh, b, u) = (*x, *state, *w_ih, *w_hh, *b, *u);
            let d = nodes[x].value.len();
            let mut local: [Option<Vec<f64>>; 5] = [
                needs(x).then(|| vec![0.0; d]),
                needs(state).then(|| vec![0.0; 2 * u]),
                needs(w_ih).then(|| vec![0.0; 4 * u * d]),
                needs(w_hh).then(|| vec![0.0; 4 * u * u]),
                needs(b).then(|| vec![0.0; 4 * u]),
            ];
            {
                let [dx, ds, dwi, dwh, db] = &mut local;
                kernels::lstm_backward(
                    val(x),
                    val(state),
                    val(w_ih),
                    val(w_hh),
                    cache,
                    g,
                    u,
                    LstmGrads {
                        dx: dx.as_deref_mut(),
                        dstate: ds.as_deref_mut(),
                        dw_ih: dwi.as_deref_mut(),
                        dw_hh: dwh.as_deref_mut(),
                        db: db.as_deref_mut(),
                    },
                );
            }
            for (id, l) in [x, state, w_ih, w_hh, b].into_iter().zip(local) {
                if let Some(l) = l {
                    let dst = acc(grads, id, l.len());
                    dst.iter_mut().zip(&l).for_each(|(d, v)| *d += v);
                }
            }
        }
        Op::WeightedXent { logits, target, weight, probs } => {
            if needs(*logits) {
                let dl = acc(grads, *logits, probs.len());
                for (c, p) in probs.iter().enumerate() {
                    let onehot = if c == *target { 1.0 } else { 0.0 };
                    dl[c] += g[0] * weight * (p - onehot);
                }
            }
        }
    }
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Ref<'t, Tensor> {
        Ref::map(self.tape.nodes.borrow(), |n| &n[self.id].value)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    pub fn to_tensor(&self) -> Tensor {
        self.value().clone()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes.borrow()[self.id].needs_grad
    }

    fn derived(&self, value: Tensor, op: Op, inputs: &[usize]) -> Var<'t> {
        let needs = self.tape.needs(inputs);
        self.tape.push(value, op, needs)
    }

    /// Matrix product. `self` is `m×k`; `rhs` is `k×n`, or a length-`k`
    /// vector giving a length-`m` result.
    pub fn matmul(self, rhs: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), rhs.value());
        let (m, k) = match a.shape() {
            &[m, k] => (m, k),
            s => return Err(Error::shape("matmul", s, b.shape())),
        };
        let (kb, n, out_shape) = match b.shape() {
            &[kb, n] => (kb, n, vec![m, n]),
            &[kb] => (kb, 1, vec![m]),
            s => return Err(Error::shape("matmul", a.shape(), s)),
        };
        if k != kb {
            return Err(Error::shape("matmul", a.shape(), b.shape()));
        }
        let out = kernels::matmul(a.data(), b.data(), m, k, n);
        drop((a, b));
        Ok(self.derived(
            Tensor::new(out_shape, out)?,
            Op::MatMul { a: self.id, b: rhs.id, m, k, n },
            &[self.id, rhs.id],
        ))
    }

    pub fn map(self, f: Unary) -> Var<'t> {
        let x = self.value();
        let data = x
            .data()
            .iter()
            .map(|&v| match f {
                Unary::Tanh => v.tanh(),
                Unary::Sigmoid => kernels::sigmoid(v),
                Unary::Relu => v.max(0.0),
            })
            .collect();
        let out = Tensor::new(x.shape().to_vec(), data).expect("same shape");
        drop(x);
        self.derived(out, Op::Unary { x: self.id, f }, &[self.id])
    }

    pub fn tanh(self) -> Var<'t> {
        self.map(Unary::Tanh)
    }

    pub fn sigmoid(self) -> Var<'t> {
        self.map(Unary::Sigmoid)
    }

    pub fn relu(self) -> Var<'t> {
        self.map(Unary::Relu)
    }

    fn binary(self, rhs: Var<'t>, f: Binary, name: &'static str) -> Result<Var<'t>> {
        let (a, b) = (self.value(), rhs.value());
        if a.shape() != b.shape() {
            return Err(Error::shape(name, a.shape(), b.shape()));
        }
        let data = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| match f {
                Binary::Add => x + y,
                Binary::Sub => x - y,
                Binary::Mul => x * y,
            })
            .collect();
        let out = Tensor::new(a.shape().to_vec(), data)?;
        drop((a, b));
        Ok(self.derived(out, Op::Binary { a: self.id, b: rhs.id, f }, &[self.id, rhs.id]))
    }

    pub fn add(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.binary(rhs, Binary::Add, "add")
    }

    pub fn sub(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.binary(rhs, Binary::Sub, "sub")
    }

    pub fn mul(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.binary(rhs, Binary::Mul, "mul")
    }

    pub fn scale(self, c: f64) -> Var<'t> {
        let x = self.value();
        let out = Tensor::new(x.shape().to_vec(), x.data().iter().map(|v| v * c).collect()).expect("same shape");
        drop(x);
        self.derived(out, Op::Scale { x: self.id, c }, &[self.id])
    }

    pub fn sum(self) -> Var<'t> {
        let s = self.value().data().iter().sum();
        self.derived(Tensor::scalar(s), Op::Sum { x: self.id }, &[self.id])
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Var<'t>> {
        let out = self.value().clone().reshape(shape)?;
        Ok(self.derived(out, Op::Reshape { x: self.id }, &[self.id]))
    }

    /// `len` entries along `axis` starting at `start`.
    pub fn slice(self, axis: usize, start: usize, len: usize) -> Result<Var<'t>> {
        let x = self.value();
        if axis >= x.ndim() || start + len > x.shape()[axis] {
            return Err(Error::invalid(format!(
                "slice [{start}, {}) on axis {axis} out of range for {:?}",
                start + len,
                x.shape()
            )));
        }
        let (outer, mid, inner) = split_axis(x.shape(), axis);
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            data.extend_from_slice(&x.data()[(o * mid + start) * inner..(o * mid + start + len) * inner]);
        }
        let mut shape = x.shape().to_vec();
        shape[axis] = len;
        drop(x);
        Ok(self.derived(
            Tensor::new(shape, data)?,
            Op::Slice { x: self.id, outer, mid, inner, start, len },
            &[self.id],
        ))
    }

    /// `W·x + b` for a vector `x`.
    pub fn dense(self, w: Var<'t>, b: Var<'t>) -> Result<Var<'t>> {
        w.matmul(self)?.add(b)
    }

    /// Dilated 1-d convolution of a `C_in×T` input with `C_out×C_in×K`
    /// kernels: `y[o,t] = b[o] + Σ_c Σ_k w[o,c,k]·x[c, t + k·dilation − pad]`.
    pub fn conv1d(self, kernels_: Var<'t>, bias: Option<Var<'t>>, dilation: usize, padding: Padding) -> Result<Var<'t>> {
        let (x, w) = (self.value(), kernels_.value());
        let (c_in, t_in) = match x.shape() {
            &[c, t] => (c, t),
            s => return Err(Error::invalid(format!("conv1d input must be C×T, got {s:?}"))),
        };
        let (c_out, k) = match w.shape() {
            &[o, c, k] if c == c_in && k >= 1 => (o, k),
            s => return Err(Error::shape("conv1d", x.shape(), s)),
        };
        if dilation == 0 {
            return Err(Error::invalid("dilation must be >= 1"));
        }
        let span = (k - 1) * dilation;
        let (t_out, pad_left) = match padding {
            Padding::Same => (t_in, span / 2),
            Padding::Valid => {
                if t_in < span + 1 {
                    return Err(Error::invalid(format!(
                        "input length {t_in} shorter than receptive field {} (kernel {k}, dilation {dilation})",
                        span + 1
                    )));
                }
                (t_in - span, 0)
            }
        };
        let bias_data = match bias {
            Some(b) => {
                let bv = b.value();
                if bv.shape() != [c_out] {
                    return Err(Error::shape("conv1d bias", bv.shape(), &[c_out]));
                }
                Some(bv.data().to_vec())
            }
            None => None,
        };
        let geom = ConvGeom { c_in, c_out, k, t_in, t_out, dilation, pad_left };
        let y = kernels::conv1d(x.data(), w.data(), bias_data.as_deref(), geom);
        drop((x, w));
        let mut inputs = vec![self.id, kernels_.id];
        inputs.extend(bias.map(|b| b.id));
        Ok(self.derived(
            Tensor::new(vec![c_out, t_out], y)?,
            Op::Conv1d { x: self.id, w: kernels_.id, bias: bias.map(|b| b.id), geom },
            &inputs,
        ))
    }

    /// Pooling along the last axis of a `T` or `C×T` input. Max pooling
    /// routes gradient to the first maximal position in each window.
    pub fn pool1d(self, kind: PoolKind, window: usize, stride: usize) -> Result<Var<'t>> {
        let x = self.value();
        let (channels, t_in) = match x.shape() {
            &[t] => (1, t),
            &[c, t] => (c, t),
            s => return Err(Error::invalid(format!("pool1d input must be T or C×T, got {s:?}"))),
        };
        if window == 0 || stride == 0 {
            return Err(Error::invalid("pool window and stride must be >= 1"));
        }
        if window > t_in {
            return Err(Error::invalid(format!("pool window {window} exceeds length {t_in}")));
        }
        let t_out = (t_in - window) / stride + 1;
        let mut out = Vec::with_capacity(channels * t_out);
        let mut argmax = Vec::new();
        for c in 0..channels {
            let row = &x.data()[c * t_in..(c + 1) * t_in];
            for t in 0..t_out {
                let win = &row[t * stride..t * stride + window];
                match kind {
                    PoolKind::Max => {
                        let mut best = 0;
                        for (i, &v) in win.iter().enumerate() {
                            if v > win[best] {
                                best = i;
                            }
                        }
                        argmax.push(t * stride + best);
                        out.push(win[best]);
                    }
                    PoolKind::Mean => out.push(win.iter().sum::<f64>() / window as f64),
                }
            }
        }
        let shape = if x.ndim() == 1 { vec![t_out] } else { vec![channels, t_out] };
        drop(x);
        Ok(self.derived(
            Tensor::new(shape, out)?,
            Op::Pool { x: self.id, kind, channels, t_in, window, stride, argmax },
            &[self.id],
        ))
    }

    /// Mean over the time axis of a `C×T` input, counting only positions
    /// where `mask` is true. Returns a length-`C` vector.
    pub fn masked_mean_time(self, mask: &[bool]) -> Result<Var<'t>> {
        let x = self.value();
        let (channels, t) = match x.shape() {
            &[c, t] => (c, t),
            s => return Err(Error::invalid(format!("masked mean input must be C×T, got {s:?}"))),
        };
        if mask.len() != t {
            return Err(Error::shape("masked_mean_time", x.shape(), &[mask.len()]));
        }
        let count = mask.iter().filter(|&&m| m).count();
        if count == 0 {
            return Err(Error::invalid("mask selects no positions"));
        }
        let out: Vec<f64> = (0..channels)
            .map(|c| {
                let row = &x.data()[c * t..(c + 1) * t];
                row.iter().zip(mask).filter(|(_, &m)| m).map(|(v, _)| v).sum::<f64>() / count as f64
            })
            .collect();
        drop(x);
        Ok(self.derived(
            Tensor::vector(out),
            Op::MaskedMean { x: self.id, channels, t, mask: mask.to_vec(), count },
            &[self.id],
        ))
    }

    /// Global mean over time of a `C×T` input.
    pub fn mean_time(self) -> Result<Var<'t>> {
        let t = *self.shape().last().unwrap_or(&0);
        self.masked_mean_time(&vec![true; t])
    }

    /// Global max over time of a `C×T` input.
    pub fn max_time(self) -> Result<Var<'t>> {
        let shape = self.shape();
        let t = *shape.last().unwrap_or(&0);
        let pooled = self.pool1d(PoolKind::Max, t, 1)?;
        let c = pooled.value().len();
        pooled.reshape(vec![c])
    }
}
