use std::collections::HashMap;

use super::tensor::{Gradients, ParamId, ParamSet, Tensor};
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn node_id(self) -> usize {
        self.0
    }
}

/// Elementwise operations selectable by kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementwiseOp {
    Add,
    Mul,
    Tanh,
    Sigmoid,
    Relu,
}

#[derive(Debug)]
enum Value {
    Owned(Vec<f64>),
    Param(ParamId),
}

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul { a: Var, b: Var, m: usize, k: usize, n: usize },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Affine { x: Var, scale: f64 },
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    Softmax(Var),
    Abs(Var),
    Ln(Var),
    Clamp { x: Var, lo: f64, hi: f64 },
    Sum(Var),
    Mean(Var),
    SumSquares(Var),
    Concat(Vec<Var>),
    Slice { x: Var, start: usize },
    Reshape(Var),
    Outer { a: Var, b: Var },
}

#[derive(Debug)]
struct Node {
    shape: Vec<usize>,
    value: Value,
    op: Op,
    requires_grad: bool,
}

/// Define-by-run recording of one forward pass.
///
/// The tape borrows the parameter values it reads; parameter leaves are not
/// copied. Nodes are appended in evaluation order, so the node list is always
/// topologically sorted.
pub struct Tape<'p> {
    params: &'p ParamSet,
    nodes: Vec<Node>,
    param_vars: HashMap<ParamId, Var>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
            param_vars: HashMap::new(),
        }
    }

    pub fn params(&self) -> &'p ParamSet {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        match &self.nodes[v.0].value {
            Value::Owned(d) => d,
            Value::Param(id) => self.params.get(*id).data(),
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Value of a single-element node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[0]
    }

    pub fn to_tensor(&self, v: Var) -> Tensor {
        Tensor::new(self.shape(v).to_vec(), self.value(v).to_vec())
            .expect("tape nodes are well formed")
    }

    fn push(&mut self, shape: Vec<usize>, data: Vec<f64>, op: Op, requires_grad: bool) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.nodes.push(Node {
            shape,
            value: Value::Owned(data),
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        let shape = t.shape().to_vec();
        self.push(shape, t.into_data(), Op::Constant, false)
    }

    pub fn constant_vector(&mut self, data: Vec<f64>) -> Var {
        let n = data.len();
        self.push(vec![n], data, Op::Constant, false)
    }

    /// Leaf for a trainable parameter. Repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.param_vars.get(&id) {
            return v;
        }
        self.nodes.push(Node {
            shape: self.params.get(id).shape().to_vec(),
            value: Value::Param(id),
            op: Op::Param(id),
            requires_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars.insert(id, v);
        v
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::dim(op, self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    /// Matrix product. A 1-D left operand of length `k` is a `1×k` row and
    /// yields a 1-D result.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let (m, k, vector_in) = match sa.as_slice() {
            [k] => (1, *k, true),
            [m, k] => (*m, *k, false),
            _ => return Err(Error::dim("matmul", &sa, &sb)),
        };
        let n = match sb.as_slice() {
            [kb, n] if *kb == k => *n,
            _ => return Err(Error::dim("matmul", &sa, &sb)),
        };
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = vec![0.0; m * n];
        // Row-of-b outer loop: each weight row is read once per call.
        for p in 0..k {
            let brow = &bv[p * n..(p + 1) * n];
            for i in 0..m {
                let x = av[i * k + p];
                if x == 0.0 {
                    continue;
                }
                for (o, &w) in out[i * n..(i + 1) * n].iter_mut().zip(brow) {
                    *o += x * w;
                }
            }
        }
        let shape = if vector_in { vec![n] } else { vec![m, n] };
        let rg = self.rg(&[a, b]);
        Ok(self.push(shape, out, Op::MatMul { a, b, m, k, n }, rg))
    }

    fn binary(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, node: Op) -> Result<Var> {
        self.same_shape(op, a, b)?;
        let out: Vec<f64> = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(&[a, b]);
        Ok(self.push(shape, out, node, rg))
    }

    fn unary(&mut self, x: Var, f: impl Fn(f64) -> f64, node: Op) -> Var {
        let out: Vec<f64> = self.value(x).iter().map(|&v| f(v)).collect();
        let shape = self.shape(x).to_vec();
        let rg = self.rg(&[x]);
        self.push(shape, out, node, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        self.affine(x, factor, 0.0)
    }

    /// `scale * x + shift`.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        self.unary(x, |v| scale * v + shift, Op::Affine { x, scale })
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, f64::tanh, Op::Tanh(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, |v| if v > 0.0 { v } else { 0.0 }, Op::Relu(x))
    }

    pub fn abs(&mut self, x: Var) -> Var {
        self.unary(x, f64::abs, Op::Abs(x))
    }

    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        self.unary(x, |v| v.clamp(lo, hi), Op::Clamp { x, lo, hi })
    }

    pub fn ln(&mut self, x: Var) -> Result<Var> {
        if let Some(bad) = self.value(x).iter().find(|&&v| v <= 0.0 || v.is_nan()) {
            return Err(Error::Domain(format!("ln of non-positive value {bad}")));
        }
        Ok(self.unary(x, f64::ln, Op::Ln(x)))
    }

    pub fn elementwise(&mut self, op: ElementwiseOp, operands: &[Var]) -> Result<Var> {
        match (op, operands) {
            (ElementwiseOp::Add, [a, b]) => self.add(*a, *b),
            (ElementwiseOp::Mul, [a, b]) => self.mul(*a, *b),
            (ElementwiseOp::Tanh, [x]) => Ok(self.tanh(*x)),
            (ElementwiseOp::Sigmoid, [x]) => Ok(self.sigmoid(*x)),
            (ElementwiseOp::Relu, [x]) => Ok(self.relu(*x)),
            _ => Err(Error::Contract(format!(
                "{op:?} takes {} operand(s), got {}",
                if matches!(op, ElementwiseOp::Add | ElementwiseOp::Mul) { 2 } else { 1 },
                operands.len()
            ))),
        }
    }

    /// Softmax over a vector, computed with max subtraction.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        if self.shape(x).len() != 1 {
            return Err(Error::dim("softmax", self.shape(x), &[]));
        }
        let out = softmax(self.value(x));
        let shape = self.shape(x).to_vec();
        let rg = self.rg(&[x]);
        Ok(self.push(shape, out, Op::Softmax(x), rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).iter().sum();
        let rg = self.rg(&[x]);
        self.push(vec![1], vec![s], Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let s = v.iter().sum::<f64>() / v.len() as f64;
        let rg = self.rg(&[x]);
        self.push(vec![1], vec![s], Op::Mean(x), rg)
    }

    /// Sum of squared entries, used for L2 penalties.
    pub fn sum_squares(&mut self, x: Var) -> Var {
        let s = self.value(x).iter().map(|v| v * v).sum();
        let rg = self.rg(&[x]);
        self.push(vec![1], vec![s], Op::SumSquares(x), rg)
    }

    /// Concatenate vectors.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Empty { what: "concat" });
        }
        let mut out = Vec::new();
        for &p in parts {
            if self.shape(p).len() != 1 {
                return Err(Error::dim("concat", self.shape(p), &[]));
            }
            out.extend_from_slice(self.value(p));
        }
        let rg = self.rg(parts);
        let n = out.len();
        Ok(self.push(vec![n], out, Op::Concat(parts.to_vec()), rg))
    }

    /// Contiguous sub-vector `[start, start + len)`.
    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape(x);
        if shape.len() != 1 || len == 0 || start + len > shape[0] {
            return Err(Error::dim("slice", shape, &[start, len]));
        }
        let out = self.value(x)[start..start + len].to_vec();
        let rg = self.rg(&[x]);
        Ok(self.push(vec![len], out, Op::Slice { x, start }, rg))
    }

    /// Same values under a new shape with the same element count.
    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        if shape.iter().product::<usize>() != self.value(x).len() || shape.contains(&0) {
            return Err(Error::dim("reshape", self.shape(x), &shape));
        }
        let out = self.value(x).to_vec();
        let rg = self.rg(&[x]);
        Ok(self.push(shape, out, Op::Reshape(x), rg))
    }

    /// Flattened outer product of two vectors: entry `(i, j)` at `i * len(b) + j`.
    pub fn outer(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 1 || sb.len() != 1 {
            return Err(Error::dim("outer", sa, sb));
        }
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = Vec::with_capacity(av.len() * bv.len());
        for &x in av {
            out.extend(bv.iter().map(|&y| x * y));
        }
        let n = out.len();
        let rg = self.rg(&[a, b]);
        Ok(self.push(vec![n], out, Op::Outer { a, b }, rg))
    }

    /// Reverse-mode sweep from a scalar loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.nodes[loss.0].shape.iter().product::<usize>() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.0].shape
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(vec![1.0]);
        let mut out = Gradients {
            grads: vec![None; self.params.len()],
        };

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => out.grads[id.0] = Some(g),
                Op::MatMul { a, b, m, k, n } => {
                    let (m, k, n) = (*m, *k, *n);
                    if self.requires_grad(*a) {
                        let bv = self.value(*b);
                        self.accumulate(&mut grads, *a, |ga| {
                            for p in 0..k {
                                let brow = &bv[p * n..(p + 1) * n];
                                for i in 0..m {
                                    ga[i * k + p] += dot(&g[i * n..(i + 1) * n], brow);
                                }
                            }
                        });
                    }
                    if self.requires_grad(*b) {
                        let av = self.value(*a);
                        self.accumulate(&mut grads, *b, |gb| {
                            for p in 0..k {
                                let gbrow = &mut gb[p * n..(p + 1) * n];
                                for i in 0..m {
                                    let x = av[i * k + p];
                                    if x == 0.0 {
                                        continue;
                                    }
                                    for (d, &gv) in gbrow.iter_mut().zip(&g[i * n..(i + 1) * n]) {
                                        *d += x * gv;
                                    }
                                }
                            }
                        });
                    }
                }
                Op::Add(a, b) => {
                    self.accumulate(&mut grads, *a, |ga| add_into(ga, &g));
                    self.accumulate(&mut grads, *b, |gb| add_into(gb, &g));
                }
                Op::Sub(a, b) => {
                    self.accumulate(&mut grads, *a, |ga| add_into(ga, &g));
                    self.accumulate(&mut grads, *b, |gb| {
                        gb.iter_mut().zip(&g).for_each(|(d, v)| *d -= v)
                    });
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    self.accumulate(&mut grads, *a, |ga| {
                        for ((d, gv), y) in ga.iter_mut().zip(&g).zip(bv) {
                            *d += gv * y;
                        }
                    });
                    self.accumulate(&mut grads, *b, |gb| {
                        for ((d, gv), x) in gb.iter_mut().zip(&g).zip(av) {
                            *d += gv * x;
                        }
                    });
                }
                Op::Affine { x, scale } => {
                    self.accumulate(&mut grads, *x, |gx| {
                        gx.iter_mut().zip(&g).for_each(|(d, v)| *d += scale * v)
                    });
                }
                Op::Tanh(x) => {
                    let y = self.value(Var(i));
                    self.accumulate(&mut grads, *x, |gx| {
                        for ((d, gv), yv) in gx.iter_mut().zip(&g).zip(y) {
                            *d += gv * (1.0 - yv * yv);
                        }
                    });
                }
                Op::Sigmoid(x) => {
                    let y = self.value(Var(i));
                    self.accumulate(&mut grads, *x, |gx| {
                        for ((d, gv), yv) in gx.iter_mut().zip(&g).zip(y) {
                            *d += gv * yv * (1.0 - yv);
                        }
                    });
                }
                Op::Relu(x) => {
                    let xv = self.value(*x);
                    self.accumulate(&mut grads, *x, |gx| {
                        for ((d, gv), v) in gx.iter_mut().zip(&g).zip(xv) {
                            if *v > 0.0 {
                                *d += gv;
                            }
                        }
                    });
                }
                Op::Softmax(x) => {
                    let y = self.value(Var(i));
                    let dot: f64 = g.iter().zip(y).map(|(a, b)| a * b).sum();
                    self.accumulate(&mut grads, *x, |gx| {
                        for ((d, gv), yv) in gx.iter_mut().zip(&g).zip(y) {
                            *d += yv * (gv - dot);
                        }
                    });
                }
                Op::Abs(x) => {
                    let xv = self.value(*x);
                    self.accumulate(&mut grads, *x, |gx| {
                        for ((d, gv), v) in gx.iter_mut().zip(&g).zip(xv) {
                            // Subgradient 0 at the kink.
                            if *v > 0.0 {
                                *d += gv;
                            } else if *v < 0.0 {
                                *d -= gv;
                            }
                        }
                    });
                }
                Op::Ln(x) => {
                    let xv = self.value(*x);
                    self.accumulate(&mut grads, *x, |gx| {
                        for ((d, gv), v) in gx.iter_mut().zip(&g).zip(xv) {
                            *d += gv / v;
                        }
                    });
                }
                Op::Clamp { x, lo, hi } => {
                    let xv = self.value(*x);
                    self.accumulate(&mut grads, *x, |gx| {
                        for ((d, gv), v) in gx.iter_mut().zip(&g).zip(xv) {
                            if v >= lo && v <= hi {
                                *d += gv;
                            }
                        }
                    });
                }
                Op::Sum(x) => {
                    self.accumulate(&mut grads, *x, |gx| gx.iter_mut().for_each(|d| *d += g[0]));
                }
                Op::Mean(x) => {
                    let n = self.value(*x).len() as f64;
                    self.accumulate(&mut grads, *x, |gx| gx.iter_mut().for_each(|d| *d += g[0] / n));
                }
                Op::SumSquares(x) => {
                    let xv = self.value(*x);
                    self.accumulate(&mut grads, *x, |gx| {
                        for (d, v) in gx.iter_mut().zip(xv) {
                            *d += 2.0 * v * g[0];
                        }
                    });
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let n = self.value(p).len();
                        self.accumulate(&mut grads, p, |gp| add_into(gp, &g[offset..offset + n]));
                        offset += n;
                    }
                }
                Op::Reshape(x) => self.accumulate(&mut grads, *x, |gx| add_into(gx, &g)),
                Op::Slice { x, start } => {
                    let start = *start;
                    self.accumulate(&mut grads, *x, |gx| add_into(&mut gx[start..start + g.len()], &g));
                }
                Op::Outer { a, b } => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let nb = bv.len();
                    self.accumulate(&mut grads, *a, |ga| {
                        for (i, d) in ga.iter_mut().enumerate() {
                            *d += dot(&g[i * nb..(i + 1) * nb], bv);
                        }
                    });
                    self.accumulate(&mut grads, *b, |gb| {
                        for (i, &x) in av.iter().enumerate() {
                            if x == 0.0 {
                                continue;
                            }
                            for (d, gv) in gb.iter_mut().zip(&g[i * nb..(i + 1) * nb]) {
                                *d += x * gv;
                            }
                        }
                    });
                }
            }
        }
        Ok(out)
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, f: impl FnOnce(&mut [f64])) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        let len = self.nodes[v.0].shape.iter().product();
        let slot = grads[v.0].get_or_insert_with(|| vec![0.0; len]);
        f(slot);
    }
}

/// Dot product with independent partial sums so the loop vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    acc.iter().sum::<f64>() + tail
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}
