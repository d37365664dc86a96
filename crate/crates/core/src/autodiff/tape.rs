use std::rc::Rc;

use crate::array::{self, broadcast_shape, gemm, reduce_to_shape, zip_broadcast, Array};
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Clone, Debug)]
pub enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Neg(Var),
    Scale(Var, f64),
    Offset(Var, f64),
    MatMul(Var, Var),
    /// Swaps the two axes of a matrix.
    Transpose(Var),
    Conv2d { input: Var, kernel: Var, stride: usize },
    Relu(Var),
    LeakyRelu(Var),
    Sigmoid(Var),
    Softplus(Var),
    Tanh(Var),
    Sin(Var),
    Cos(Var),
    Abs(Var),
    ClampMinZero(Var),
    Sqrt(Var),
    Exp(Var),
    Square(Var),
    /// `1` where the input is positive, `0` elsewhere; carries no gradient.
    Indicator(Var),
    Sum(Var),
    Mean(Var),
    /// Sum over the last axis, keeping it with length one.
    SumLast(Var),
    Dot(Var, Var),
    /// Unit-normalizes along the last axis.
    L2Normalize(Var),
    /// Concatenates along the last axis.
    Concat(Vec<Var>),
    /// Columns `start..end` of the last axis.
    Slice { input: Var, start: usize, end: usize },
    /// Picks rows (leading-axis entries) by index.
    GatherRows { input: Var, index: Rc<Vec<usize>> },
    Reshape { input: Var, shape: Vec<usize> },
    StepStraightThrough(Var),
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::Neg(_) => "negate",
            Op::Scale(..) => "scale",
            Op::Offset(..) => "offset",
            Op::MatMul(..) => "matmul",
            Op::Transpose(_) => "transpose",
            Op::Conv2d { .. } => "conv2d",
            Op::Relu(_) => "relu",
            Op::LeakyRelu(_) => "leaky-relu",
            Op::Sigmoid(_) => "sigmoid",
            Op::Softplus(_) => "softplus",
            Op::Tanh(_) => "tanh",
            Op::Sin(_) => "sin",
            Op::Cos(_) => "cos",
            Op::Abs(_) => "abs",
            Op::ClampMinZero(_) => "clamp-min-zero",
            Op::Sqrt(_) => "sqrt",
            Op::Exp(_) => "exp",
            Op::Square(_) => "square",
            Op::Indicator(_) => "indicator",
            Op::Sum(_) => "sum",
            Op::Mean(_) => "mean",
            Op::SumLast(_) => "sum-last",
            Op::Dot(..) => "dot",
            Op::L2Normalize(_) => "l2-normalize",
            Op::Concat(_) => "concat",
            Op::Slice { .. } => "slice",
            Op::GatherRows { .. } => "gather-rows",
            Op::Reshape { .. } => "reshape",
            Op::StepStraightThrough(_) => "step-straight-through",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Node {
    pub op: Op,
    pub value: Array,
}

/// Append-only record of eagerly evaluated operations.
///
/// Every node's parents have smaller indices, so tape order is a topological
/// order and a single reverse sweep computes all adjoints.
#[derive(Default, Debug)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::backward`], indexed by node.
#[derive(Debug)]
pub struct Gradients {
    adjoints: Vec<Option<Array>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Adjoint of `var`, or `None` when the root does not depend on it.
    pub fn get(&self, var: Var) -> Option<&Array> {
        self.adjoints.get(var.0).and_then(Option::as_ref)
    }

    /// Adjoint of `var`, zero-filled when unreachable.
    pub fn wrt(&self, var: Var) -> Array {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| Array::zeros(&self.shapes[var.0]))
    }

    pub fn take(&mut self, var: Var) -> Array {
        self.adjoints[var.0]
            .take()
            .unwrap_or_else(|| Array::zeros(&self.shapes[var.0]))
    }
}

fn mismatch(op: &'static str, a: &Array, b: &Array) -> Error {
    Error::ShapeMismatch {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
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

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn conv_out_dim(input: usize, kernel: usize, stride: usize) -> Option<usize> {
    if input < kernel || stride == 0 {
        None
    } else {
        Some((input - kernel) / stride + 1)
    }
}

struct ConvGeom {
    n: usize,
    h: usize,
    w: usize,
    c: usize,
    kh: usize,
    kw: usize,
    oc: usize,
    oh: usize,
    ow: usize,
    stride: usize,
}

impl ConvGeom {
    fn new(input: &Array, kernel: &Array, stride: usize) -> Result<Self> {
        let (&[n, h, w, c], &[kh, kw, kc, oc]) = (input.shape(), kernel.shape()) else {
            return Err(mismatch("conv2d", input, kernel));
        };
        if kc != c {
            return Err(mismatch("conv2d", input, kernel));
        }
        let (Some(oh), Some(ow)) = (conv_out_dim(h, kh, stride), conv_out_dim(w, kw, stride))
        else {
            return Err(mismatch("conv2d", input, kernel));
        };
        Ok(ConvGeom {
            n,
            h,
            w,
            c,
            kh,
            kw,
            oc,
            oh,
            ow,
            stride,
        })
    }

    fn patch_len(&self) -> usize {
        self.kh * self.kw * self.c
    }

    fn rows(&self) -> usize {
        self.n * self.oh * self.ow
    }

    /// Unfolds NHWC input into a (rows × patch) matrix.
    fn im2col(&self, input: &[f64]) -> Vec<f64> {
        let p = self.patch_len();
        let mut cols = vec![0.0; self.rows() * p];
        let mut r = 0;
        for b in 0..self.n {
            for oy in 0..self.oh {
                for ox in 0..self.ow {
                    let dst = &mut cols[r * p..(r + 1) * p];
                    let mut k = 0;
                    for ky in 0..self.kh {
                        let y = oy * self.stride + ky;
                        let base = ((b * self.h + y) * self.w + ox * self.stride) * self.c;
                        let span = self.kw * self.c;
                        dst[k..k + span].copy_from_slice(&input[base..base + span]);
                        k += span;
                    }
                    r += 1;
                }
            }
        }
        cols
    }

    fn col2im(&self, cols: &[f64]) -> Vec<f64> {
        let p = self.patch_len();
        let mut out = vec![0.0; self.n * self.h * self.w * self.c];
        let mut r = 0;
        for b in 0..self.n {
            for oy in 0..self.oh {
                for ox in 0..self.ow {
                    let src = &cols[r * p..(r + 1) * p];
                    let mut k = 0;
                    for ky in 0..self.kh {
                        let y = oy * self.stride + ky;
                        let base = ((b * self.h + y) * self.w + ox * self.stride) * self.c;
                        let span = self.kw * self.c;
                        for (o, s) in out[base..base + span].iter_mut().zip(&src[k..k + span]) {
                            *o += s;
                        }
                        k += span;
                    }
                    r += 1;
                }
            }
        }
        out
    }
}

fn last_dim(shape: &[usize]) -> usize {
    shape.last().copied().unwrap_or(1)
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

    pub fn node(&self, var: Var) -> &Node {
        &self.nodes[var.0]
    }

    pub fn value(&self, var: Var) -> &Array {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        self.nodes[var.0].value.shape()
    }

    /// Records an input (parameter or constant). Leaves may hold any finite values.
    pub fn leaf(&mut self, value: Array) -> Result<Var> {
        self.push(Op::Leaf, value)
    }

    pub fn constant_scalar(&mut self, v: f64) -> Result<Var> {
        self.leaf(Array::scalar(v))
    }

    fn push(&mut self, op: Op, value: Array) -> Result<Var> {
        if !value.all_finite() {
            return Err(Error::NonFinite { op: op.name() });
        }
        self.nodes.push(Node { op, value });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records `op`, evaluating its value from the already-recorded parents.
    pub fn record(&mut self, op: Op) -> Result<Var> {
        let value = self.evaluate(&op)?;
        self.push(op, value)
    }


    fn unary(&self, x: Var, f: impl Fn(f64) -> f64) -> Array {
        self.value(x).map(f)
    }

    fn evaluate(&self, op: &Op) -> Result<Array> {
        let v = |x: &Var| self.value(*x);
        Ok(match op {
            Op::Leaf => return Err(Error::invalid("leaves are recorded with Tape::leaf")),
            Op::Add(a, b) => zip_broadcast("add", v(a), v(b), |x, y| x + y)?,
            Op::Sub(a, b) => zip_broadcast("sub", v(a), v(b), |x, y| x - y)?,
            Op::Mul(a, b) => zip_broadcast("mul", v(a), v(b), |x, y| x * y)?,
            Op::Div(a, b) => zip_broadcast("div", v(a), v(b), |x, y| x / y)?,
            Op::Neg(a) => self.unary(*a, |x| -x),
            Op::Scale(a, s) => self.unary(*a, |x| x * s),
            Op::Offset(a, s) => self.unary(*a, |x| x + s),
            Op::MatMul(a, b) => array::matmul(v(a), v(b))?,
            Op::Transpose(a) => v(a).transpose()?,
            Op::Conv2d {
                input,
                kernel,
                stride,
            } => {
                let g = ConvGeom::new(v(input), v(kernel), *stride)?;
                let cols = g.im2col(v(input).data());
                let mut out = vec![0.0; g.rows() * g.oc];
                gemm(
                    g.rows(),
                    g.patch_len(),
                    g.oc,
                    &cols,
                    false,
                    v(kernel).data(),
                    false,
                    &mut out,
                    false,
                );
                Array::new(&[g.n, g.oh, g.ow, g.oc], out)?
            }
            Op::Relu(a) | Op::ClampMinZero(a) => self.unary(*a, |x| x.max(0.0)),
            Op::LeakyRelu(a) => self.unary(*a, |x| if x > 0.0 { x } else { LEAKY_SLOPE * x }),
            Op::Sigmoid(a) => self.unary(*a, sigmoid),
            Op::Softplus(a) => self.unary(*a, softplus),
            Op::Tanh(a) => self.unary(*a, f64::tanh),
            Op::Sin(a) => self.unary(*a, f64::sin),
            Op::Cos(a) => self.unary(*a, f64::cos),
            Op::Abs(a) => self.unary(*a, f64::abs),
            Op::Sqrt(a) => self.unary(*a, f64::sqrt),
            Op::Exp(a) => self.unary(*a, f64::exp),
            Op::Square(a) => self.unary(*a, |x| x * x),
            Op::Indicator(a) => self.unary(*a, |x| if x > 0.0 { 1.0 } else { 0.0 }),
            Op::StepStraightThrough(a) => self.unary(*a, crate::encoding::hard_step),
            Op::Sum(a) => Array::scalar(v(a).sum()),
            Op::Mean(a) => {
                if v(a).is_empty() {
                    return Err(Error::InvalidShape {
                        op: "mean",
                        shape: v(a).shape().to_vec(),
                    });
                }
                Array::scalar(v(a).sum() / v(a).len() as f64)
            }
            Op::SumLast(a) => {
                let x = v(a);
                let k = last_dim(x.shape());
                let mut shape = x.shape().to_vec();
                if let Some(last) = shape.last_mut() {
                    *last = 1;
                } else {
                    shape.push(1);
                }
                let data = x.data().chunks(k.max(1)).map(|c| c.iter().sum()).collect();
                Array::new(&shape, data)?
            }
            Op::Dot(a, b) => {
                if v(a).shape() != v(b).shape() {
                    return Err(mismatch("dot", v(a), v(b)));
                }
                Array::scalar(v(a).data().iter().zip(v(b).data()).map(|(x, y)| x * y).sum())
            }
            Op::L2Normalize(a) => {
                let x = v(a);
                let k = last_dim(x.shape()).max(1);
                let mut out = x.clone();
                for row in out.data_mut().chunks_mut(k) {
                    let n = row.iter().map(|t| t * t).sum::<f64>().sqrt();
                    for t in row.iter_mut() {
                        *t /= n;
                    }
                }
                out
            }
            Op::Concat(parts) => {
                let first = parts
                    .first()
                    .ok_or_else(|| Error::invalid("concat of zero arrays"))?;
                let lead = &v(first).shape()[..v(first).rank().saturating_sub(1)];
                let rows: usize = lead.iter().product();
                let mut width = 0;
                for p in parts {
                    let s = v(p).shape();
                    if s.len() != lead.len() + 1 || &s[..lead.len()] != lead {
                        return Err(mismatch("concat", v(first), v(p)));
                    }
                    width += last_dim(s);
                }
                let mut data = Vec::with_capacity(rows * width);
                for r in 0..rows {
                    for p in parts {
                        let k = last_dim(v(p).shape());
                        data.extend_from_slice(&v(p).data()[r * k..(r + 1) * k]);
                    }
                }
                let mut shape = lead.to_vec();
                shape.push(width);
                Array::new(&shape, data)?
            }
            Op::Slice { input, start, end } => {
                let x = v(input);
                let k = last_dim(x.shape());
                if x.rank() == 0 || start >= end || *end > k {
                    return Err(Error::InvalidShape {
                        op: "slice",
                        shape: x.shape().to_vec(),
                    });
                }
                let data = x
                    .data()
                    .chunks(k)
                    .flat_map(|row| row[*start..*end].iter().copied())
                    .collect();
                let mut shape = x.shape().to_vec();
                *shape.last_mut().unwrap() = end - start;
                Array::new(&shape, data)?
            }
            Op::GatherRows { input, index } => {
                let x = v(input);
                if x.rank() == 0 {
                    return Err(Error::InvalidShape {
                        op: "gather-rows",
                        shape: vec![],
                    });
                }
                let rows = x.shape()[0];
                let width = x.len() / rows.max(1);
                let mut data = Vec::with_capacity(index.len() * width);
                for &i in index.iter() {
                    if i >= rows {
                        return Err(Error::invalid(format!("gather index {i} out of {rows}")));
                    }
                    data.extend_from_slice(&x.data()[i * width..(i + 1) * width]);
                }
                let mut shape = x.shape().to_vec();
                shape[0] = index.len();
                Array::new(&shape, data)?
            }
            Op::Reshape { input, shape } => v(input).clone().reshape(shape)?,
        })
    }

    /// Reverse sweep from a scalar `root`.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let root_value = self.value(root);
        if !root_value.is_scalar() {
            return Err(Error::RootNotScalar(root_value.shape().to_vec()));
        }
        let mut adjoints: Vec<Option<Array>> = vec![None; root.0 + 1];
        adjoints[root.0] = Some(Array::ones(root_value.shape()));
        for i in (0..=root.0).rev() {
            let (lower, upper) = adjoints.split_at_mut(i);
            let Some(g) = upper[0].as_ref() else {
                continue;
            };
            self.propagate(i, g, lower)?;
        }
        adjoints.resize(self.nodes.len(), None);
        Ok(Gradients {
            adjoints,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    fn propagate(&self, i: usize, g: &Array, acc: &mut [Option<Array>]) -> Result<()> {
        let node = &self.nodes[i];
        let out = &node.value;
        let v = |x: &Var| self.value(*x);
        let mut send = |x: Var, contribution: Array| {
            match &mut acc[x.0] {
                Some(existing) => existing.add_assign(&contribution),
                slot @ None => *slot = Some(contribution),
            };
        };
        let zip = |a: &Array, b: &Array, f: fn(f64, f64) -> f64| zip_broadcast("grad", a, b, f);
        let with_input = |x: &Var, f: &dyn Fn(f64, f64) -> f64| -> Array {
            let xs = v(x).data();
            let data = g.data().iter().zip(xs).map(|(&gi, &xi)| f(gi, xi)).collect();
            Array::new(g.shape(), data).expect("same shape")
        };
        let with_output = |f: &dyn Fn(f64, f64) -> f64| -> Array {
            let data = g
                .data()
                .iter()
                .zip(out.data())
                .map(|(&gi, &yi)| f(gi, yi))
                .collect();
            Array::new(g.shape(), data).expect("same shape")
        };
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                send(*a, reduce_to_shape(g, v(a).shape()));
                send(*b, reduce_to_shape(g, v(b).shape()));
            }
            Op::Sub(a, b) => {
                send(*a, reduce_to_shape(g, v(a).shape()));
                send(*b, reduce_to_shape(&g.map(|t| -t), v(b).shape()));
            }
            Op::Mul(a, b) => {
                let ga = zip(g, v(b), |x, y| x * y)?;
                let gb = zip(g, v(a), |x, y| x * y)?;
                send(*a, reduce_to_shape(&ga, v(a).shape()));
                send(*b, reduce_to_shape(&gb, v(b).shape()));
            }
            Op::Div(a, b) => {
                let ga = zip(g, v(b), |x, y| x / y)?;
                let gy = zip(g, out, |x, y| -x * y)?;
                let gb = zip(&gy, v(b), |x, y| x / y)?;
                send(*a, reduce_to_shape(&ga, v(a).shape()));
                send(*b, reduce_to_shape(&gb, v(b).shape()));
            }
            Op::Neg(a) => send(*a, g.map(|t| -t)),
            Op::Scale(a, s) => send(*a, g.map(|t| t * s)),
            Op::Offset(a, _) => send(*a, g.clone()),
            Op::MatMul(a, b) => {
                let (m, k) = v(a).dims2()?;
                let (_, n) = v(b).dims2()?;
                let mut ga = vec![0.0; m * k];
                gemm(m, n, k, g.data(), false, v(b).data(), true, &mut ga, false);
                let mut gb = vec![0.0; k * n];
                gemm(k, m, n, v(a).data(), true, g.data(), false, &mut gb, false);
                send(*a, Array::new(v(a).shape(), ga)?);
                send(*b, Array::new(v(b).shape(), gb)?);
            }
            Op::Transpose(a) => send(*a, g.transpose()?),
            Op::Conv2d {
                input,
                kernel,
                stride,
            } => {
                let geom = ConvGeom::new(v(input), v(kernel), *stride)?;
                let (rows, p, oc) = (geom.rows(), geom.patch_len(), geom.oc);
                let cols = geom.im2col(v(input).data());
                let mut gk = vec![0.0; p * oc];
                gemm(p, rows, oc, &cols, true, g.data(), false, &mut gk, false);
                let mut gcols = vec![0.0; rows * p];
                gemm(rows, oc, p, g.data(), false, v(kernel).data(), true, &mut gcols, false);
                send(*kernel, Array::new(v(kernel).shape(), gk)?);
                send(*input, Array::new(v(input).shape(), geom.col2im(&gcols))?);
            }
            Op::Relu(a) | Op::ClampMinZero(a) => {
                send(*a, with_input(a, &|gi, x| if x > 0.0 { gi } else { 0.0 }))
            }
            Op::LeakyRelu(a) => send(
                *a,
                with_input(a, &|gi, x| if x > 0.0 { gi } else { LEAKY_SLOPE * gi }),
            ),
            Op::Sigmoid(a) => send(*a, with_output(&|gi, y| gi * y * (1.0 - y))),
            Op::Softplus(a) => send(*a, with_input(a, &|gi, x| gi * sigmoid(x))),
            Op::Tanh(a) => send(*a, with_output(&|gi, y| gi * (1.0 - y * y))),
            Op::Sin(a) => send(*a, with_input(a, &|gi, x| gi * x.cos())),
            Op::Cos(a) => send(*a, with_input(a, &|gi, x| -gi * x.sin())),
            Op::Abs(a) => send(
                *a,
                with_input(a, &|gi, x| {
                    if x > 0.0 {
                        gi
                    } else if x < 0.0 {
                        -gi
                    } else {
                        0.0
                    }
                }),
            ),
            Op::Sqrt(a) => send(*a, with_output(&|gi, y| 0.5 * gi / y)),
            Op::Exp(a) => send(*a, with_output(&|gi, y| gi * y)),
            Op::Square(a) => send(*a, with_input(a, &|gi, x| 2.0 * gi * x)),
            Op::Indicator(_) => {}
            Op::StepStraightThrough(a) => send(*a, g.clone()),
            Op::Sum(a) => send(*a, Array::full(v(a).shape(), g.item())),
            Op::Mean(a) => {
                let n = v(a).len() as f64;
                send(*a, Array::full(v(a).shape(), g.item() / n));
            }
            Op::SumLast(a) => {
                let k = last_dim(v(a).shape()).max(1);
                let data = g
                    .data()
                    .iter()
                    .flat_map(|&gi| std::iter::repeat_n(gi, k))
                    .collect();
                send(*a, Array::new(v(a).shape(), data)?);
            }
            Op::Dot(a, b) => {
                let s = g.item();
                send(*a, v(b).map(|t| t * s));
                send(*b, v(a).map(|t| t * s));
            }
            Op::L2Normalize(a) => {
                let x = v(a);
                let k = last_dim(x.shape()).max(1);
                let mut gx = vec![0.0; x.len()];
                for ((gr, yr), (xr, dst)) in g
                    .data()
                    .chunks(k)
                    .zip(out.data().chunks(k))
                    .zip(x.data().chunks(k).zip(gx.chunks_mut(k)))
                {
                    let norm = xr.iter().map(|t| t * t).sum::<f64>().sqrt();
                    let proj: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                    for ((d, gi), yi) in dst.iter_mut().zip(gr).zip(yr) {
                        *d = (gi - yi * proj) / norm;
                    }
                }
                send(*a, Array::new(x.shape(), gx)?);
            }
            Op::Concat(parts) => {
                let width = last_dim(g.shape());
                let rows = g.len() / width.max(1);
                let mut offset = 0;
                for p in parts {
                    let k = last_dim(v(p).shape());
                    let mut data = Vec::with_capacity(rows * k);
                    for r in 0..rows {
                        let base = r * width + offset;
                        data.extend_from_slice(&g.data()[base..base + k]);
                    }
                    offset += k;
                    send(*p, Array::new(v(p).shape(), data)?);
                }
            }
            Op::Slice { input, start, end } => {
                let x = v(input);
                let k = last_dim(x.shape());
                let w = end - start;
                let mut data = vec![0.0; x.len()];
                for (dst, src) in data.chunks_mut(k).zip(g.data().chunks(w)) {
                    dst[*start..*end].copy_from_slice(src);
                }
                send(*input, Array::new(x.shape(), data)?);
            }
            Op::GatherRows { input, index } => {
                let x = v(input);
                let width = x.len() / x.shape()[0].max(1);
                let mut data = vec![0.0; x.len()];
                for (src, &i) in g.data().chunks(width.max(1)).zip(index.iter()) {
                    for (d, s) in data[i * width..(i + 1) * width].iter_mut().zip(src) {
                        *d += s;
                    }
                }
                send(*input, Array::new(x.shape(), data)?);
            }
            Op::Reshape { input, .. } => send(*input, g.clone().reshape(v(input).shape())?),
        }
        Ok(())
    }
}

/// Builder methods, one per primitive op.
impl Tape {
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::Add(a, b))
    }
    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::Sub(a, b))
    }
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::Mul(a, b))
    }
    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::Div(a, b))
    }
    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Neg(a))
    }
    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        self.record(Op::Scale(a, s))
    }
    pub fn offset(&mut self, a: Var, s: f64) -> Result<Var> {
        self.record(Op::Offset(a, s))
    }
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::MatMul(a, b))
    }
    /// Cross-correlation of an NHWC input with a `[kh, kw, c, oc]` kernel, no padding.
    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Transpose(a))
    }
    pub fn conv2d(&mut self, input: Var, kernel: Var, stride: usize) -> Result<Var> {
        self.record(Op::Conv2d {
            input,
            kernel,
            stride,
        })
    }
    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Relu(a))
    }
    pub fn leaky_relu(&mut self, a: Var) -> Result<Var> {
        self.record(Op::LeakyRelu(a))
    }
    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Sigmoid(a))
    }
    pub fn softplus(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Softplus(a))
    }
    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Tanh(a))
    }
    pub fn sin(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Sin(a))
    }
    pub fn cos(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Cos(a))
    }
    pub fn abs(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Abs(a))
    }
    pub fn clamp_min_zero(&mut self, a: Var) -> Result<Var> {
        self.record(Op::ClampMinZero(a))
    }
    pub fn sqrt(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Sqrt(a))
    }
    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Exp(a))
    }
    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Square(a))
    }
    pub fn indicator(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Indicator(a))
    }
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Sum(a))
    }
    pub fn mean(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Mean(a))
    }
    pub fn sum_last(&mut self, a: Var) -> Result<Var> {
        self.record(Op::SumLast(a))
    }
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::Dot(a, b))
    }
    pub fn l2_normalize(&mut self, a: Var) -> Result<Var> {
        self.record(Op::L2Normalize(a))
    }
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        self.record(Op::Concat(parts.to_vec()))
    }
    pub fn slice(&mut self, input: Var, start: usize, end: usize) -> Result<Var> {
        self.record(Op::Slice { input, start, end })
    }
    pub fn gather_rows(&mut self, input: Var, index: Rc<Vec<usize>>) -> Result<Var> {
        self.record(Op::GatherRows { input, index })
    }
    pub fn reshape(&mut self, input: Var, shape: &[usize]) -> Result<Var> {
        self.record(Op::Reshape {
            input,
            shape: shape.to_vec(),
        })
    }
    pub fn step_straight_through(&mut self, a: Var) -> Result<Var> {
        self.record(Op::StepStraightThrough(a))
    }

    /// Broadcast-compatible shape of two recorded values, if any.
    pub fn broadcast_shape(&self, a: Var, b: Var) -> Option<Vec<usize>> {
        broadcast_shape(self.shape(a), self.shape(b))
    }
}
