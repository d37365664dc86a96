use rand::Rng;

use crate::array::Array;
use crate::autodiff::{Gradients, Tape, Var};
use crate::error::{Error, Result};

/// Index of a tensor in a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamId(usize);

/// Named trainable tensors in a fixed order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Array>,
}

impl ParamStore {
    pub fn add(&mut self, name: impl Into<String>, value: Array) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Array {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Array {
        &mut self.values[id.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Array] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Array] {
        &mut self.values
    }

    /// Total number of scalars.
    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(Array::len).sum()
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    /// Overwrites the tensor called `name`; the shape must match.
    pub fn assign(&mut self, name: &str, value: Array) -> Result<()> {
        let id = self
            .find(name)
            .ok_or_else(|| Error::invalid(format!("unknown parameter {name}")))?;
        let current = &self.values[id.0];
        if current.shape() != value.shape() {
            return Err(Error::ShapeMismatch {
                op: "assign",
                lhs: current.shape().to_vec(),
                rhs: value.shape().to_vec(),
            });
        }
        if !value.all_finite() {
            return Err(Error::NonFinite { op: "assign" });
        }
        self.values[id.0] = value;
        Ok(())
    }

    /// Records every tensor as a leaf on `tape`.
    pub fn bind(&self, tape: &mut Tape) -> Result<Bound> {
        let vars = self
            .values
            .iter()
            .map(|v| tape.leaf(v.clone()))
            .collect::<Result<_>>()?;
        Ok(Bound { vars })
    }
}

/// Tape handles of a bound [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Bound {
    vars: Vec<Var>,
}

impl Bound {
    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }

    /// One adjoint per tensor, zero where the root did not depend on it.
    pub fn gradients(&self, grads: &Gradients) -> Vec<Array> {
        self.vars.iter().map(|&v| grads.wrt(v)).collect()
    }
}

/// `U(-1/√fan_in, 1/√fan_in)` entries.
pub fn uniform_init(rng: &mut impl Rng, shape: &[usize], fan_in: usize) -> Array {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
    Array::new(shape, data).expect("shape matches length")
}

/// Affine layer `x·W + b` with `W: [in, out]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    pub fn new(store: &mut ParamStore, rng: &mut impl Rng, name: &str, input: usize, output: usize) -> Self {
        let weight = store.add(format!("{name}.weight"), uniform_init(rng, &[input, output], input));
        let bias = store.add(format!("{name}.bias"), uniform_init(rng, &[output], input));
        Linear { weight, bias }
    }

    pub fn forward(&self, tape: &mut Tape, bound: &Bound, x: Var) -> Result<Var> {
        let y = tape.matmul(x, bound.var(self.weight))?;
        tape.add(y, bound.var(self.bias))
    }

    /// Tangent of the output for an input tangent: `dx·W`.
    pub fn tangent(&self, tape: &mut Tape, bound: &Bound, dx: Var) -> Result<Var> {
        tape.matmul(dx, bound.var(self.weight))
    }
}

/// Stack of linear layers with ReLU between them and no activation at the end.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    /// `hidden` ReLU layers of `width` followed by a linear output layer.
    pub fn new(
        store: &mut ParamStore,
        rng: &mut impl Rng,
        name: &str,
        input: usize,
        width: usize,
        hidden: usize,
        output: usize,
    ) -> Self {
        let mut layers = Vec::with_capacity(hidden + 1);
        let mut fan = input;
        for k in 0..hidden {
            layers.push(Linear::new(store, rng, &format!("{name}.{k}"), fan, width));
            fan = width;
        }
        layers.push(Linear::new(store, rng, &format!("{name}.{hidden}"), fan, output));
        Mlp { layers }
    }

    pub fn forward(&self, tape: &mut Tape, bound: &Bound, x: Var) -> Result<Var> {
        let mut h = x;
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            h = layer.forward(tape, bound, h)?;
            if k < last {
                h = tape.relu(h)?;
            }
        }
        Ok(h)
    }

    /// Forward pass carrying the input tangent `dx` alongside, returning the
    /// pre-activation output and its tangent.
    pub fn forward_tangent(&self, tape: &mut Tape, bound: &Bound, x: Var, dx: Var) -> Result<(Var, Var)> {
        let (mut h, mut dh) = (x, dx);
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(tape, bound, h)?;
            let dz = layer.tangent(tape, bound, dh)?;
            if k < last {
                let gate = tape.indicator(z)?;
                h = tape.relu(z)?;
                dh = tape.mul(dz, gate)?;
            } else {
                h = z;
                dh = dz;
            }
        }
        Ok((h, dh))
    }
}

/// Stride-`s` 3×3 convolution with bias, NHWC.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Conv {
    pub kernel: ParamId,
    pub bias: ParamId,
    pub stride: usize,
}

impl Conv {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut impl Rng,
        name: &str,
        input: usize,
        output: usize,
        stride: usize,
    ) -> Self {
        let fan = 9 * input;
        let kernel = store.add(format!("{name}.kernel"), uniform_init(rng, &[3, 3, input, output], fan));
        let bias = store.add(format!("{name}.bias"), uniform_init(rng, &[output], fan));
        Conv { kernel, bias, stride }
    }

    pub fn forward(&self, tape: &mut Tape, bound: &Bound, x: Var) -> Result<Var> {
        let y = tape.conv2d(x, bound.var(self.kernel), self.stride)?;
        tape.add(y, bound.var(self.bias))
    }
}
