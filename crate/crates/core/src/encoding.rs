//! Positional codes, half-vectors and the hard binarization step.

use std::f64::consts::PI;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

pub const VIEW: [f64; 3] = [0.0, 0.0, 1.0];

/// Sin/cos code of a vector whose components lie in `[-1, 1]`.
///
/// Per input dimension `d` the block is `sin(2^k π p_d), cos(2^k π p_d)` for
/// `k = 0..levels`, and blocks are concatenated in input order.
#[derive(Clone, Debug, PartialEq)]
pub struct PositionalCode {
    pub source: Vec<f64>,
    pub levels: usize,
    pub code: Vec<f64>,
}

pub fn code_len(dims: usize, levels: usize) -> usize {
    2 * levels * dims
}

pub fn positional_encode(p: &[f64], levels: usize) -> Result<PositionalCode> {
    if levels == 0 {
        return Err(Error::invalid("positional code needs at least one frequency"));
    }
    if let Some(bad) = p.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
        return Err(Error::invalid(format!(
            "positional code input {bad} outside [-1, 1]"
        )));
    }
    let mut code = Vec::with_capacity(code_len(p.len(), levels));
    encode_into(p, levels, &mut code);
    Ok(PositionalCode {
        source: p.to_vec(),
        levels,
        code,
    })
}

pub(crate) fn encode_into(p: &[f64], levels: usize, out: &mut Vec<f64>) {
    for &x in p {
        let mut freq = PI;
        for _ in 0..levels {
            out.push((freq * x).sin());
            out.push((freq * x).cos());
            freq *= 2.0;
        }
    }
}

/// Encodes every row of a `[rows, dims]` matrix; output is `[rows, 2·levels·dims]`.
pub fn encode_rows(rows: &[f64], dims: usize, levels: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows.len() * 2 * levels);
    for r in rows.chunks(dims) {
        encode_into(r, levels, &mut out);
    }
    out
}

/// Column-selection matrix and per-column frequency used to encode on a tape.
///
/// The code of an `[n, dims]` input `x` is `sin/cos` of `x · F`, where `F` is a
/// `[dims, levels·dims]` matrix scattering each input column to its `levels`
/// frequencies. Sines and cosines are then interleaved by a gather.
fn frequency_matrix(dims: usize, levels: usize) -> crate::array::Array {
    let width = dims * levels;
    let mut data = vec![0.0; dims * width];
    for d in 0..dims {
        let mut freq = PI;
        for k in 0..levels {
            data[d * width + d * levels + k] = freq;
            freq *= 2.0;
        }
    }
    crate::array::Array::matrix(dims, width, data).expect("consistent dims")
}

/// Differentiable positional code of an `[n, dims]` tape value.
pub fn encode_on_tape(tape: &mut Tape, x: Var, levels: usize) -> Result<Var> {
    let (_, dims) = tape.value(x).dims2()?;
    let freq = tape.leaf(frequency_matrix(dims, levels))?;
    let phase = tape.matmul(x, freq)?;
    let s = tape.sin(phase)?;
    let c = tape.cos(phase)?;
    interleave(tape, s, c, dims * levels)
}

/// Tangent of the code with respect to the input, given input tangent `dx`
/// (same shape as `x`): `d sin(f x) = f cos(f x) dx`, `d cos(f x) = -f sin(f x) dx`.
pub fn encode_tangent_on_tape(tape: &mut Tape, x: Var, dx: Var, levels: usize) -> Result<Var> {
    let (_, dims) = tape.value(x).dims2()?;
    let freq = tape.leaf(frequency_matrix(dims, levels))?;
    let phase = tape.matmul(x, freq)?;
    let dphase = tape.matmul(dx, freq)?;
    let s = tape.sin(phase)?;
    let c = tape.cos(phase)?;
    let ds = tape.mul(c, dphase)?;
    let sd = tape.mul(s, dphase)?;
    let dc = tape.neg(sd)?;
    interleave(tape, ds, dc, dims * levels)
}

fn interleave(tape: &mut Tape, s: Var, c: Var, width: usize) -> Result<Var> {
    let both = tape.concat(&[s, c])?;
    let (rows, _) = tape.value(both).dims2()?;
    let flat = tape.reshape(both, &[rows * 2 * width, 1])?;
    let mut order = Vec::with_capacity(rows * 2 * width);
    for r in 0..rows {
        let base = r * 2 * width;
        for j in 0..width {
            order.push(base + j);
            order.push(base + width + j);
        }
    }
    let picked = tape.gather_rows(flat, std::rc::Rc::new(order))?;
    tape.reshape(picked, &[rows, 2 * width])
}

/// Normalized bisector of `l` and the view direction `[0, 0, 1]`.
pub fn half_vector(l: [f64; 3]) -> Result<[f64; 3]> {
    let norm = (l[0] * l[0] + l[1] * l[1] + l[2] * l[2]).sqrt();
    if (norm - 1.0).abs() > 1e-6 || l[2] < 0.0 {
        return Err(Error::invalid(format!(
            "half vector needs a unit upper-hemisphere light, got {l:?}"
        )));
    }
    let s = [l[0], l[1], l[2] + 1.0];
    let n = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
    if n < 1e-12 {
        return Err(Error::Degenerate("light opposite to the view".into()));
    }
    Ok([s[0] / n, s[1] / n, s[2] / n])
}

/// `1` if `x > 0.5`, else `0`.
pub fn hard_step(x: f64) -> f64 {
    if x > 0.5 {
        1.0
    } else {
        0.0
    }
}

/// Hard step in the forward pass, identity Jacobian in the backward pass.
pub fn binarize(tape: &mut Tape, x: Var) -> Result<Var> {
    tape.step_straight_through(x)
}

/// Maps a pixel column/row to `[-1, 1]` with `y` pointing up.
pub fn normalized_pixel(col: usize, row: usize, width: usize, height: usize) -> [f64; 2] {
    let x = if width > 1 {
        2.0 * col as f64 / (width - 1) as f64 - 1.0
    } else {
        0.0
    };
    let y = if height > 1 {
        1.0 - 2.0 * row as f64 / (height - 1) as f64
    } else {
        0.0
    };
    [x, y]
}
