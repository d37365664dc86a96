use crate::array::Array;
use crate::error::{Error, Result};

use super::{Tape, Var};

/// Evaluates `f` at `point` on a fresh tape, returning the scalar value.
fn evaluate<F>(f: &F, point: &Array) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let x = tape.leaf(point.clone())?;
    let y = f(&mut tape, x)?;
    let value = tape.value(y);
    if !value.is_scalar() {
        return Err(Error::RootNotScalar(value.shape().to_vec()));
    }
    Ok(value.item())
}

/// Central-difference gradient of a scalar function.
pub fn numeric_gradient<F>(f: &F, point: &Array, step: f64) -> Result<Array>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut grad = Array::zeros(point.shape());
    let mut probe = point.clone();
    for i in 0..point.len() {
        let x0 = point.data()[i];
        probe.data_mut()[i] = x0 + step;
        let up = evaluate(f, &probe)?;
        probe.data_mut()[i] = x0 - step;
        let down = evaluate(f, &probe)?;
        probe.data_mut()[i] = x0;
        let d = (up - down) / (2.0 * step);
        if !d.is_finite() {
            return Err(Error::NonFinite {
                op: "central difference",
            });
        }
        grad.data_mut()[i] = d;
    }
    Ok(grad)
}

/// Largest `|analytic - numeric| / max(1, |numeric|)` over the coordinates of `point`.
///
/// `f` must be smooth within `±step` of the point; kinks make the comparison meaningless.
pub fn check_gradient<F>(f: F, point: &Array, step: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let x = tape.leaf(point.clone())?;
    let y = f(&mut tape, x)?;
    let analytic = tape.backward(y)?.wrt(x);
    let numeric = numeric_gradient(&f, point, step)?;
    Ok(analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(a, n)| (a - n).abs() / n.abs().max(1.0))
        .fold(0.0, f64::max))
}
