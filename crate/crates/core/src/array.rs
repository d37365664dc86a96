//! Dense row-major arrays of `f64`.

use crate::error::{Error, Result};

/// Dense row-major n-dimensional array. A rank-0 array holds one scalar.
#[derive(Clone, Debug, PartialEq)]
pub struct Array {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Array {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::InvalidShape {
                op: "array",
                shape: shape.to_vec(),
            });
        }
        Ok(Array {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, 1.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        Array {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Array {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    /// One-dimensional array.
    pub fn vector(data: Vec<f64>) -> Self {
        Array {
            shape: vec![data.len()],
            data,
        }
    }

    /// Two-dimensional array from row-major data.
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(&[rows, cols], data)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::invalid("ragged rows"));
            }
            data.extend_from_slice(r);
        }
        Self::matrix(rows.len(), cols, data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// Value of a single-element array.
    pub fn item(&self) -> f64 {
        self.data[0]
    }

    /// Rows and columns of a rank-2 array.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            [r, c] => Ok((*r, *c)),
            _ => Err(Error::InvalidShape {
                op: "dims2",
                shape: self.shape.clone(),
            }),
        }
    }

    pub fn at2(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.shape[1] + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = *self.shape.last().unwrap_or(&1);
        &self.data[r * c..(r + 1) * c]
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::ShapeMismatch {
                op: "reshape",
                lhs: self.shape,
                rhs: shape.to_vec(),
            });
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Array {
        Array {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Array) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn add_assign(&mut self, other: &Array) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn transpose(&self) -> Result<Array> {
        let (r, c) = self.dims2()?;
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.data[i * c + j];
            }
        }
        Array::matrix(c, r, out)
    }
}

/// Shape obtained by right-aligned broadcasting, numpy style.
pub(crate) fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for i in 0..rank {
        let da = dim_from_right(a, rank - 1 - i);
        let db = dim_from_right(b, rank - 1 - i);
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

fn dim_from_right(shape: &[usize], k: usize) -> usize {
    if k < shape.len() {
        shape[shape.len() - 1 - k]
    } else {
        1
    }
}

/// Strides of `shape` viewed inside a broadcast `out` shape; broadcast axes get stride 0.
fn broadcast_strides(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let rank = out.len();
    let mut strides = vec![0; rank];
    let mut acc = 1;
    for k in 0..rank {
        let d = dim_from_right(shape, k);
        let axis = rank - 1 - k;
        strides[axis] = if d == 1 { 0 } else { acc };
        acc *= d;
    }
    strides
}

/// Source offsets of every output element for a broadcast operand.
pub(crate) fn broadcast_offsets(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let strides = broadcast_strides(shape, out);
    let total: usize = out.iter().product();
    let mut offsets = Vec::with_capacity(total);
    let mut index = vec![0usize; out.len()];
    let mut offset = 0usize;
    for _ in 0..total {
        offsets.push(offset);
        for axis in (0..out.len()).rev() {
            index[axis] += 1;
            offset += strides[axis];
            if index[axis] < out[axis] {
                break;
            }
            offset -= strides[axis] * index[axis];
            index[axis] = 0;
        }
    }
    offsets
}

/// Element-wise binary op with broadcasting.
pub(crate) fn zip_broadcast(
    op: &'static str,
    a: &Array,
    b: &Array,
    f: impl Fn(f64, f64) -> f64,
) -> Result<Array> {
    if a.shape == b.shape {
        let data = a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect();
        return Ok(Array {
            shape: a.shape.clone(),
            data,
        });
    }
    let out = broadcast_shape(&a.shape, &b.shape).ok_or_else(|| Error::ShapeMismatch {
        op,
        lhs: a.shape.clone(),
        rhs: b.shape.clone(),
    })?;
    let data = if b.data.len() == 1 {
        let y = b.data[0];
        let oa = broadcast_offsets(&a.shape, &out);
        oa.iter().map(|&i| f(a.data[i], y)).collect()
    } else if a.data.len() == 1 {
        let x = a.data[0];
        let ob = broadcast_offsets(&b.shape, &out);
        ob.iter().map(|&j| f(x, b.data[j])).collect()
    } else {
        let oa = broadcast_offsets(&a.shape, &out);
        let ob = broadcast_offsets(&b.shape, &out);
        oa.iter()
            .zip(&ob)
            .map(|(&i, &j)| f(a.data[i], b.data[j]))
            .collect()
    };
    Ok(Array { shape: out, data })
}

/// Sums a broadcast-shaped adjoint back down to `shape`.
pub(crate) fn reduce_to_shape(grad: &Array, shape: &[usize]) -> Array {
    if grad.shape == shape {
        return grad.clone();
    }
    let mut out = Array::zeros(shape);
    if out.data.len() == 1 {
        out.data[0] = grad.sum();
        return out;
    }
    let offsets = broadcast_offsets(shape, &grad.shape);
    for (g, &o) in grad.data.iter().zip(&offsets) {
        out.data[o] += g;
    }
    out
}

/// `c = op(a) * op(b)` (+ `c` when `accumulate`), row-major, via a blocked gemm kernel.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_trans: bool,
    b: &[f64],
    b_trans: bool,
    c: &mut [f64],
    accumulate: bool,
) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: the asserts above bound every index the kernel touches given
    // these strides, and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub fn matmul(a: &Array, b: &Array) -> Result<Array> {
    let (m, k) = a.dims2()?;
    let (k2, n) = b.dims2()?;
    if k != k2 {
        return Err(Error::ShapeMismatch {
            op: "matmul",
            lhs: a.shape.clone(),
            rhs: b.shape.clone(),
        });
    }
    let mut out = vec![0.0; m * n];
    gemm(m, k, n, &a.data, false, &b.data, false, &mut out, false);
    Array::matrix(m, n, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn broadcast_row_and_column() {
        let a = Array::matrix(2, 3, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let row = Array::matrix(1, 3, vec![10., 20., 30.]).unwrap();
        let col = Array::matrix(2, 1, vec![100., 200.]).unwrap();
        let r = zip_broadcast("add", &a, &row, |x, y| x + y).unwrap();
        assert_eq!(r.data(), &[11., 22., 33., 14., 25., 36.]);
        let c = zip_broadcast("add", &a, &col, |x, y| x + y).unwrap();
        assert_eq!(c.data(), &[101., 102., 103., 204., 205., 206.]);
        let outer = zip_broadcast("mul", &col, &row, |x, y| x * y).unwrap();
        assert_eq!(outer.shape(), &[2, 3]);
        assert_eq!(outer.data()[5], 200. * 30.);
    }

    #[test]
    fn reduce_inverts_broadcast() {
        let g = Array::ones(&[4, 3]);
        assert_eq!(reduce_to_shape(&g, &[1, 3]).data(), &[4., 4., 4.]);
        assert_eq!(reduce_to_shape(&g, &[4, 1]).data(), &[3., 3., 3., 3.]);
        assert_eq!(reduce_to_shape(&g, &[3]).data(), &[4., 4., 4.]);
        assert_eq!(reduce_to_shape(&g, &[]).item(), 12.);
    }

    #[test]
    fn incompatible_shapes_rejected() {
        let a = Array::zeros(&[2, 3]);
        let b = Array::zeros(&[3, 2]);
        assert!(zip_broadcast("add", &a, &b, |x, y| x + y).is_err());
        assert!(Array::new(&[2, 2], vec![0.0; 3]).is_err());
    }

    #[test]
    fn gemm_transposes() {
        let a = Array::matrix(2, 3, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let b = Array::matrix(3, 2, vec![7., 8., 9., 10., 11., 12.]).unwrap();
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.data(), &[58., 64., 139., 154.]);
        let at = a.transpose().unwrap();
        let mut out = vec![0.0; 4];
        gemm(2, 3, 2, at.data(), true, b.data(), false, &mut out, false);
        assert_eq!(out, c.data());
        let bt = b.transpose().unwrap();
        gemm(2, 3, 2, a.data(), false, bt.data(), true, &mut out, true);
        assert_eq!(out, vec![116., 128., 278., 308.]);
    }
}
