//! Packed symmetric matrices and the quadratic form `yᵀAy`.
//!
//! A symmetric `n × n` matrix is stored as its upper triangle, row by row:
//! row `i` holds entries `(i,i) ..= (i,n-1)`. The same layout is used for
//! the flattened vectors `Γ₁(A)` and `Γ₂(x)`, which turn the quadratic form
//! into a plain inner product.

mod eigen;

pub use eigen::{eigendecompose, eigendecompose_with_tol, EigenDecomposition, MAX_SWEEPS};

use crate::error::{ensure_shape, Error, Result};
use crate::real::Real;

/// Number of stored entries for a symmetric matrix of order `n`.
#[inline]
pub const fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Recovers the order `n` from a packed length, if it is triangular.
pub fn order_from_packed_len(len: usize) -> Option<usize> {
    let n = (((8 * len + 1) as f64).sqrt() as usize).saturating_sub(1) / 2;
    (n..=n + 1).find(|&m| packed_len(m) == len)
}

/// Zero-based offset of entry `(i, j)`, `i <= j`, both zero-based.
#[inline]
pub(crate) fn offset(i: usize, j: usize, n: usize) -> usize {
    debug_assert!(i <= j && j < n);
    i * n - i * (i + 1) / 2 + j
}

/// Offset of the one-based entry `(i, j)` with `1 <= i <= j <= n`.
pub fn pack_index(i: usize, j: usize, n: usize) -> Result<usize> {
    if i == 0 || i > j || j > n {
        return Err(Error::Index(format!("({i}, {j}) is not an upper-triangle entry of order {n}")));
    }
    Ok(offset(i - 1, j - 1, n))
}

/// `Σ_{i≤j} a_ij · k_ij · y_i · y_j`, accumulated in packed order.
///
/// Evaluating the form this way gives bit-identical results to the inner
/// product of `Γ₁(A)` with `Γ₂(y)` summed front to back.
#[inline]
pub(crate) fn packed_quadratic_form<T: Real>(values: &[T], y: &[T]) -> T {
    let n = y.len();
    let two = T::of(2.0);
    let mut acc = T::zero();
    let mut p = 0;
    for i in 0..n {
        let yi = y[i];
        acc += values[p] * (yi * yi);
        p += 1;
        let twice = two * yi;
        for &yj in &y[i + 1..] {
            acc += values[p] * (twice * yj);
            p += 1;
        }
    }
    acc
}

/// Writes `Γ₂(x)` into `out` (length `n(n+1)/2`).
#[inline]
pub(crate) fn gamma2_into<T: Real>(x: &[T], out: &mut [T]) {
    let two = T::of(2.0);
    let mut p = 0;
    for (i, &xi) in x.iter().enumerate() {
        out[p] = xi * xi;
        p += 1;
        let twice = two * xi;
        for &xj in &x[i + 1..] {
            out[p] = twice * xj;
            p += 1;
        }
    }
}

/// `2·A·y` for a packed `A`, the gradient of `yᵀAy` with respect to `y`.
pub(crate) fn packed_grad_y<T: Real>(values: &[T], y: &[T], out: &mut [T]) {
    let n = y.len();
    out.iter_mut().for_each(|o| *o = T::zero());
    let mut p = 0;
    for i in 0..n {
        out[i] += values[p] * y[i];
        p += 1;
        for j in i + 1..n {
            let a = values[p];
            out[i] += a * y[j];
            out[j] += a * y[i];
            p += 1;
        }
    }
    let two = T::of(2.0);
    out.iter_mut().for_each(|o| *o = two * *o);
}

/// A real symmetric matrix in packed upper-triangle storage.
#[derive(Clone, Debug, PartialEq)]
pub struct PackedSymMatrix {
    dim: usize,
    values: Vec<f64>,
}

impl PackedSymMatrix {
    pub fn zeros(dim: usize) -> Self {
        PackedSymMatrix { dim, values: vec![0.0; packed_len(dim)] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.values[offset(i, i, dim)] = 1.0;
        }
        m
    }

    /// Wraps packed values; fails unless `values.len() == n(n+1)/2` and every value is finite.
    pub fn from_packed(dim: usize, values: Vec<f64>) -> Result<Self> {
        ensure_shape!(
            dim > 0 && values.len() == packed_len(dim),
            "packed length {} does not match order {dim} (expected {})",
            values.len(),
            packed_len(dim)
        );
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("packed matrix has non-finite entries".into()));
        }
        Ok(PackedSymMatrix { dim, values })
    }

    /// Packs a dense row-major matrix, reading only its upper triangle.
    pub fn from_dense(dim: usize, dense: &[f64]) -> Result<Self> {
        ensure_shape!(dense.len() == dim * dim, "dense length {} is not {dim}²", dense.len());
        let mut values = Vec::with_capacity(packed_len(dim));
        for i in 0..dim {
            values.extend_from_slice(&dense[i * dim + i..(i + 1) * dim]);
        }
        Self::from_packed(dim, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Entry `(i, j)`, zero-based, either triangle.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        self.values[offset(lo, hi, self.dim)]
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dim;
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = self.values[offset(i, j, n)];
                dense[i * n + j] = v;
                dense[j * n + i] = v;
            }
        }
        dense
    }

    pub fn frobenius_norm(&self) -> f64 {
        let n = self.dim;
        let mut sum = 0.0;
        for i in 0..n {
            for j in i..n {
                let v = self.values[offset(i, j, n)];
                sum += if i == j { v * v } else { 2.0 * v * v };
            }
        }
        sum.sqrt()
    }
}

/// Reshapes a flat vector of length `n(n+1)/2` into a symmetric matrix.
pub fn reshape_to_symmetric(z: &[f64], n: usize) -> Result<PackedSymMatrix> {
    PackedSymMatrix::from_packed(n, z.to_vec())
}

/// `yᵀAy`.
pub fn quadratic_form(a: &PackedSymMatrix, y: &[f64]) -> Result<f64> {
    ensure_shape!(y.len() == a.dim, "vector length {} does not match order {}", y.len(), a.dim);
    Ok(packed_quadratic_form(&a.values, y))
}

/// `Γ₁(A)`: the packed upper triangle itself.
pub fn gamma1(a: &PackedSymMatrix) -> Vec<f64> {
    a.values.clone()
}

/// `Γ₂(x)`: entry `(i, j)` is `x_i·x_j` on the diagonal and `2·x_i·x_j` off it.
pub fn gamma2(x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; packed_len(x.len())];
    gamma2_into(x, &mut out);
    out
}
