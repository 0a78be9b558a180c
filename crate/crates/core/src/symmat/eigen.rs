//! Cyclic Jacobi eigensolver for packed symmetric matrices.

use super::PackedSymMatrix;
use crate::error::{Error, Result};

/// Upper bound on full cyclic sweeps before giving up.
pub const MAX_SWEEPS: usize = 64;

/// Relative off-diagonal threshold used by [`eigendecompose`].
const DEFAULT_REL_TOL: f64 = 1e-12;

/// Coordinates with magnitude at or below this count as zero when fixing signs.
const SIGN_EPS: f64 = 1e-12;

/// `A = Σ λ_i α_i α_iᵀ` with eigenvalues descending.
///
/// Every `α_i` has unit length and a positive last coordinate; when the last
/// coordinate vanishes the first nonzero coordinate is positive instead.
/// Vectors belonging to equal eigenvalues come in solver order.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `Σ λ_i α_i α_iᵀ` as a dense row-major matrix.
    pub fn reconstruct_dense(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n * n];
        for (lambda, v) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            for i in 0..n {
                let s = lambda * v[i];
                for j in 0..n {
                    out[i * n + j] += s * v[j];
                }
            }
        }
        out
    }

    /// `Σ λ_i ⟨α_i, x⟩²`.
    pub fn spectral_form(&self, x: &[f64]) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&self.eigenvectors)
            .map(|(l, v)| {
                let d: f64 = v.iter().zip(x).map(|(a, b)| a * b).sum();
                l * d * d
            })
            .sum()
    }
}

/// Eigendecomposition with the off-diagonal threshold `1e-12·‖A‖_F`.
pub fn eigendecompose(a: &PackedSymMatrix) -> Result<EigenDecomposition> {
    let tol = DEFAULT_REL_TOL * a.frobenius_norm();
    if tol == 0.0 {
        return Ok(finish(a.dim(), vec![0.0; a.dim() * a.dim()], identity(a.dim())));
    }
    eigendecompose_with_tol(a, tol)
}

/// Eigendecomposition that stops once the off-diagonal Frobenius norm is at most `tol`.
pub fn eigendecompose_with_tol(a: &PackedSymMatrix, tol: f64) -> Result<EigenDecomposition> {
    jacobi(a, tol, MAX_SWEEPS)
}

fn jacobi(a: &PackedSymMatrix, tol: f64, max_sweeps: usize) -> Result<EigenDecomposition> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Input(format!("eigensolver tolerance must be positive, got {tol}")));
    }
    let n = a.dim();
    let mut m = a.to_dense();
    let mut v = identity(n);

    let mut off = off_diagonal_norm(&m, n);
    let mut sweeps = 0;
    while off > tol {
        if sweeps == max_sweeps {
            return Err(Error::Numeric(format!(
                "Jacobi iteration did not converge after {max_sweeps} sweeps (off-diagonal norm {off:e})"
            )));
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut m, &mut v, n, p, q);
            }
        }
        off = off_diagonal_norm(&m, n);
        sweeps += 1;
    }
    Ok(finish(n, m, v))
}

fn identity(n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    v
}

fn off_diagonal_norm(m: &[f64], n: usize) -> f64 {
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += 2.0 * m[i * n + j] * m[i * n + j];
        }
    }
    sum.sqrt()
}

/// Applies the plane rotation that zeroes `m[p][q]`, accumulating it into `v`.
fn rotate(m: &mut [f64], v: &mut [f64], n: usize, p: usize, q: usize) {
    let apq = m[p * n + q];
    if apq == 0.0 {
        return;
    }
    let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        let t = 1.0 / (theta.abs() + (theta * theta + 1.0).sqrt());
        if theta < 0.0 {
            -t
        } else {
            t
        }
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for k in 0..n {
        let (kp, kq) = (m[k * n + p], m[k * n + q]);
        m[k * n + p] = c * kp - s * kq;
        m[k * n + q] = s * kp + c * kq;
    }
    for k in 0..n {
        let (pk, qk) = (m[p * n + k], m[q * n + k]);
        m[p * n + k] = c * pk - s * qk;
        m[q * n + k] = s * pk + c * qk;
    }
    m[p * n + q] = 0.0;
    m[q * n + p] = 0.0;
    for k in 0..n {
        let (kp, kq) = (v[k * n + p], v[k * n + q]);
        v[k * n + p] = c * kp - s * kq;
        v[k * n + q] = s * kp + c * kq;
    }
}

fn finish(n: usize, m: Vec<f64>, v: Vec<f64>) -> EigenDecomposition {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]));

    let eigenvalues = order.iter().map(|&i| m[i * n + i]).collect();
    let eigenvectors = order
        .iter()
        .map(|&col| {
            let mut vec: Vec<f64> = (0..n).map(|row| v[row * n + col]).collect();
            normalize_sign(&mut vec);
            vec
        })
        .collect();
    EigenDecomposition { eigenvalues, eigenvectors }
}

fn normalize_sign(vec: &mut [f64]) {
    let last = vec[vec.len() - 1];
    let flip = if last.abs() > SIGN_EPS {
        last < 0.0
    } else {
        vec.iter().find(|x| x.abs() > SIGN_EPS).is_some_and(|&x| x < 0.0)
    };
    if flip {
        vec.iter_mut().for_each(|x| *x = -*x);
    }
}
