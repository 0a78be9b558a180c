//! Session representations and the three scoring rules.

use crate::error::{ensure_shape, Error, Result};
use crate::real::Real;
use crate::symmat::{order_from_packed_len, packed_quadratic_form, PackedSymMatrix};

/// Pre-exponent clamp on the last item coordinate of the matrix head.
pub const HALF_PLANE_CLAMP: f64 = 30.0;

/// Maps `v` into the upper half space `{y : y_n > 0}` by exponentiating its last coordinate.
///
/// The last coordinate is clamped to `[-30, 30]` before `exp`.
pub fn half_plane_embed<T: Real>(v: &[T]) -> Result<Vec<T>> {
    if v.is_empty() {
        return Err(Error::Shape("cannot embed an empty vector".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("half-plane embedding of a non-finite vector".into()));
    }
    let mut out = v.to_vec();
    embed_last_in_place(&mut out);
    Ok(out)
}

#[inline]
pub(crate) fn embed_last_in_place<T: Real>(y: &mut [T]) {
    let c = T::of(HALF_PLANE_CLAMP);
    let last = y.len() - 1;
    y[last] = y[last].max(-c).min(c).exp();
}

/// `∂ exp(clamp(v)) / ∂ v`: the embedded value inside the clamp range, zero outside.
#[inline]
pub(crate) fn embed_last_derivative<T: Real>(raw: T, embedded: T) -> T {
    let c = T::of(HALF_PLANE_CLAMP);
    if raw > c || raw < -c {
        T::zero()
    } else {
        embedded
    }
}

/// What the head makes of the GRU output.
#[derive(Clone, Debug, PartialEq)]
pub enum SessionEmbedding<T> {
    /// Hidden state with a trailing 1 appended.
    Vector(Vec<T>),
    /// Output of the expansion layer, width `order(order+1)/2`.
    Fc(Vec<T>),
    /// Packed upper triangle of the session matrix.
    Matrix(Vec<T>),
}

impl<T: Real> SessionEmbedding<T> {
    pub fn as_slice(&self) -> &[T] {
        match self {
            SessionEmbedding::Vector(v) | SessionEmbedding::Fc(v) | SessionEmbedding::Matrix(v) => v,
        }
    }

    pub fn cast<U: Real>(&self) -> SessionEmbedding<U> {
        let c = |v: &Vec<T>| v.iter().map(|x| U::of(x.f64())).collect();
        match self {
            SessionEmbedding::Vector(v) => SessionEmbedding::Vector(c(v)),
            SessionEmbedding::Fc(v) => SessionEmbedding::Fc(c(v)),
            SessionEmbedding::Matrix(v) => SessionEmbedding::Matrix(c(v)),
        }
    }

    /// The session matrix in 64-bit packed form (matrix head only).
    pub fn to_sym_matrix(&self) -> Result<PackedSymMatrix> {
        match self {
            SessionEmbedding::Matrix(v) => {
                let n = order_from_packed_len(v.len())
                    .ok_or_else(|| Error::Shape(format!("{} is not a triangular length", v.len())))?;
                PackedSymMatrix::from_packed(n, v.iter().map(|x| x.f64()).collect())
            }
            _ => Err(Error::Input("only the matrix head produces a session matrix".into())),
        }
    }
}

/// Scores one stored item row (plus its bias, if the head has one).
///
/// Matrix-head rows are the raw stored embeddings; the half-plane map is applied here.
pub fn score_row<T: Real>(session: &SessionEmbedding<T>, row: &[T], bias: Option<T>) -> Result<T> {
    match session {
        SessionEmbedding::Vector(ext) => {
            ensure_shape!(ext.len() == row.len() + 1, "extended session {} vs item {}", ext.len(), row.len());
            Ok(extended_dot(ext, row, bias.unwrap_or_else(T::zero)))
        }
        SessionEmbedding::Fc(e) => {
            ensure_shape!(e.len() == row.len(), "session {} vs item {}", e.len(), row.len());
            Ok(dot(e, row) + bias.unwrap_or_else(T::zero))
        }
        SessionEmbedding::Matrix(packed) => {
            ensure_shape!(
                order_from_packed_len(packed.len()) == Some(row.len()),
                "packed session {} vs item {}",
                packed.len(),
                row.len()
            );
            let y = half_plane_embed(row)?;
            Ok(packed_quadratic_form(packed, &y))
        }
    }
}

#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// `⟨(h, 1), (w, b)⟩`.
#[inline]
pub(crate) fn extended_dot<T: Real>(ext: &[T], w: &[T], b: T) -> T {
    dot(&ext[..w.len()], w) + ext[w.len()] * b
}
