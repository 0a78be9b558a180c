//! Single-layer GRU cell over `[x; h]` concatenated inputs.
//!
//! ```text
//! [z, r] = σ([x; h]·W_g + b_g)
//! ĥ      = tanh([x; r∘h]·W_c + b_c)
//! h'     = (1 − z)∘h + z∘ĥ
//! ```

use super::tensor::{affine, affine_backward, Tensor};
use crate::error::{ensure_shape, Result};
use crate::real::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct GruParams<T> {
    /// `(d_in + h) × 2h`; the first `h` columns feed the update gate `z`.
    pub gates_kernel: Tensor<T>,
    pub gates_bias: Tensor<T>,
    /// `(d_in + h) × h`.
    pub candidate_kernel: Tensor<T>,
    pub candidate_bias: Tensor<T>,
}

impl<T: Real> GruParams<T> {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let rows = input_dim + hidden_dim;
        GruParams {
            gates_kernel: Tensor::zeros(&[rows, 2 * hidden_dim]),
            gates_bias: Tensor::zeros(&[2 * hidden_dim]),
            candidate_kernel: Tensor::zeros(&[rows, hidden_dim]),
            candidate_bias: Tensor::zeros(&[hidden_dim]),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.candidate_bias.len()
    }

    pub fn input_dim(&self) -> usize {
        self.candidate_kernel.rows() - self.hidden_dim()
    }
}

#[inline]
pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Activations kept for the backward pass.
#[derive(Clone, Debug)]
pub(crate) struct GruTrace<T> {
    xh: Vec<T>,
    xrh: Vec<T>,
    z: Vec<T>,
    r: Vec<T>,
    cand: Vec<T>,
    pub(crate) h_new: Vec<T>,
}

/// One GRU step: returns the new hidden state.
pub fn gru_step<T: Real>(params: &GruParams<T>, x: &[T], h: &[T]) -> Result<Vec<T>> {
    ensure_shape!(
        x.len() == params.input_dim() && h.len() == params.hidden_dim(),
        "gru_step got x[{}], h[{}] for a cell with input {} and hidden {}",
        x.len(),
        h.len(),
        params.input_dim(),
        params.hidden_dim()
    );
    Ok(gru_forward(params, x, h).h_new)
}

pub(crate) fn gru_forward<T: Real>(params: &GruParams<T>, x: &[T], h: &[T]) -> GruTrace<T> {
    let hd = h.len();
    let d = x.len();
    let mut xh = Vec::with_capacity(d + hd);
    xh.extend_from_slice(x);
    xh.extend_from_slice(h);

    let mut gates = vec![T::zero(); 2 * hd];
    affine(&xh, &params.gates_kernel, params.gates_bias.data(), &mut gates);
    gates.iter_mut().for_each(|g| *g = sigmoid(*g));
    let r = gates.split_off(hd);
    let z = gates;

    let mut xrh = xh.clone();
    for ((slot, &ri), &hi) in xrh[d..].iter_mut().zip(&r).zip(h) {
        *slot = ri * hi;
    }
    let mut cand = vec![T::zero(); hd];
    affine(&xrh, &params.candidate_kernel, params.candidate_bias.data(), &mut cand);
    cand.iter_mut().for_each(|c| *c = c.tanh());

    let h_new = (0..hd).map(|i| (T::one() - z[i]) * h[i] + z[i] * cand[i]).collect();
    GruTrace { xh, xrh, z, r, cand, h_new }
}

/// Accumulates parameter gradients into `grads` and writes the input gradient to `dx`.
///
/// The previous hidden state is treated as a constant (one-step truncation).
pub(crate) fn gru_backward<T: Real>(
    params: &GruParams<T>,
    trace: &GruTrace<T>,
    dh_new: &[T],
    grads: &mut GruParams<T>,
    dx: &mut [T],
) {
    let hd = dh_new.len();
    let d = dx.len();
    let h = &trace.xh[d..];
    let one = T::one();

    let mut dz = vec![T::zero(); hd];
    let mut dcand_pre = vec![T::zero(); hd];
    for i in 0..hd {
        dz[i] = dh_new[i] * (trace.cand[i] - h[i]);
        let dc = dh_new[i] * trace.z[i];
        dcand_pre[i] = dc * (one - trace.cand[i] * trace.cand[i]);
    }

    let mut d_xrh = vec![T::zero(); d + hd];
    affine_backward(
        &trace.xrh,
        &params.candidate_kernel,
        &dcand_pre,
        &mut grads.candidate_kernel,
        grads.candidate_bias.data_mut(),
        &mut d_xrh,
    );

    let mut dgates = vec![T::zero(); 2 * hd];
    for i in 0..hd {
        let z = trace.z[i];
        let r = trace.r[i];
        dgates[i] = dz[i] * z * (one - z);
        let dr = d_xrh[d + i] * h[i];
        dgates[hd + i] = dr * r * (one - r);
    }

    let mut d_xh = vec![T::zero(); d + hd];
    affine_backward(
        &trace.xh,
        &params.gates_kernel,
        &dgates,
        &mut grads.gates_kernel,
        grads.gates_bias.data_mut(),
        &mut d_xh,
    );
    for i in 0..d {
        dx[i] = d_xrh[i] + d_xh[i];
    }
}
