//! Central-difference verification of the analytic gradients.

use super::batch::{session_parallel_batches, Batch};
use super::step::forward_backward;
use crate::error::{Error, Result};
use crate::model::{Model, Params};

pub const GRAD_CHECK_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// Largest `|analytic − numeric| / max(1, |analytic|, |numeric|)`.
    pub max_rel_error: f64,
    /// Tensor name and flat index of the worst coordinate.
    pub worst: (String, usize),
    /// Worst error per tensor, in storage order.
    pub per_tensor: Vec<(String, f64)>,
    pub coordinates: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= GRAD_CHECK_TOLERANCE
    }
}

/// Compares analytic and central-difference gradients for every parameter coordinate.
///
/// The objective is the summed step loss over one pass of `sessions` in stored
/// order, with each step's incoming hidden state frozen at its unperturbed value.
pub fn grad_check(model: &Model<f64>, sessions: &[Vec<u32>], batch_size: usize, eps: f64) -> Result<GradCheckReport> {
    let shape = model.shape();
    if sessions.len() > 10 || shape.vocab_size > 20 || shape.order() > 4 {
        return Err(Error::Input(format!(
            "gradient check is limited to 10 sessions, V ≤ 20 and order ≤ 4; got {} sessions, {shape}",
            sessions.len()
        )));
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::Input(format!("finite-difference step must be positive, got {eps}")));
    }

    let mut steps: Vec<(Batch, Vec<Vec<f64>>)> = Vec::new();
    let mut hidden = vec![model.initial_hidden(); batch_size];
    let mut analytic = Params::zeros(shape);
    for batch in session_parallel_batches(sessions, batch_size)? {
        let out = forward_backward(model, &batch, &hidden, None, Some(&mut analytic))?;
        let frozen = hidden.clone();
        for (slot, h) in out.hidden.into_iter().enumerate() {
            if let Some(h) = h {
                hidden[slot] = h;
            }
        }
        steps.push((batch, frozen));
    }
    let objective = |m: &Model<f64>| -> Result<f64> {
        let mut total = 0.0;
        for (batch, h) in &steps {
            total += forward_backward(m, batch, h, None, None)?.loss.unwrap_or(0.0);
        }
        Ok(total)
    };

    let mut probe = model.clone();
    let mut report =
        GradCheckReport { max_rel_error: 0.0, worst: (String::new(), 0), per_tensor: Vec::new(), coordinates: 0 };
    let names: Vec<(&'static str, usize)> = model.params().tensors().iter().map(|(n, t)| (*n, t.len())).collect();
    for (t, (name, len)) in names.into_iter().enumerate() {
        let grad = analytic.tensors()[t].1.data().to_vec();
        let mut worst = 0.0f64;
        for k in 0..len {
            let original = model.params().tensors()[t].1.data()[k];
            let set = |m: &mut Model<f64>, v: f64| m.params_mut().tensors_mut()[t].1.data_mut()[k] = v;
            set(&mut probe, original + eps);
            let up = objective(&probe)?;
            set(&mut probe, original - eps);
            let down = objective(&probe)?;
            set(&mut probe, original);
            let numeric = (up - down) / (2.0 * eps);
            let err = (grad[k] - numeric).abs() / 1f64.max(grad[k].abs()).max(numeric.abs());
            worst = worst.max(err);
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = (name.to_string(), k);
            }
        }
        report.per_tensor.push((name.to_string(), worst));
        report.coordinates += len;
    }
    Ok(report)
}
