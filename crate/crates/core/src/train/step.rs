//! Forward and backward pass for one session-parallel batch.
//!
//! Each active slot advances its GRU by one click. Slot `b` is scored
//! against every target in the batch: its own target is the positive, the
//! targets of the other slots (when they name a different item) are its
//! negatives. The step loss is the mean BPR loss over slots that have at
//! least one negative. Gradients stop at the previous hidden state.

use super::batch::{Batch, SlotStep};
use super::loss::bpr_with_grad;
use crate::error::{ensure_shape, Error, Result};
use crate::model::{
    affine_backward, dot, embed_last_derivative, embed_last_in_place, extended_dot, gru_backward, gru_forward,
    HeadKind, Model, Params, SessionEmbedding,
};
use crate::real::Real;
use crate::symmat::{gamma2_into, packed_grad_y, packed_len};

pub(crate) struct StepOutput<T> {
    /// `None` when no slot had a negative.
    pub loss: Option<T>,
    /// New hidden state per slot, before dropout; `None` for idle slots.
    pub hidden: Vec<Option<Vec<T>>>,
    /// Loss gradient with respect to each slot's session embedding (filled only with `grads`).
    #[cfg_attr(not(test), allow(dead_code))]
    pub session_grads: Vec<Option<Vec<T>>>,
}

/// Runs one batch; accumulates parameter gradients into `grads` when given.
pub(crate) fn forward_backward<T: Real>(
    model: &Model<T>,
    batch: &Batch,
    prev_hidden: &[Vec<T>],
    masks: Option<&[Vec<T>]>,
    grads: Option<&mut Params<T>>,
) -> Result<StepOutput<T>> {
    let shape = *model.shape();
    let params = model.params();
    let hd = shape.hidden_dim;
    let slots = batch.slots.len();
    ensure_shape!(prev_hidden.len() == slots, "{} hidden states for {slots} slots", prev_hidden.len());

    let active: Vec<(usize, SlotStep)> = batch.active().map(|(i, s)| (i, *s)).collect();
    for (_, s) in &active {
        if s.input as usize >= shape.vocab_size || s.target as usize >= shape.vocab_size {
            return Err(Error::Index(format!("batch item outside vocabulary of {}", shape.vocab_size)));
        }
    }

    // Encoder.
    let zeros = vec![T::zero(); hd];
    let mut traces = Vec::with_capacity(active.len());
    let mut dropped = Vec::with_capacity(active.len());
    let mut embeddings = Vec::with_capacity(active.len());
    for (slot, s) in &active {
        let h_prev = if s.reset { &zeros } else { &prev_hidden[*slot] };
        ensure_shape!(h_prev.len() == hd, "slot {slot} hidden has width {}", h_prev.len());
        let trace = gru_forward(&params.gru, params.embeddings.trigger.row(s.input as usize), h_prev);
        let mut h = trace.h_new.clone();
        if let Some(m) = masks {
            h.iter_mut().zip(&m[*slot]).for_each(|(x, &k)| *x *= k);
        }
        embeddings.push(model.session_embedding(&h)?);
        dropped.push(h);
        traces.push(trace);
    }

    // Item side, one column per active slot's target.
    let targets: Vec<usize> = active.iter().map(|(_, s)| s.target as usize).collect();
    let out = &params.embeddings.output;
    let bias: Vec<T> = match &params.embeddings.output_bias {
        Some(b) => targets.iter().map(|&t| b.data()[t]).collect(),
        None => vec![T::zero(); targets.len()],
    };
    let (embedded, flattened) = if let HeadKind::Matrix { order } = shape.head {
        let mut ys = Vec::with_capacity(targets.len());
        let mut gs = Vec::with_capacity(targets.len());
        for &t in &targets {
            let mut y = out.row(t).to_vec();
            embed_last_in_place(&mut y);
            let mut g = vec![T::zero(); packed_len(order)];
            gamma2_into(&y, &mut g);
            ys.push(y);
            gs.push(g);
        }
        (ys, gs)
    } else {
        (Vec::new(), Vec::new())
    };
    let score = |b: usize, c: usize| -> T {
        match &embeddings[b] {
            SessionEmbedding::Vector(ext) => extended_dot(ext, out.row(targets[c]), bias[c]),
            SessionEmbedding::Fc(e) => dot(e, out.row(targets[c])) + bias[c],
            SessionEmbedding::Matrix(a) => dot(a, &flattened[c]),
        }
    };

    // Loss and score gradients.
    let mut d_scores: Vec<(usize, usize, T)> = Vec::new();
    let mut total = T::zero();
    let mut contributing = 0usize;
    let mut negatives = Vec::new();
    let mut neg_cols = Vec::new();
    let mut d_negs = Vec::new();
    for b in 0..active.len() {
        neg_cols.clear();
        neg_cols.extend((0..active.len()).filter(|&c| c != b && targets[c] != targets[b]));
        if neg_cols.is_empty() {
            continue;
        }
        negatives.clear();
        negatives.extend(neg_cols.iter().map(|&c| score(b, c)));
        let (loss, d_pos) = bpr_with_grad(score(b, b), &negatives, &mut d_negs);
        total += loss;
        contributing += 1;
        d_scores.push((b, b, d_pos));
        d_scores.extend(neg_cols.iter().zip(&d_negs).map(|(&c, &g)| (b, c, g)));
    }

    let mut hidden: Vec<Option<Vec<T>>> = vec![None; slots];
    let mut session_grads: Vec<Option<Vec<T>>> = vec![None; slots];
    for ((slot, _), trace) in active.iter().zip(&traces) {
        hidden[*slot] = Some(trace.h_new.clone());
    }
    if contributing == 0 {
        return Ok(StepOutput { loss: None, hidden, session_grads });
    }
    let scale = T::one() / T::of(contributing as f64);
    let loss = total * scale;

    let Some(grads) = grads else {
        return Ok(StepOutput { loss: Some(loss), hidden, session_grads });
    };

    // Head backward.
    let width = embeddings.first().map_or(0, |e| e.as_slice().len());
    let mut d_emb = vec![vec![T::zero(); width]; active.len()];
    let out_dim = shape.output_dim();
    let mut d_items = vec![vec![T::zero(); out_dim]; targets.len()];
    let mut d_bias = vec![T::zero(); targets.len()];
    let mut grad_y = vec![T::zero(); out_dim];
    for &(b, c, g) in &d_scores {
        let g = g * scale;
        d_bias[c] += g;
        match &embeddings[b] {
            SessionEmbedding::Vector(ext) => {
                let w = out.row(targets[c]);
                for k in 0..out_dim {
                    d_items[c][k] += g * ext[k];
                    d_emb[b][k] += g * w[k];
                }
            }
            SessionEmbedding::Fc(e) => {
                let w = out.row(targets[c]);
                for k in 0..out_dim {
                    d_items[c][k] += g * e[k];
                    d_emb[b][k] += g * w[k];
                }
            }
            SessionEmbedding::Matrix(a) => {
                for (d, &f) in d_emb[b].iter_mut().zip(&flattened[c]) {
                    *d += g * f;
                }
                packed_grad_y(a, &embedded[c], &mut grad_y);
                for (d, &gy) in d_items[c].iter_mut().zip(&grad_y) {
                    *d += g * gy;
                }
            }
        }
    }

    for (c, &t) in targets.iter().enumerate() {
        let row = grads.embeddings.output.row_mut(t);
        if let HeadKind::Matrix { .. } = shape.head {
            let last = out_dim - 1;
            let dlast = embed_last_derivative(out.row(t)[last], embedded[c][last]);
            d_items[c][last] *= dlast;
        }
        row.iter_mut().zip(&d_items[c]).for_each(|(r, &d)| *r += d);
        if let Some(b) = &mut grads.embeddings.output_bias {
            b.data_mut()[t] += d_bias[c];
        }
    }

    // Encoder backward.
    let mut dh = vec![T::zero(); hd];
    let mut dx = vec![T::zero(); shape.input_dim];
    for (b, ((slot, s), trace)) in active.iter().zip(&traces).enumerate() {
        match shape.head {
            HeadKind::Vector => dh.copy_from_slice(&d_emb[b][..hd]),
            HeadKind::Fc { .. } => {
                let dense = params.dense.as_ref().expect("fc head has a dense layer");
                let dgrad = grads.dense.as_mut().expect("fc gradients have a dense layer");
                affine_backward(&dropped[b], &dense.kernel, &d_emb[b], &mut dgrad.kernel, dgrad.bias.data_mut(), &mut dh);
            }
            HeadKind::Matrix { .. } => dh.copy_from_slice(&d_emb[b]),
        }
        if let Some(m) = masks {
            dh.iter_mut().zip(&m[*slot]).for_each(|(x, &k)| *x *= k);
        }
        gru_backward(&params.gru, trace, &dh, &mut grads.gru, &mut dx);
        grads.embeddings.trigger.row_mut(s.input as usize).iter_mut().zip(&dx).for_each(|(r, &d)| *r += d);
        session_grads[*slot] = Some(std::mem::take(&mut d_emb[b]));
    }

    Ok(StepOutput { loss: Some(loss), hidden, session_grads })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelShape, Tensor};
    use crate::train::loss::bpr_loss;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn slot(input: u32, target: u32) -> Option<SlotStep> {
        Some(SlotStep { input, target, reset: true })
    }

    fn batch() -> Batch {
        Batch { slots: vec![slot(0, 3), slot(1, 4), None, slot(2, 5)] }
    }

    #[test]
    fn linear_vector_head_gradient() {
        // Fixed hidden states, so only the linear scoring layer and BPR are involved.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let hs: Vec<Vec<f64>> = (0..3).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let mut w: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let loss = |w: &[f64]| -> f64 {
            let s = |b: usize, c: usize| hs[b].iter().zip(&w[c * 4..c * 4 + 4]).map(|(x, y)| x * y).sum::<f64>();
            (0..3)
                .map(|b| bpr_loss(s(b, b), &(0..3).filter(|&c| c != b).map(|c| s(b, c)).collect::<Vec<_>>()))
                .sum::<f64>()
                / 3.0
        };
        let mut analytic = vec![0.0; 12];
        for b in 0..3 {
            let negs: Vec<usize> = (0..3).filter(|&c| c != b).collect();
            let s = |c: usize| hs[b].iter().zip(&w[c * 4..c * 4 + 4]).map(|(x, y)| x * y).sum::<f64>();
            let mut dn = Vec::new();
            let (_, dp) = bpr_with_grad(s(b), &negs.iter().map(|&c| s(c)).collect::<Vec<_>>(), &mut dn);
            for k in 0..4 {
                analytic[b * 4 + k] += dp * hs[b][k] / 3.0;
                for (&c, &g) in negs.iter().zip(&dn) {
                    analytic[c * 4 + k] += g * hs[b][k] / 3.0;
                }
            }
        }
        let eps = 1e-5;
        for i in 0..12 {
            let orig = w[i];
            w[i] = orig + eps;
            let up = loss(&w);
            w[i] = orig - eps;
            let down = loss(&w);
            w[i] = orig;
            let num = (up - down) / (2.0 * eps);
            assert!((num - analytic[i]).abs() / analytic[i].abs().max(1.0) <= 1e-8);
        }
    }

    #[test]
    fn untouched_rows_get_zero_gradient() {
        for shape in [ModelShape::vector(9, 3, 4), ModelShape::fc(9, 3, 4, 3), ModelShape::matrix(9, 3, 3)] {
            let model = Model::<f64>::new(shape, 3).unwrap();
            let mut grads = Params::zeros(&shape);
            let hidden = vec![vec![0.0; shape.hidden_dim]; 4];
            let out = forward_backward(&model, &batch(), &hidden, None, Some(&mut grads)).unwrap();
            assert!(out.loss.is_some());
            assert!(out.hidden[2].is_none());
            for item in 0..9 {
                let trig_zero = grads.embeddings.trigger.row(item).iter().all(|&g| g == 0.0);
                let out_zero = grads.embeddings.output.row(item).iter().all(|&g| g == 0.0);
                assert_eq!(trig_zero, !(0..3).contains(&item), "trigger row {item}");
                assert_eq!(out_zero, !(3..6).contains(&item), "output row {item}");
            }
        }
    }

    #[test]
    fn identical_targets_are_not_negatives() {
        let model = Model::<f64>::new(ModelShape::vector(5, 2, 2), 0).unwrap();
        let b = Batch { slots: vec![slot(0, 4), slot(1, 4)] };
        let out = forward_backward(&model, &b, &[vec![0.0; 2], vec![0.0; 2]], None, None).unwrap();
        assert!(out.loss.is_none());
    }

    #[test]
    fn fc_dense_bias_gradient_sums_upstream() {
        let shape = ModelShape::fc(9, 3, 4, 3);
        let model = Model::<f64>::new(shape, 8).unwrap();
        let mut grads = Params::zeros(&shape);
        let hidden = vec![vec![0.1; 4]; 4];
        let out = forward_backward(&model, &batch(), &hidden, None, Some(&mut grads)).unwrap();
        let mut sum = vec![0.0; 6];
        for g in out.session_grads.iter().flatten() {
            sum.iter_mut().zip(g).for_each(|(s, x)| *s += x);
        }
        let db = grads.dense.as_ref().unwrap().bias.data();
        for (a, b) in db.iter().zip(&sum) {
            assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn saturated_margins_give_vanishing_gradients() {
        // Two slots whose hidden states are nearly one-hot and whose targets sit far apart.
        let shape = ModelShape::vector(4, 2, 2);
        let mut p = Params::<f64>::zeros(&shape);
        p.embeddings.trigger = Tensor::from_vec(&[4, 2], vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        p.embeddings.output = Tensor::from_vec(&[4, 2], vec![0.0, 0.0, 0.0, 0.0, 60.0, 0.0, 0.0, 60.0]).unwrap();
        p.gru.gates_bias.data_mut()[..2].copy_from_slice(&[40.0, 40.0]);
        p.gru.candidate_kernel = Tensor::from_vec(&[4, 2], vec![10.0, 0.0, 0.0, 10.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let model = Model::from_params(shape, p).unwrap();
        let mut grads = Params::zeros(&shape);
        let b = Batch { slots: vec![slot(0, 2), slot(1, 3)] };
        let out = forward_backward(&model, &b, &[vec![0.0; 2], vec![0.0; 2]], None, Some(&mut grads)).unwrap();
        assert!(out.loss.unwrap() < 1e-20);
        for (name, t) in grads.tensors() {
            assert!(t.data().iter().all(|g| g.abs() < 1e-15), "{name}");
        }
    }

    #[test]
    fn dropout_mask_zeroes_hidden_gradient_path() {
        let shape = ModelShape::matrix(9, 3, 3);
        let model = Model::<f64>::new(shape, 4).unwrap();
        let hidden = vec![vec![0.0; 6]; 4];
        let masks = vec![vec![0.0; 6]; 4];
        let mut grads = Params::zeros(&shape);
        forward_backward(&model, &batch(), &hidden, Some(&masks), Some(&mut grads)).unwrap();
        // Everything upstream of the (fully dropped) hidden state sees no gradient.
        assert!(grads.gru.gates_kernel.data().iter().all(|&g| g == 0.0));
        assert!(grads.embeddings.trigger.data().iter().all(|&g| g == 0.0));
    }
}
