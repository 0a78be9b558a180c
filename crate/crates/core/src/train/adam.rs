use crate::error::{ensure_shape, Result};
use crate::model::{Params, Tensor};
use crate::real::Real;

/// First and second moment estimates for every parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub m: Params<T>,
    pub v: Params<T>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl<T: Real> AdamState<T> {
    pub fn new(like: &Params<T>) -> Self {
        let mut m = like.clone();
        m.fill_zero();
        AdamState { v: m.clone(), m, step: 0, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// One bias-corrected Adam step over every tensor.
pub fn adam_update<T: Real>(params: &mut Params<T>, grads: &Params<T>, state: &mut AdamState<T>, lr: f64) -> Result<()> {
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (T::of(state.beta1), T::of(state.beta2));
    let (c1, c2) = (T::one() - b1, T::one() - b2);
    let step_size = T::of(lr / (1.0 - state.beta1.powi(t)));
    let v_correction = T::of(1.0 - state.beta2.powi(t));
    let eps = T::of(state.epsilon);

    let mut ps = params.tensors_mut();
    let gs = grads.tensors();
    let mut ms = state.m.tensors_mut();
    let mut vs = state.v.tensors_mut();
    ensure_shape!(ps.len() == gs.len() && ps.len() == ms.len(), "optimizer state does not match parameters");
    for (((p, g), m), v) in ps.iter_mut().zip(&gs).zip(ms.iter_mut()).zip(vs.iter_mut()) {
        update_tensor(p.1, g.1, m.1, v.1, [b1, b2, c1, c2, step_size, v_correction, eps])?;
    }
    Ok(())
}

fn update_tensor<T: Real>(p: &mut Tensor<T>, g: &Tensor<T>, m: &mut Tensor<T>, v: &mut Tensor<T>, k: [T; 7]) -> Result<()> {
    let [b1, b2, c1, c2, step_size, v_correction, eps] = k;
    ensure_shape!(p.shape() == g.shape() && p.shape() == m.shape(), "gradient shape {:?} vs {:?}", g.shape(), p.shape());
    for (((p, &g), m), v) in p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
        *m = b1 * *m + c1 * g;
        *v = b2 * *v + c2 * g * g;
        *p -= step_size * *m / ((*v / v_correction).sqrt() + eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelShape;

    fn setup() -> (Params<f64>, Params<f64>) {
        let shape = ModelShape::vector(3, 2, 2);
        let mut p = Params::zeros(&shape);
        p.embeddings.output.data_mut().iter_mut().enumerate().for_each(|(i, x)| *x = i as f64);
        (p.clone(), Params::zeros(&shape))
    }

    #[test]
    fn first_step_moves_by_lr() {
        let (mut p, mut g) = setup();
        let before = p.clone();
        g.embeddings.output.data_mut()[0] = 3.0;
        g.embeddings.output.data_mut()[1] = -0.001;
        let mut s = AdamState::new(&p);
        adam_update(&mut p, &g, &mut s, 0.01).unwrap();
        let d0 = p.embeddings.output.data()[0] - before.embeddings.output.data()[0];
        let d1 = p.embeddings.output.data()[1] - before.embeddings.output.data()[1];
        assert!((d0 + 0.01).abs() < 1e-8);
        assert!((d1 - 0.01).abs() < 1e-4);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let (mut p, g) = setup();
        let before = p.clone();
        let mut s = AdamState::new(&p);
        for _ in 0..5 {
            adam_update(&mut p, &g, &mut s, 0.1).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(s.step, 5);
    }

    #[test]
    fn two_steps_match_hand_unrolled_recurrence() {
        let (mut p, mut g) = setup();
        let x0 = p.embeddings.output.data()[2];
        g.embeddings.output.data_mut()[2] = 0.5;
        let mut s = AdamState::new(&p);
        let lr = 0.05;
        adam_update(&mut p, &g, &mut s, lr).unwrap();
        adam_update(&mut p, &g, &mut s, lr).unwrap();

        let (b1, b2, eps, gr) = (0.9f64, 0.999f64, 1e-8, 0.5);
        let m1 = (1.0 - b1) * gr;
        let v1 = (1.0 - b2) * gr * gr;
        let x1 = x0 - lr * (m1 / (1.0 - b1)) / ((v1 / (1.0 - b2)).sqrt() + eps);
        let m2 = b1 * m1 + (1.0 - b1) * gr;
        let v2 = b2 * v1 + (1.0 - b2) * gr * gr;
        let x2 = x1 - lr * (m2 / (1.0 - b1 * b1)) / ((v2 / (1.0 - b2 * b2)).sqrt() + eps);
        assert!((p.embeddings.output.data()[2] - x2).abs() < 1e-12);
    }
}
