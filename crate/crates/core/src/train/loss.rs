use crate::model::sigmoid;
use crate::real::Real;

/// `ln(1 + eᵘ)` without overflow.
#[inline]
pub(crate) fn softplus<T: Real>(u: T) -> T {
    u.max(T::zero()) + (-u.abs()).exp().ln_1p()
}

/// Mean over negatives of `−ln σ(positive − negative)`.
///
/// Returns `NaN` when `negatives` is empty.
pub fn bpr_loss<T: Real>(positive: T, negatives: &[T]) -> T {
    let sum: T = negatives.iter().map(|&n| softplus(n - positive)).sum();
    sum / T::of(negatives.len() as f64)
}

/// BPR loss and its derivatives `(∂/∂positive, ∂/∂negative_j)`.
pub(crate) fn bpr_with_grad<T: Real>(positive: T, negatives: &[T], d_negatives: &mut Vec<T>) -> (T, T) {
    let m = T::of(negatives.len() as f64);
    d_negatives.clear();
    let mut loss = T::zero();
    let mut d_pos = T::zero();
    for &n in negatives {
        let u = n - positive;
        loss += softplus(u);
        let g = sigmoid(u) / m;
        d_negatives.push(g);
        d_pos -= g;
    }
    (loss / m, d_pos)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_scores_give_ln2() {
        assert!((bpr_loss(0.7f64, &[0.7]) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn large_margin_vanishes() {
        assert!(bpr_loss(1000.0f64, &[0.0]) < 1e-300);
        assert!(bpr_loss(0.0f64, &[1000.0]).is_finite());
    }

    #[test]
    fn two_negative_example() {
        // -ln σ(1) = ln(1 + e⁻¹), -ln σ(-1) = ln(1 + e)
        let oracle = ((1.0 + (-1f64).exp()).ln() + (1.0 + 1f64.exp()).ln()) / 2.0;
        let got = bpr_loss(1.0f64, &[0.0, 2.0]);
        assert!((got - oracle).abs() < 1e-15);
        assert!((got - 0.813262).abs() < 1e-6);
    }

    #[test]
    fn monotone_in_margin() {
        let mut prev = f64::INFINITY;
        for k in -20..20 {
            let l = bpr_loss(k as f64 * 0.5, &[0.0, 0.3]);
            assert!(l < prev);
            prev = l;
        }
    }

    #[test]
    fn gradient_matches_central_difference() {
        let negs = [0.3, -1.2, 2.0];
        let mut d = Vec::new();
        let (loss, d_pos) = bpr_with_grad(0.4f64, &negs, &mut d);
        assert_eq!(loss, bpr_loss(0.4, &negs));
        let eps = 1e-6;
        let num = (bpr_loss(0.4 + eps, &negs) - bpr_loss(0.4 - eps, &negs)) / (2.0 * eps);
        assert!((num - d_pos).abs() < 1e-9);
        for j in 0..3 {
            let (mut p, mut m) = (negs, negs);
            p[j] += eps;
            m[j] -= eps;
            let num = (bpr_loss(0.4, &p) - bpr_loss(0.4, &m)) / (2.0 * eps);
            assert!((num - d[j]).abs() < 1e-9);
        }
    }
}
