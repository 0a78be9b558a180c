//! Randomized invariants across the public API.

use proptest::prelude::*;

use qsrec::checkpoint::{decode_checkpoint, encode_checkpoint, AnyCheckpoint, Checkpoint};
use qsrec::data::{decode_corpus, encode_corpus, SessionCorpus, Vocab};
use qsrec::eval::pessimistic_rank;
use qsrec::index::{exact_top_n, DecompositionIndex, ExactScan, FlattenIndex, ItemMatrix, TopN};
use qsrec::model::{Model, ModelShape};
use qsrec::symmat::{eigendecompose, gamma1, gamma2, quadratic_form, PackedSymMatrix};

fn packed(max_dim: usize) -> impl Strategy<Value = PackedSymMatrix> {
    (1..=max_dim).prop_flat_map(|n| {
        prop::collection::vec(-3.0f64..3.0, n * (n + 1) / 2).prop_map(move |v| PackedSymMatrix::from_packed(n, v).unwrap())
    })
}

fn matrix_and_items() -> impl Strategy<Value = (PackedSymMatrix, ItemMatrix)> {
    packed(6).prop_flat_map(|a| {
        let n = a.dim();
        (Just(a), 1usize..30).prop_flat_map(move |(a, m)| {
            prop::collection::vec(-2.0f64..2.0, n * m)
                .prop_map(move |mut rows| {
                    // Item embeddings live in the upper half space.
                    rows.chunks_mut(n).for_each(|r| r[n - 1] = r[n - 1].abs() + 0.01);
                    (a.clone(), ItemMatrix::new(n, rows, (0..m as u32).collect()).unwrap())
                })
        })
    })
}

fn dense_form(a: &PackedSymMatrix, y: &[f64]) -> f64 {
    let n = a.dim();
    (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| y[i] * a.get(i, j) * y[j]).sum()
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn flatten_turns_the_form_into_a_dot((a, y) in packed(8).prop_flat_map(|a| {
        let n = a.dim();
        (Just(a), prop::collection::vec(-3.0f64..3.0, n))
    })) {
        let dot: f64 = gamma1(&a).iter().zip(gamma2(&y)).map(|(p, q)| p * q).sum();
        let direct = dense_form(&a, &y);
        prop_assert!((dot - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
        prop_assert!((quadratic_form(&a, &y).unwrap() - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
    }

    #[test]
    fn eigendecomposition_reconstructs(a in packed(8)) {
        let e = eigendecompose(&a).unwrap();
        let dense = a.to_dense();
        let back = e.reconstruct_dense();
        let err = dense.iter().zip(&back).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-9 * (1.0 + a.frobenius_norm()), "reconstruction error {err}");
        prop_assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn flatten_matches_brute_force((a, items) in matrix_and_items(), n in 1usize..10) {
        let exact = exact_top_n(&a, &items, n).unwrap();
        let flat = FlattenIndex::<ExactScan>::build(items.clone()).query(&a, n).unwrap();
        prop_assert_eq!(exact.len(), flat.len());
        for (e, f) in exact.entries().iter().zip(flat.entries()) {
            prop_assert!((e.1 - f.1).abs() <= 1e-9 * (1.0 + e.1.abs()));
        }
    }

    #[test]
    fn exhaustive_decomposition_is_exact((a, items) in matrix_and_items()) {
        let m = items.len();
        let exact = exact_top_n(&a, &items, m).unwrap();
        let approx = DecompositionIndex::<ExactScan>::build(items).query(&a, a.dim(), m).unwrap();
        prop_assert_eq!(exact.ids(), approx.ids());
    }

    #[test]
    fn top_n_is_sorted_and_bounded(scores in prop::collection::vec(-5.0f64..5.0, 0..50), n in 0usize..60) {
        let scored: Vec<(u32, f64)> = scores.iter().enumerate().map(|(i, &s)| (i as u32, s)).collect();
        let top = TopN::select(scored, n);
        prop_assert_eq!(top.len(), n.min(scores.len()));
        prop_assert!(top.entries().windows(2).all(|w| w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0)));
        if let Some(&(_, worst)) = top.entries().last() {
            let better = scores.iter().filter(|&&s| s > worst).count();
            prop_assert!(better < top.len());
        }
    }

    #[test]
    fn pessimistic_rank_counts_ties_against_the_target(scores in prop::collection::vec(-2i32..3, 1..30), t in any::<prop::sample::Index>()) {
        let scores: Vec<f64> = scores.into_iter().map(f64::from).collect();
        let target = t.index(scores.len());
        let rank = pessimistic_rank(&scores, target);
        let mut sorted: Vec<usize> = (0..scores.len()).collect();
        sorted.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then((i == target).cmp(&(j == target))));
        prop_assert_eq!(rank, sorted.iter().position(|&i| i == target).unwrap() + 1);
    }

    #[test]
    fn corpus_cache_round_trips(sessions in prop::collection::vec(prop::collection::vec(0u32..12, 2..8), 0..20)) {
        let vocab = Vocab::from_tokens((0..12).map(|i| format!("tok{i}")).collect()).unwrap();
        let corpus = SessionCorpus::new(sessions, vocab).unwrap();
        let back = decode_corpus(&encode_corpus(&corpus).unwrap()).unwrap();
        prop_assert_eq!(back, corpus);
    }

    #[test]
    fn checkpoint_round_trips_bit_exactly(seed in any::<u64>(), order in 1usize..5, v in 1usize..15) {
        let model = Model::<f32>::new(ModelShape::matrix(v, 3, order), seed).unwrap();
        let ckpt = Checkpoint { model, seed, epochs_done: 0, adam: None };
        match decode_checkpoint(&encode_checkpoint(&ckpt).unwrap()).unwrap() {
            AnyCheckpoint::F32(back) => prop_assert_eq!(back, ckpt),
            AnyCheckpoint::F64(_) => prop_assert!(false, "precision changed"),
        }
    }
}
