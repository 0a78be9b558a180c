//! Matrix vs vector heads on a planted two-interest corpus.
//!
//! Both heads get roughly the same parameter budget. Prints recall@5 per seed
//! and the eigenvalue spectrum of one mixed test session's matrix.
//!
//! `cargo run --release --example two_interest [-- seeds epochs]`

use qsrec::eval::evaluate;
use qsrec::model::HeadKind;
use qsrec::symmat::eigendecompose;
use qsrec::synthetic::{two_interest_corpus, TwoInterestConfig};
use qsrec::train::{train, TrainConfig};

fn main() -> qsrec::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("numeric argument"));
    let seeds = args.next().unwrap_or(5);
    let epochs = args.next().unwrap_or(10);

    let base = TrainConfig { learning_rate: 0.01, batch_size: 32, epochs, input_dim: 8, shuffle: true, ..TrainConfig::default() };
    let matrix = TrainConfig { head: HeadKind::Matrix { order: 4 }, dropout_keep: 1.0, ..base };
    let vector = TrainConfig { head: HeadKind::Vector, hidden_dim: 5, dropout_keep: 1.0, ..base };
    println!(
        "parameters: matrix {} vector {}",
        matrix.model_shape(200).parameter_count(),
        vector.model_shape(200).parameter_count()
    );

    let mut wins = 0;
    for seed in 0..seeds as u64 {
        let corpus = two_interest_corpus(TwoInterestConfig::default(), seed)?;
        let (m, _) = train::<f32>(&corpus.train.sessions, 200, TrainConfig { seed, ..matrix })?;
        let (v, _) = train::<f32>(&corpus.train.sessions, 200, TrainConfig { seed, ..vector })?;
        let rm = evaluate(&m, &corpus.test, 5)?;
        let rv = evaluate(&v, &corpus.test, 5)?;
        wins += usize::from(rm.recall > rv.recall);

        let session = &corpus.test.sessions[0];
        let a = m.session_embedding(&m.encode(session)?)?.cast::<f64>().to_sym_matrix()?;
        let eig = eigendecompose(&a)?;
        let total: f64 = eig.eigenvalues.iter().map(|l| l.abs()).sum();
        let mut mags: Vec<f64> = eig.eigenvalues.iter().map(|l| l.abs()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        println!(
            "seed {seed}: recall@5 matrix {:.4} vector {:.4}  mrr@5 matrix {:.4} vector {:.4}  top-2 |λ| share {:.3}",
            rm.recall,
            rv.recall,
            rm.mrr,
            rv.mrr,
            (mags[0] + mags[1]) / total
        );
    }
    println!("matrix ahead on {wins} of {seeds} seeds");
    Ok(())
}
