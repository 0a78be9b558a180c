//! Recall@K and MRR@K scored directly and through the flatten index.
//!
//! `cargo run --release --example evaluate`

use qsrec::eval::{evaluate, evaluate_via_index};
use qsrec::index::{DecompositionQuery, IndexKind, MatchIndex};
use qsrec::model::HeadKind;
use qsrec::synthetic::{two_interest_corpus, TwoInterestConfig};
use qsrec::train::{train, TrainConfig};

fn main() -> qsrec::Result<()> {
    let corpus = two_interest_corpus(TwoInterestConfig::default(), 1)?;
    let config = TrainConfig {
        learning_rate: 0.01,
        batch_size: 32,
        dropout_keep: 1.0,
        epochs: 5,
        input_dim: 8,
        head: HeadKind::Matrix { order: 4 },
        ..TrainConfig::default()
    };
    let (model, _) = train::<f32>(&corpus.train.sessions, corpus.train.vocab.len(), config)?;

    let k = 20;
    println!("{}", evaluate(&model, &corpus.test, k)?);
    let index = MatchIndex::build(IndexKind::Flatten, model.item_matrix()?);
    println!("{}", evaluate_via_index(&index, &model, &corpus.test, k, &DecompositionQuery::new(4, k))?);
    Ok(())
}
