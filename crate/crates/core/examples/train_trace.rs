//! Trains a small matrix-head model and prints the loss trace per epoch.
//!
//! `cargo run --release --example train_trace [-- epochs]`

use qsrec::model::HeadKind;
use qsrec::synthetic::{two_interest_corpus, TwoInterestConfig};
use qsrec::train::{TrainConfig, Trainer};

fn main() -> qsrec::Result<()> {
    let epochs = std::env::args().nth(1).map_or(5, |a| a.parse().expect("numeric argument"));
    let corpus = two_interest_corpus(TwoInterestConfig::default(), 0)?;
    let config = TrainConfig {
        learning_rate: 0.01,
        batch_size: 32,
        dropout_keep: 1.0,
        epochs,
        input_dim: 8,
        head: HeadKind::Matrix { order: 4 },
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::<f32>::new(config, corpus.train.vocab.len())?;
    let trace = trainer.run(&corpus.train.sessions, |r| {
        if r.step % 200 == 0 {
            println!("{r}");
        }
    })?;
    for (epoch, mean) in trace.epoch_means() {
        println!("epoch {epoch}: mean loss {mean:.4}");
    }
    Ok(())
}
