//! Saves a model, reads back its header and verifies a bit-exact reload.
//!
//! `cargo run --example checkpoint`

use qsrec::checkpoint::{load_checkpoint, load_header, save_checkpoint, AnyCheckpoint, Checkpoint};
use qsrec::model::{Model, ModelShape};

fn main() -> qsrec::Result<()> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("model.qsm");
    let model = Model::<f32>::new(ModelShape::matrix(1000, 16, 8), 3)?;
    let ckpt = Checkpoint { model, seed: 3, epochs_done: 0, adam: None };
    save_checkpoint(&ckpt, &path)?;

    println!("{}", load_header(&path)?.describe());
    match load_checkpoint(&path)? {
        AnyCheckpoint::F32(back) => println!("\nreload identical: {}", back == ckpt),
        AnyCheckpoint::F64(_) => println!("\nunexpected precision"),
    }
    Ok(())
}
