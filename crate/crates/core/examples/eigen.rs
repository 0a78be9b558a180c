//! Jacobi eigendecomposition of a random symmetric matrix.
//!
//! `cargo run --example eigen [-- order seed]`

use qsrec::symmat::{eigendecompose, PackedSymMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> qsrec::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<u64>().expect("numeric argument"));
    let n = args.next().unwrap_or(6) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(args.next().unwrap_or(1));

    let values = (0..n * (n + 1) / 2).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let a = PackedSymMatrix::from_packed(n, values)?;
    let e = eigendecompose(&a)?;

    let err = a.to_dense().iter().zip(e.reconstruct_dense()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    println!("eigenvalues: {:?}", e.eigenvalues);
    println!("max reconstruction error: {err:.2e}");
    for (l, v) in e.eigenvalues.iter().zip(&e.eigenvectors).take(2) {
        println!("λ = {l:+.4}  v = {v:.3?}");
    }
    Ok(())
}
