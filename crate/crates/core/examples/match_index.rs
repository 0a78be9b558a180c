//! Flatten vs decomposition retrieval against the brute-force answer.
//!
//! `cargo run --release --example match_index [-- items order n]`

use std::collections::HashSet;

use qsrec::index::{exact_top_n, DecompositionIndex, ExactScan, FlattenIndex, ItemMatrix};
use qsrec::symmat::PackedSymMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> qsrec::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("numeric argument"));
    let m = args.next().unwrap_or(5000);
    let order = args.next().unwrap_or(8);
    let n = args.next().unwrap_or(20);
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let rows = (0..m)
        .flat_map(|_| (0..order).map(|c| if c + 1 == order { rng.gen_range(0.01..1.0) } else { rng.gen_range(-1.0..1.0) }).collect::<Vec<_>>())
        .collect();
    let items = ItemMatrix::new(order, rows, (0..m as u32).collect())?;
    let a = PackedSymMatrix::from_packed(order, (0..order * (order + 1) / 2).map(|_| rng.gen_range(-1.0..1.0)).collect())?;

    let exact = exact_top_n(&a, &items, n)?;
    let flat = FlattenIndex::<ExactScan>::build(items.clone()).query(&a, n)?;
    println!("flatten agrees with brute force: {}", flat.ids() == exact.ids());

    let truth: HashSet<u32> = exact.ids().into_iter().collect();
    let decomp = DecompositionIndex::<ExactScan>::build(items);
    for k in 1..=order {
        let got = decomp.query(&a, k, n)?;
        let hits = got.ids().iter().filter(|id| truth.contains(id)).count();
        println!("decomposition k={k}: recall {:.3}", hits as f64 / n as f64);
    }
    Ok(())
}
