//! Packed symmetric storage and the flatten identity `yᵀAy = ⟨Γ₁(A), Γ₂(y)⟩`.
//!
//! `cargo run --example packed_matrices`

use qsrec::symmat::{gamma1, gamma2, pack_index, quadratic_form, PackedSymMatrix};

fn main() -> qsrec::Result<()> {
    let dense = [2.0, -1.0, 0.5, -1.0, 3.0, 0.0, 0.5, 0.0, 1.0];
    let a = PackedSymMatrix::from_dense(3, &dense)?;
    println!("packed upper triangle: {:?}", a.values());
    for (i, j) in [(1, 3), (2, 2), (2, 3)] {
        println!("a_{i}{j} (one-based) lives at packed slot {}", pack_index(i, j, 3)?);
    }

    let y = [1.0, 2.0, -1.0];
    let g1 = gamma1(&a);
    let g2 = gamma2(&y);
    let dot: f64 = g1.iter().zip(&g2).map(|(p, q)| p * q).sum();
    println!("Γ₁(A) = {g1:?}");
    println!("Γ₂(y) = {g2:?}");
    println!("yᵀAy = {}  ⟨Γ₁, Γ₂⟩ = {dot}", quadratic_form(&a, &y)?);
    Ok(())
}
