use super::backend::{ExactScan, InnerProductBackend};
use super::{check_n, ItemMatrix, TopN};
use crate::error::{ensure_shape, Result};
use crate::symmat::{gamma1, gamma2_into, packed_len, PackedSymMatrix};

/// Inner-product index over `Γ₂(x)` for every item `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlattenIndex<B = ExactScan> {
    items: ItemMatrix,
    backend: B,
}

impl<B: InnerProductBackend> FlattenIndex<B> {
    pub fn build(items: ItemMatrix) -> Self {
        let width = packed_len(items.dim());
        let mut flat = vec![0.0; width * items.len()];
        for (i, out) in flat.chunks_exact_mut(width).enumerate() {
            gamma2_into(items.row(i), out);
        }
        let backend = B::build(width, flat, items.ids().to_vec());
        FlattenIndex { items, backend }
    }

    pub fn items(&self) -> &ItemMatrix {
        &self.items
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    /// Top `n` items by `⟨Γ₁(A), Γ₂(x)⟩ = xᵀAx`.
    pub fn query(&self, a: &PackedSymMatrix, n: usize) -> Result<TopN> {
        check_n(n)?;
        ensure_shape!(a.dim() == self.items.dim(), "session order {} vs index dim {}", a.dim(), self.items.dim());
        Ok(self.backend.search(&gamma1(a), n))
    }
}
