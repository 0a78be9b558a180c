//! Match-stage retrieval of the items maximizing `xᵀAx`.
//!
//! Two reductions are provided on top of a brute-force oracle:
//!
//! * **flatten** indexes `Γ₂(x)` for every item and answers a query with an
//!   inner-product search for `Γ₁(A)`; with an exact backend this is the
//!   exact answer.
//! * **decomposition** eigendecomposes `A`, gathers candidates along the
//!   leading eigendirections and rescores them exactly.

mod backend;
mod decomposition;
mod file;
mod flatten;
mod topn;

pub use backend::{ExactScan, InnerProductBackend};
pub use decomposition::{CandidateRanking, DecompositionIndex, DecompositionQuery};
pub use file::{load_index, save_index, IndexKind};
pub use flatten::FlattenIndex;
pub use topn::TopN;

use std::collections::HashMap;

use crate::error::{ensure_shape, Error, Result};
use crate::symmat::{packed_quadratic_form, PackedSymMatrix};

/// Embedded item vectors, one row per item, with their ids.
///
/// Rows are held at 32-bit precision, the precision of the index file.
#[derive(Clone, Debug, PartialEq)]
pub struct ItemMatrix {
    dim: usize,
    rows: Vec<f64>,
    ids: Vec<u32>,
    position: HashMap<u32, usize>,
}

impl ItemMatrix {
    /// Fails on a row/id count mismatch, duplicate ids, non-finite values,
    /// or a row whose last coordinate is not positive.
    pub fn new(dim: usize, rows: Vec<f64>, ids: Vec<u32>) -> Result<Self> {
        ensure_shape!(dim > 0, "item dimension must be positive");
        ensure_shape!(rows.len() == dim * ids.len(), "{} values for {} items of dim {dim}", rows.len(), ids.len());
        let rows: Vec<f64> = rows.into_iter().map(|x| x as f32 as f64).collect();
        if rows.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("item matrix has non-finite entries".into()));
        }
        if let Some(i) = rows.chunks_exact(dim).position(|r| r[dim - 1] <= 0.0) {
            return Err(Error::Input(format!("item row {i} is outside the upper half space")));
        }
        let mut position = HashMap::with_capacity(ids.len());
        for (i, &id) in ids.iter().enumerate() {
            if position.insert(id, i).is_some() {
                return Err(Error::Input(format!("duplicate item id {id}")));
            }
        }
        Ok(ItemMatrix { dim, rows, ids, position })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_by_id(&self, id: u32) -> Option<&[f64]> {
        self.position.get(&id).map(|&i| self.row(i))
    }

    pub(crate) fn score_id(&self, a: &PackedSymMatrix, id: u32) -> Option<f64> {
        self.row_by_id(id).map(|r| packed_quadratic_form(a.values(), r))
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Input("N must be at least 1".into()));
    }
    Ok(())
}

/// Brute-force top N of `xᵀAx` over every item.
pub fn exact_top_n(a: &PackedSymMatrix, items: &ItemMatrix, n: usize) -> Result<TopN> {
    check_n(n)?;
    ensure_shape!(a.dim() == items.dim(), "session order {} vs item dim {}", a.dim(), items.dim());
    let scored = items
        .rows
        .chunks_exact(items.dim)
        .zip(&items.ids)
        .map(|(r, &id)| (id, packed_quadratic_form(a.values(), r)))
        .collect();
    Ok(TopN::select(scored, n))
}

/// Either index kind, as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub enum MatchIndex {
    Flatten(FlattenIndex),
    Decomposition(DecompositionIndex),
}

impl MatchIndex {
    pub fn kind(&self) -> IndexKind {
        match self {
            MatchIndex::Flatten(_) => IndexKind::Flatten,
            MatchIndex::Decomposition(_) => IndexKind::Decomposition,
        }
    }

    pub fn items(&self) -> &ItemMatrix {
        match self {
            MatchIndex::Flatten(f) => f.items(),
            MatchIndex::Decomposition(d) => d.items(),
        }
    }

    pub fn build(kind: IndexKind, items: ItemMatrix) -> Self {
        match kind {
            IndexKind::Flatten => MatchIndex::Flatten(FlattenIndex::build(items)),
            IndexKind::Decomposition => MatchIndex::Decomposition(DecompositionIndex::build(items)),
        }
    }

    /// Top `query.top` items; the flatten index ignores the decomposition settings.
    pub fn query(&self, a: &PackedSymMatrix, query: &DecompositionQuery) -> Result<TopN> {
        match self {
            MatchIndex::Flatten(f) => f.query(a, query.top),
            MatchIndex::Decomposition(d) => d.query_with(a, query),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn item_matrix_validation() {
        assert!(ItemMatrix::new(2, vec![1.0, 1.0, 2.0, 1.0], vec![0, 1]).is_ok());
        assert!(matches!(ItemMatrix::new(2, vec![1.0, -1.0], vec![0]), Err(Error::Input(_))));
        assert!(matches!(ItemMatrix::new(2, vec![1.0, 1.0, 2.0, 1.0], vec![0, 0]), Err(Error::Input(_))));
        assert!(matches!(ItemMatrix::new(2, vec![1.0, 1.0], vec![0, 1]), Err(Error::Shape(_))));
    }

    #[test]
    fn exact_top_n_small_cases() {
        let items = ItemMatrix::new(2, vec![0.5, 2.0], vec![7]).unwrap();
        let a = PackedSymMatrix::from_packed(2, vec![0.3, -0.2, 1.0]).unwrap();
        assert_eq!(exact_top_n(&a, &items, 3).unwrap().ids(), vec![7]);
        assert!(matches!(exact_top_n(&a, &items, 0), Err(Error::Input(_))));

        // Identity ranks by squared norm.
        let items = ItemMatrix::new(2, vec![1.0, 1.0, 3.0, 0.5, 0.1, 2.0], vec![0, 1, 2]).unwrap();
        let top = exact_top_n(&PackedSymMatrix::identity(2), &items, 3).unwrap();
        assert_eq!(top.ids(), vec![1, 2, 0]);
    }
}
