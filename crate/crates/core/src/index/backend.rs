//! Inner-product search backends.
//!
//! A backend is built once over a fixed set of vectors and then answers
//! "top N by `⟨query, v⟩`" queries. Only the exact scan ships here; tree or
//! graph indexes can implement the same trait.

use super::TopN;

pub trait InnerProductBackend: Send + Sync {
    /// Builds over `vectors`, `dim` values per row, one id per row.
    fn build(dim: usize, vectors: Vec<f64>, ids: Vec<u32>) -> Self
    where
        Self: Sized;

    fn dim(&self) -> usize;

    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Up to `n` rows with the largest inner product against `query`.
    fn search(&self, query: &[f64], n: usize) -> TopN;
}

/// Brute-force scan; returns exactly the top N with ties broken by ascending id.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactScan {
    dim: usize,
    vectors: Vec<f64>,
    ids: Vec<u32>,
}

impl ExactScan {
    pub fn vector(&self, row: usize) -> &[f64] {
        &self.vectors[row * self.dim..(row + 1) * self.dim]
    }
}

impl InnerProductBackend for ExactScan {
    fn build(dim: usize, vectors: Vec<f64>, ids: Vec<u32>) -> Self {
        assert_eq!(vectors.len(), dim * ids.len(), "vector table does not match id count");
        ExactScan { dim, vectors, ids }
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn len(&self) -> usize {
        self.ids.len()
    }

    fn search(&self, query: &[f64], n: usize) -> TopN {
        let scored = self
            .vectors
            .chunks_exact(self.dim)
            .zip(&self.ids)
            .map(|(v, &id)| {
                let mut acc = 0.0;
                for (q, x) in query.iter().zip(v) {
                    acc += q * x;
                }
                (id, acc)
            })
            .collect();
        TopN::select(scored, n)
    }
}
