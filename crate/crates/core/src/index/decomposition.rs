use std::collections::{HashMap, HashSet};

use super::backend::{ExactScan, InnerProductBackend};
use super::{check_n, ItemMatrix, TopN};
use crate::error::{ensure_shape, Error, Result};
use crate::symmat::{eigendecompose, PackedSymMatrix};

/// How items are ranked along one eigendirection `α`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CandidateRanking {
    /// By `|⟨α, x⟩|`; the score only sees `⟨α, x⟩²`.
    Absolute,
    /// By the signed `⟨α, x⟩`.
    Signed,
}

/// Parameters of one decomposition query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecompositionQuery {
    /// Leading eigendirections to draw candidates from, `1 ≤ k ≤ n`.
    pub directions: usize,
    /// New candidates gathered per direction.
    pub per_direction: usize,
    /// Length of the final rescored list.
    pub top: usize,
    pub ranking: CandidateRanking,
    /// Skip directions whose eigenvalue is not positive.
    pub skip_nonpositive: bool,
}

impl DecompositionQuery {
    pub fn new(directions: usize, n: usize) -> Self {
        DecompositionQuery {
            directions,
            per_direction: n,
            top: n,
            ranking: CandidateRanking::Absolute,
            skip_nonpositive: false,
        }
    }
}

/// Approximate retrieval along the leading eigenvectors of `A` with exact rescoring.
#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionIndex<B = ExactScan> {
    items: ItemMatrix,
    backend: B,
}

impl<B: InnerProductBackend> DecompositionIndex<B> {
    pub fn build(items: ItemMatrix) -> Self {
        let backend = B::build(items.dim(), items.rows().to_vec(), items.ids().to_vec());
        DecompositionIndex { items, backend }
    }

    pub fn items(&self) -> &ItemMatrix {
        &self.items
    }

    /// `k` directions, `n` candidates per direction, top `n` returned.
    pub fn query(&self, a: &PackedSymMatrix, k: usize, n: usize) -> Result<TopN> {
        self.query_with(a, &DecompositionQuery::new(k, n))
    }

    pub fn query_with(&self, a: &PackedSymMatrix, q: &DecompositionQuery) -> Result<TopN> {
        check_n(q.top)?;
        check_n(q.per_direction)?;
        let n = self.items.dim();
        ensure_shape!(a.dim() == n, "session order {} vs index dim {n}", a.dim());
        if q.directions == 0 || q.directions > n {
            return Err(Error::Input(format!("k = {} outside 1..={n}", q.directions)));
        }
        let eig = eigendecompose(a)?;

        let mut chosen: Vec<u32> = Vec::new();
        let mut seen: HashSet<u32> = HashSet::new();
        for (lambda, alpha) in eig.eigenvalues.iter().zip(&eig.eigenvectors).take(q.directions) {
            if q.skip_nonpositive && *lambda <= 0.0 {
                continue;
            }
            if chosen.len() == self.items.len() {
                break;
            }
            for id in self.direction_candidates(alpha, q.ranking, q.per_direction, &seen) {
                seen.insert(id);
                chosen.push(id);
            }
        }

        let rescored = chosen
            .into_iter()
            .map(|id| (id, self.items.score_id(a, id).expect("candidate ids come from the item table")))
            .collect();
        Ok(TopN::select(rescored, q.top))
    }

    /// The `want` best items along `alpha` that are not already in `seen`.
    fn direction_candidates(
        &self,
        alpha: &[f64],
        ranking: CandidateRanking,
        want: usize,
        seen: &HashSet<u32>,
    ) -> Vec<u32> {
        let fetch = want + seen.len();
        let mut merged: HashMap<u32, f64> = HashMap::new();
        for (id, s) in self.backend.search(alpha, fetch).into_entries() {
            merged.insert(id, s);
        }
        if ranking == CandidateRanking::Absolute {
            let negated: Vec<f64> = alpha.iter().map(|x| -x).collect();
            for (id, s) in self.backend.search(&negated, fetch).into_entries() {
                merged.entry(id).or_insert(-s);
            }
        }
        let scored = merged
            .into_iter()
            .filter(|(id, _)| !seen.contains(id))
            .map(|(id, s)| (id, if ranking == CandidateRanking::Absolute { s.abs() } else { s }))
            .collect();
        TopN::select(scored, want).ids()
    }
}
