use std::cmp::Ordering;

/// Ranked `(item id, score)` pairs, best first; ties go to the smaller id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TopN {
    entries: Vec<(u32, f64)>,
}

#[inline]
fn rank_order(a: &(u32, f64), b: &(u32, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

impl TopN {
    /// Keeps the `n` best of `scored`. Ids are assumed distinct.
    pub fn select(mut scored: Vec<(u32, f64)>, n: usize) -> Self {
        if n == 0 {
            return TopN::default();
        }
        if scored.len() > n {
            scored.select_nth_unstable_by(n - 1, rank_order);
            scored.truncate(n);
        }
        scored.sort_unstable_by(rank_order);
        TopN { entries: scored }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn ids(&self) -> Vec<u32> {
        self.entries.iter().map(|e| e.0).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn into_entries(self) -> Vec<(u32, f64)> {
        self.entries
    }

    /// Fraction of `reference` ids that also appear here.
    pub fn recall_against(&self, reference: &TopN) -> f64 {
        if reference.is_empty() {
            return 1.0;
        }
        let hits = reference.entries.iter().filter(|(id, _)| self.entries.iter().any(|(j, _)| j == id)).count();
        hits as f64 / reference.len() as f64
    }
}
