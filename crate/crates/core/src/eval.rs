//! Next-item evaluation: recall@K and MRR@K.
//!
//! Every consecutive pair `(xₜ → xₜ₊₁)` of a test session is one event. The
//! hidden state is carried through a session and reset between sessions.
//! Ties rank the target behind every competitor with an equal score.

use std::fmt;

use rayon::prelude::*;

use crate::data::SessionCorpus;
use crate::error::{Error, Result};
use crate::index::{DecompositionQuery, MatchIndex};
use crate::model::{HeadKind, Model};
use crate::real::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub model: String,
    pub k: usize,
    pub recall: f64,
    pub mrr: f64,
    pub events: usize,
}

impl EvalReport {
    /// `model\tk\trecall\tmrr\tevents`
    pub fn tsv_line(&self) -> String {
        format!("{}\t{}\t{}\t{}\t{}", self.model, self.k, self.recall, self.mrr, self.events)
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "model:     {}", self.model)?;
        writeln!(f, "events:    {}", self.events)?;
        writeln!(f, "recall@{}: {:.6}", self.k, self.recall)?;
        write!(f, "mrr@{}:    {:.6}", self.k, self.mrr)
    }
}

/// Running sums of hits and reciprocal ranks at cutoff `k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricAccumulator {
    k: usize,
    events: usize,
    hits: usize,
    reciprocal_sum: f64,
}

impl MetricAccumulator {
    pub fn new(k: usize) -> Self {
        MetricAccumulator { k, events: 0, hits: 0, reciprocal_sum: 0.0 }
    }

    /// Records one event; `rank` is 1-based, `None` means beyond any cutoff.
    pub fn add(&mut self, rank: Option<usize>) {
        self.events += 1;
        if let Some(r) = rank.filter(|&r| r >= 1 && r <= self.k) {
            self.hits += 1;
            self.reciprocal_sum += 1.0 / r as f64;
        }
    }

    pub fn report(&self, model: impl Into<String>) -> Result<EvalReport> {
        if self.events == 0 {
            return Err(Error::Input("no evaluation events".into()));
        }
        let n = self.events as f64;
        Ok(EvalReport {
            model: model.into(),
            k: self.k,
            recall: self.hits as f64 / n,
            mrr: self.reciprocal_sum / n,
            events: self.events,
        })
    }
}

/// `1 + #{j ≠ target : scores[j] ≥ scores[target]}`.
pub fn pessimistic_rank(scores: &[f64], target: usize) -> usize {
    let s = scores[target];
    1 + scores.iter().enumerate().filter(|&(j, &x)| j != target && x >= s).count()
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Input("K must be at least 1".into()));
    }
    Ok(())
}

fn check_vocab<T: Real>(model: &Model<T>, corpus: &SessionCorpus) -> Result<()> {
    if corpus.vocab.len() != model.vocab_size() {
        return Err(Error::Consistency(format!(
            "corpus vocabulary has {} items but the model has {}",
            corpus.vocab.len(),
            model.vocab_size()
        )));
    }
    Ok(())
}

/// Runs `rank_fn` over every event; sessions in parallel, summed in session order.
fn accumulate<T: Real, F>(model: &Model<T>, sessions: &[Vec<u32>], k: usize, rank_fn: F) -> Result<MetricAccumulator>
where
    F: Fn(&Model<T>, &[T], u32) -> Result<Option<usize>> + Sync,
{
    check_k(k)?;
    if sessions.is_empty() {
        return Err(Error::Input("test corpus is empty".into()));
    }
    let per_session: Vec<Vec<Option<usize>>> = sessions
        .par_iter()
        .map(|s| {
            let mut h = model.initial_hidden();
            let mut ranks = Vec::with_capacity(s.len().saturating_sub(1));
            for pair in s.windows(2) {
                h = model.step(pair[0], &h)?;
                ranks.push(rank_fn(model, &h, pair[1])?);
            }
            Ok(ranks)
        })
        .collect::<Result<_>>()?;
    let mut acc = MetricAccumulator::new(k);
    per_session.into_iter().flatten().for_each(|r| acc.add(r));
    Ok(acc)
}

/// Scores all items per event and ranks the target.
pub fn evaluate_sessions<T: Real>(model: &Model<T>, sessions: &[Vec<u32>], k: usize) -> Result<EvalReport> {
    let scorer = model.scorer();
    let acc = accumulate(model, sessions, k, |m, h, target| {
        let scores = scorer.scores(&m.session_embedding(h)?.cast());
        Ok(Some(pessimistic_rank(&scores, target as usize)))
    })?;
    acc.report(model.shape().head.name())
}

pub fn evaluate<T: Real>(model: &Model<T>, corpus: &SessionCorpus, k: usize) -> Result<EvalReport> {
    check_vocab(model, corpus)?;
    evaluate_sessions(model, &corpus.sessions, k)
}

/// Same protocol with candidates drawn from `index`.
///
/// The index returns its best `K+1` items; the target's rank is counted among
/// them, which decides `rank ≤ K` exactly whenever the list is exact.
pub fn evaluate_via_index<T: Real>(
    index: &MatchIndex,
    model: &Model<T>,
    corpus: &SessionCorpus,
    k: usize,
    query: &DecompositionQuery,
) -> Result<EvalReport> {
    check_vocab(model, corpus)?;
    if !matches!(model.shape().head, HeadKind::Matrix { .. }) {
        return Err(Error::Input(format!("{} head cannot be served by a quadratic-form index", model.shape().head.name())));
    }
    if index.items() != &model.item_matrix()? {
        return Err(Error::Consistency("index item embeddings do not match the model; rebuild the index".into()));
    }
    let query = DecompositionQuery { top: k + 1, ..*query };
    let acc = accumulate(model, &corpus.sessions, k, |m, h, target| {
        let a = m.session_embedding(h)?.cast::<f64>().to_sym_matrix()?;
        let listed = index.query(&a, &query)?;
        let entries = listed.entries();
        Ok(entries.iter().find(|e| e.0 == target).map(|&(_, s)| {
            1 + entries.iter().filter(|&&(id, x)| id != target && x >= s).count()
        }))
    })?;
    acc.report(format!("{}+{}", model.shape().head.name(), index.kind().name()))
}
