//! Planted two-interest session corpora.
//!
//! Items fall into two clusters, each split into sub-interests. A session
//! picks one sub-interest from each cluster and clicks them in a 2:1 ratio,
//! drawing items within a sub-interest by a Zipf-like popularity.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{SessionCorpus, Vocab};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoInterestConfig {
    pub vocab_size: usize,
    /// Sub-interests per cluster.
    pub sub_interests: usize,
    pub train_sessions: usize,
    pub test_sessions: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Clicks on the major interest per click on the minor one.
    pub major_ratio: usize,
    /// Popularity of the `r`-th item in a sub-interest is `(r+1)^-zipf`.
    pub zipf: f64,
}

impl Default for TwoInterestConfig {
    fn default() -> Self {
        TwoInterestConfig {
            vocab_size: 200,
            sub_interests: 20,
            train_sessions: 3000,
            test_sessions: 300,
            min_len: 6,
            max_len: 12,
            major_ratio: 2,
            zipf: 1.0,
        }
    }
}

/// Cluster, sub-interest and within-group rank of an item.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ItemLabel {
    pub cluster: usize,
    pub sub_interest: usize,
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwoInterestCorpus {
    pub train: SessionCorpus,
    pub test: SessionCorpus,
    pub config: TwoInterestConfig,
}

impl TwoInterestCorpus {
    pub fn label(&self, item: u32) -> ItemLabel {
        label(&self.config, item)
    }
}

fn group_size(cfg: &TwoInterestConfig) -> usize {
    cfg.vocab_size / (2 * cfg.sub_interests)
}

fn label(cfg: &TwoInterestConfig, item: u32) -> ItemLabel {
    let g = group_size(cfg);
    let i = item as usize;
    ItemLabel { cluster: i / (g * cfg.sub_interests), sub_interest: (i / g) % cfg.sub_interests, rank: i % g }
}

fn item_id(cfg: &TwoInterestConfig, cluster: usize, sub_interest: usize, rank: usize) -> u32 {
    let g = group_size(cfg);
    ((cluster * cfg.sub_interests + sub_interest) * g + rank) as u32
}

fn session(cfg: &TwoInterestConfig, popularity: &WeightedIndex<f64>, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let major = rng.gen_range(0..2);
    let picks = [(major, rng.gen_range(0..cfg.sub_interests)), (1 - major, rng.gen_range(0..cfg.sub_interests))];
    let len = rng.gen_range(cfg.min_len..=cfg.max_len);
    let minor_count = (2 * len + cfg.major_ratio + 1) / (2 * (cfg.major_ratio + 1));
    let mut which: Vec<usize> = (0..len).map(|i| usize::from(i < minor_count)).collect();
    which.shuffle(rng);
    which
        .into_iter()
        .map(|w| {
            let (c, s) = picks[w];
            item_id(cfg, c, s, popularity.sample(rng))
        })
        .collect()
}

/// Train and test corpora drawn from independent streams of `seed`.
pub fn two_interest_corpus(cfg: TwoInterestConfig, seed: u64) -> Result<TwoInterestCorpus> {
    let g = group_size(&cfg);
    if cfg.sub_interests == 0 || g == 0 || !cfg.vocab_size.is_multiple_of(2 * cfg.sub_interests) {
        return Err(Error::Config(format!(
            "vocabulary {} does not split into 2 × {} equal groups",
            cfg.vocab_size, cfg.sub_interests
        )));
    }
    if cfg.min_len < 2 || cfg.min_len > cfg.max_len || cfg.major_ratio == 0 || cfg.train_sessions == 0 {
        return Err(Error::Config(format!("invalid synthetic corpus settings {cfg:?}")));
    }
    let popularity = WeightedIndex::new((0..g).map(|r| ((r + 1) as f64).powf(-cfg.zipf))).expect("positive weights");
    let vocab = Vocab::from_tokens((0..cfg.vocab_size).map(|i| format!("item{i}")).collect())?;
    let corpus = |stream: u64, count: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let sessions = (0..count).map(|_| session(&cfg, &popularity, &mut rng)).collect();
        SessionCorpus::new(sessions, vocab.clone())
    };
    Ok(TwoInterestCorpus { train: corpus(1, cfg.train_sessions)?, test: corpus(2, cfg.test_sessions)?, config: cfg })
}
