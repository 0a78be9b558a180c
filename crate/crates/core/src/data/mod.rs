//! Corpus ingestion: event logs, train/test splits, filtering and vocabularies.

mod corpus;
mod events;
mod split;

pub use corpus::{decode_corpus, encode_corpus, finalize_corpus, load_corpus, save_corpus, FilterConfig, SessionCorpus, Vocab};
pub use events::{load_events, parse_events, parse_time, EventFormat, EventLog, SessionEvents, MAX_MALFORMED_FRACTION};
pub use split::{bucket_playlists, keep_recent_fraction, split_by_last_day, utc_day, PLAYLIST_BUCKETS, SECONDS_PER_DAY};

use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitMethod {
    /// Sessions ending on the final UTC day are test.
    LastDay,
    /// Seeded assignment to 31 buckets; the last bucket is test.
    Buckets,
}

impl FromStr for SplitMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "last_day" => Ok(SplitMethod::LastDay),
            "buckets" => Ok(SplitMethod::Buckets),
            _ => Err(Error::Config(format!("unknown split {s:?}; expected last_day or buckets"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IngestConfig {
    pub split: SplitMethod,
    pub seed: u64,
    pub filter: FilterConfig,
    /// Share of the most recent training sessions to keep.
    pub fraction: f64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig { split: SplitMethod::LastDay, seed: 0, filter: FilterConfig::default(), fraction: 1.0 }
    }
}

/// Splits, subsamples and filters a log into indexed train and test corpora.
pub fn build_corpora(log: &EventLog, config: &IngestConfig) -> Result<(SessionCorpus, SessionCorpus)> {
    if log.sessions.is_empty() {
        return Err(Error::Input("event log is empty".into()));
    }
    let (train, test) = match config.split {
        SplitMethod::LastDay => split_by_last_day(log)?,
        SplitMethod::Buckets => bucket_playlists(log, config.seed),
    };
    let train = if config.fraction < 1.0 { keep_recent_fraction(&train, config.fraction)? } else { train };
    finalize_corpus(&train, &test, config.filter)
}
