//! `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown or repeated
//! keys are errors, and every value is checked as it is read.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::{EventFormat, FilterConfig, IngestConfig, SplitMethod};
use crate::error::{Error, Result};
use crate::index::IndexKind;
use crate::model::HeadKind;
use crate::real::Precision;
use crate::train::TrainConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub ingest: IngestConfig,
    pub format: EventFormat,
    pub precision: Precision,
    pub index_kind: IndexKind,
    /// Eigendirections per decomposition query.
    pub decomp_k: usize,
    /// New candidates per direction.
    pub decomp_n: usize,
    /// Cutoff for recall and MRR.
    pub eval_k: usize,
    pub events: Option<PathBuf>,
    pub train_corpus: Option<PathBuf>,
    pub test_corpus: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train: TrainConfig::default(),
            ingest: IngestConfig::default(),
            format: EventFormat::ClickCsv,
            precision: Precision::F32,
            index_kind: IndexKind::Flatten,
            decomp_k: 2,
            decomp_n: 100,
            eval_k: 20,
            events: None,
            train_corpus: None,
            test_corpus: None,
        }
    }
}

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {raw:?}")))
}

fn positive(key: &str, raw: &str) -> Result<usize> {
    match value::<usize>(key, raw)? {
        0 => Err(Error::Config(format!("{key} must be at least 1"))),
        n => Ok(n),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut head = "matrix".to_string();
        let mut order = 10;
        let mut seen: Vec<String> = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, raw) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            if seen.iter().any(|k| k == key) {
                return Err(Error::Config(format!("line {}: {key} given twice", n + 1)));
            }
            seen.push(key.to_string());
            let t = &mut cfg.train;
            match key {
                "learning_rate" => t.learning_rate = value(key, raw)?,
                "batch_size" => t.batch_size = positive(key, raw)?,
                "dropout_keep" => t.dropout_keep = value(key, raw)?,
                "epochs" => t.epochs = value(key, raw)?,
                "seed" => {
                    t.seed = value(key, raw)?;
                    cfg.ingest.seed = t.seed;
                }
                "input_dim" => t.input_dim = positive(key, raw)?,
                "hidden_dim" => t.hidden_dim = positive(key, raw)?,
                "head" => head = raw.to_string(),
                "order" => order = positive(key, raw)?,
                "shuffle" => t.shuffle = value(key, raw)?,
                "precision" => {
                    cfg.precision = match raw {
                        "f32" => Precision::F32,
                        "f64" => Precision::F64,
                        _ => return Err(Error::Config(format!("precision must be f32 or f64, got {raw:?}"))),
                    }
                }
                "format" => cfg.format = raw.parse()?,
                "split" => cfg.ingest.split = raw.parse()?,
                "min_session_len" => cfg.ingest.filter.min_session_len = value(key, raw)?,
                "min_item_support" => cfg.ingest.filter.min_item_support = value(key, raw)?,
                "fraction" => cfg.ingest.fraction = value(key, raw)?,
                "index" => cfg.index_kind = IndexKind::parse(raw).map_err(|e| Error::Config(e.to_string()))?,
                "decomp_k" => cfg.decomp_k = positive(key, raw)?,
                "decomp_n" => cfg.decomp_n = positive(key, raw)?,
                "eval_k" => cfg.eval_k = positive(key, raw)?,
                "events" => cfg.events = Some(raw.into()),
                "train_corpus" => cfg.train_corpus = Some(raw.into()),
                "test_corpus" => cfg.test_corpus = Some(raw.into()),
                _ => return Err(Error::Config(format!("line {}: unknown key {key:?}", n + 1))),
            }
        }
        cfg.train.head = match head.as_str() {
            "vector" => HeadKind::Vector,
            "fc" => HeadKind::Fc { order },
            "matrix" => HeadKind::Matrix { order },
            _ => return Err(Error::Config(format!("head must be vector, fc or matrix, got {head:?}"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        let FilterConfig { min_session_len, .. } = self.ingest.filter;
        if min_session_len < 2 {
            return Err(Error::Config("min_session_len must be at least 2".into()));
        }
        let f = self.ingest.fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::Config(format!("fraction must lie in (0, 1], got {f}")));
        }
        if let HeadKind::Matrix { order } = self.train.head {
            if self.decomp_k > order {
                return Err(Error::Config(format!("decomp_k {} exceeds the matrix order {order}", self.decomp_k)));
            }
        }
        Ok(())
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = &self.train;
        let (head, order) = match t.head {
            HeadKind::Vector => ("vector", None),
            HeadKind::Fc { order } => ("fc", Some(order)),
            HeadKind::Matrix { order } => ("matrix", Some(order)),
        };
        writeln!(f, "learning_rate = {}", t.learning_rate)?;
        writeln!(f, "batch_size = {}", t.batch_size)?;
        writeln!(f, "dropout_keep = {}", t.dropout_keep)?;
        writeln!(f, "epochs = {}", t.epochs)?;
        writeln!(f, "seed = {}", t.seed)?;
        writeln!(f, "input_dim = {}", t.input_dim)?;
        writeln!(f, "hidden_dim = {}", t.hidden_dim)?;
        writeln!(f, "head = {head}")?;
        if let Some(order) = order {
            writeln!(f, "order = {order}")?;
        }
        writeln!(f, "shuffle = {}", t.shuffle)?;
        writeln!(f, "precision = {}", if self.precision == Precision::F32 { "f32" } else { "f64" })?;
        let format = match self.format {
            EventFormat::ClickCsv => "click_csv",
            EventFormat::PlaylistLines => "playlist_lines",
        };
        writeln!(f, "format = {format}")?;
        let split = match self.ingest.split {
            SplitMethod::LastDay => "last_day",
            SplitMethod::Buckets => "buckets",
        };
        writeln!(f, "split = {split}")?;
        writeln!(f, "min_session_len = {}", self.ingest.filter.min_session_len)?;
        writeln!(f, "min_item_support = {}", self.ingest.filter.min_item_support)?;
        writeln!(f, "fraction = {}", self.ingest.fraction)?;
        writeln!(f, "index = {}", self.index_kind.name())?;
        writeln!(f, "decomp_k = {}", self.decomp_k)?;
        writeln!(f, "decomp_n = {}", self.decomp_n)?;
        write!(f, "eval_k = {}", self.eval_k)?;
        for (key, path) in [("events", &self.events), ("train_corpus", &self.train_corpus), ("test_corpus", &self.test_corpus)] {
            if let Some(p) = path {
                write!(f, "\n{key} = {}", p.display())?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_round_trips() {
        let text = "# comment\nlearning_rate = 0.01\nhead = fc\norder = 4\nbatch_size=32\nsplit = buckets\nevents = data/x.txt\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.train.learning_rate, 0.01);
        assert_eq!(cfg.train.head, HeadKind::Fc { order: 4 });
        assert_eq!(cfg.ingest.split, SplitMethod::Buckets);
        assert_eq!(cfg.events.as_deref(), Some(Path::new("data/x.txt")));
        assert_eq!(RunConfig::parse(&cfg.to_string()).unwrap(), cfg);
    }

    #[test]
    fn rejects_unknown_repeated_and_invalid() {
        for text in [
            "learning_rte = 0.1",
            "epochs = 2\nepochs = 3",
            "batch_size = 0",
            "dropout_keep = 1.5",
            "learning_rate = -1",
            "head = tree",
            "fraction = 0",
            "order = 2\ndecomp_k = 3",
            "no equals sign",
            "precision = f16",
        ] {
            assert!(matches!(RunConfig::parse(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn presets_parse() {
        let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets");
        let rsc = RunConfig::load(&root.join("rsc15.cfg")).unwrap();
        assert_eq!((rsc.train.learning_rate, rsc.train.batch_size, rsc.train.dropout_keep), (0.002, 256, 0.5));
        let lastfm = RunConfig::load(&root.join("lastfm.cfg")).unwrap();
        assert_eq!(lastfm.train.learning_rate, 0.0012);
        assert_eq!(lastfm.ingest.split, SplitMethod::Buckets);
    }
}
