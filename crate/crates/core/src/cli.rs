//! Command-line verbs: ingest, train, index, query, eval, inspect.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::checkpoint::{load_checkpoint, load_header, save_checkpoint, AnyCheckpoint, Checkpoint};
use crate::config::RunConfig;
use crate::data::{build_corpora, load_corpus, load_events, save_corpus, EventFormat, SplitMethod};
use crate::error::{Error, Result};
use crate::eval::{evaluate, evaluate_via_index};
use crate::index::{exact_top_n, load_index, save_index, DecompositionQuery, IndexKind, MatchIndex, TopN};
use crate::io::write_atomic;
use crate::model::{format_parameter_table, HeadKind, Model};
use crate::real::{Precision, Real};
use crate::train::{grad_check, LossRecord, Trainer};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "QS_THREADS";

#[derive(Debug, Parser)]
#[command(name = "qsrec", version, about = "Session recommendation with symmetric-matrix session embeddings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse an event log, split it and write train and test corpus caches.
    Ingest(IngestArgs),
    /// Train a model on a corpus cache.
    Train(TrainArgs),
    /// Build a match index from a matrix-head checkpoint.
    Index(IndexArgs),
    /// Top-N items for a session given as item indices.
    Query(QueryArgs),
    /// recall@K and MRR@K over a test corpus cache.
    Eval(EvalArgs),
    /// Print a checkpoint header and parameter table.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// click_csv or playlist_lines; overrides the config.
    #[arg(long)]
    pub format: Option<String>,
    /// last_day or buckets; overrides the config.
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub train_out: PathBuf,
    #[arg(long)]
    pub test_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Continue from this checkpoint up to the configured epoch count.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Write the loss trace here.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Check analytic gradients on the corpus instead of training.
    #[arg(long)]
    pub grad_check: bool,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// flatten or decomp
    #[arg(long)]
    pub kind: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Number of results (and candidates per direction for a decomposition index).
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    /// Eigendirections for a decomposition index.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Clicked item indices, oldest first.
    #[arg(required = true)]
    pub items: Vec<u32>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Cutoff; overrides the config.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub index: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long, conflicts_with_all = ["config", "vocab"])]
    pub checkpoint: Option<PathBuf>,
    /// Describe the model a config would build, without a checkpoint.
    #[arg(long, requires = "vocab")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub vocab: Option<usize>,
}

/// Sizes the global thread pool from `QS_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Error::Internal(e.to_string()))
}

/// Runs one verb, writing results to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => ingest(a, out),
        Command::Train(a) => train(a, out),
        Command::Index(a) => index(a, out),
        Command::Query(a) => query(a, out),
        Command::Eval(a) => eval(a, out),
        Command::Inspect(a) => inspect(a, out),
    }
}

fn config_or_default(path: Option<&Path>) -> Result<RunConfig> {
    path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
}

fn ingest(a: IngestArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = config_or_default(a.config.as_deref())?;
    if let Some(f) = &a.format {
        cfg.format = f.parse()?;
    }
    if let Some(s) = &a.split {
        cfg.ingest.split = s.parse()?;
    }
    if let Some(seed) = a.seed {
        cfg.ingest.seed = seed;
    }
    if cfg.format == EventFormat::PlaylistLines && cfg.ingest.split == SplitMethod::LastDay {
        return Err(Error::Protocol("playlists carry no timestamps; use split = buckets".into()));
    }
    let log = load_events(&a.input, cfg.format)?;
    let (train, test) = build_corpora(&log, &cfg.ingest)?;
    save_corpus(&train, &a.train_out)?;
    save_corpus(&test, &a.test_out)?;
    writeln!(out, "V\t{}", train.vocab.len())?;
    writeln!(out, "train sessions\t{}\tevents\t{}", train.sessions.len(), train.event_count())?;
    writeln!(out, "test sessions\t{}\tevents\t{}", test.sessions.len(), test.event_count())?;
    writeln!(out, "malformed rows\t{}", log.malformed)?;
    Ok(())
}

fn train(a: TrainArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = RunConfig::load(&a.config)?;
    let corpus = load_corpus(&a.corpus)?;
    let vocab = corpus.vocab.len();

    if a.grad_check {
        let model = Model::<f64>::new(cfg.train.model_shape(vocab), cfg.train.seed)?;
        let report = grad_check(&model, &corpus.sessions, cfg.train.batch_size, 1e-5)?;
        for (name, err) in &report.per_tensor {
            writeln!(out, "{name}\t{err:.3e}")?;
        }
        writeln!(out, "max relative error\t{:.3e}\t({} coordinates)", report.max_rel_error, report.coordinates)?;
        if !report.passed() {
            return Err(Error::Numeric(format!(
                "gradient check failed: {:.3e} at {}[{}]",
                report.max_rel_error, report.worst.0, report.worst.1
            )));
        }
        return Ok(());
    }

    match a.resume.as_deref().map(load_checkpoint).transpose()? {
        None if cfg.precision == Precision::F32 => run_training(Trainer::<f32>::new(cfg.train, vocab)?, &corpus.sessions, &a, out),
        None => run_training(Trainer::<f64>::new(cfg.train, vocab)?, &corpus.sessions, &a, out),
        Some(AnyCheckpoint::F32(c)) => run_training(resume(c, &cfg)?, &corpus.sessions, &a, out),
        Some(AnyCheckpoint::F64(c)) => run_training(resume(c, &cfg)?, &corpus.sessions, &a, out),
    }
}

fn resume<T: Real>(c: Checkpoint<T>, cfg: &RunConfig) -> Result<Trainer<T>> {
    if c.seed != cfg.train.seed {
        return Err(Error::Config(format!("checkpoint was trained with seed {} but the config says {}", c.seed, cfg.train.seed)));
    }
    let adam = c.adam.ok_or_else(|| Error::Input("checkpoint has no optimizer state to resume from".into()))?;
    Trainer::resume(cfg.train, c.model, adam, c.epochs_done)
}

fn run_training<T: Real>(mut t: Trainer<T>, sessions: &[Vec<u32>], a: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    if t.epochs_done >= t.config.epochs {
        log::warn!("checkpoint already has {} epochs; nothing to do", t.epochs_done);
    }
    let mut trace = String::new();
    // Trace lines accumulate across runs when resuming into the same file.
    if let (Some(path), true) = (&a.trace, a.resume.is_some()) {
        if path.exists() {
            trace = std::fs::read_to_string(path)?;
        }
    }
    let save = |t: &Trainer<T>| {
        let ckpt = Checkpoint { model: t.model.clone(), seed: t.config.seed, epochs_done: t.epochs_done, adam: Some(t.adam.clone()) };
        save_checkpoint(&ckpt, &a.out)
    };
    if t.epochs_done >= t.config.epochs {
        save(&t)?;
    }
    while t.epochs_done < t.config.epochs {
        let (mut sum, mut steps) = (0.0, 0usize);
        let mut lines = String::new();
        t.run_epoch(sessions, |r: &LossRecord| {
            sum += r.loss;
            steps += 1;
            lines.push_str(&format!("{r}\n"));
        })?;
        let mean = if steps > 0 { sum / steps as f64 } else { f64::NAN };
        writeln!(out, "epoch {}\tmean loss {mean:.6}\tsteps {steps}", t.epochs_done)?;
        trace.push_str(&lines);
        save(&t)?;
        if let Some(path) = &a.trace {
            write_atomic(path, trace.as_bytes())?;
        }
    }
    Ok(())
}

fn index(a: IndexArgs, out: &mut dyn Write) -> Result<()> {
    let kind = IndexKind::parse(&a.kind)?;
    let items = match load_checkpoint(&a.checkpoint)? {
        AnyCheckpoint::F32(c) => c.model.item_matrix()?,
        AnyCheckpoint::F64(c) => c.model.item_matrix()?,
    };
    let index = MatchIndex::build(kind, items);
    save_index(&index, &a.out)?;
    writeln!(out, "{} index over {} items of dimension {}", kind.name(), index.items().len(), index.items().dim())?;
    Ok(())
}

fn top_items<T: Real>(model: &Model<T>, items: &[u32], index: Option<&MatchIndex>, a: &QueryArgs) -> Result<TopN> {
    let emb = model.session_embedding(&model.encode(items)?)?.cast::<f64>();
    let matrix = matches!(model.shape().head, HeadKind::Matrix { .. });
    match index {
        Some(index) => {
            if index.items() != &model.item_matrix()? {
                return Err(Error::Consistency("index item embeddings do not match the checkpoint".into()));
            }
            let q = DecompositionQuery { top: a.n, ..DecompositionQuery::new(a.k, a.n) };
            index.query(&emb.to_sym_matrix()?, &q)
        }
        None if matrix => exact_top_n(&emb.to_sym_matrix()?, &model.item_matrix()?, a.n),
        None => {
            if a.n == 0 {
                return Err(Error::Input("N must be at least 1".into()));
            }
            let scores = model.scorer().scores(&emb);
            Ok(TopN::select(scores.into_iter().enumerate().map(|(i, s)| (i as u32, s)).collect(), a.n))
        }
    }
}

fn query(a: QueryArgs, out: &mut dyn Write) -> Result<()> {
    let index = a.index.as_deref().map(load_index).transpose()?;
    let top = match load_checkpoint(&a.checkpoint)? {
        AnyCheckpoint::F32(c) => top_items(&c.model, &a.items, index.as_ref(), &a)?,
        AnyCheckpoint::F64(c) => top_items(&c.model, &a.items, index.as_ref(), &a)?,
    };
    for (id, score) in top.entries() {
        writeln!(out, "{id}\t{score}")?;
    }
    Ok(())
}

fn eval_model<T: Real>(model: &Model<T>, a: &EvalArgs, cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let k = a.k.unwrap_or(cfg.eval_k);
    let report = match &a.index {
        None => evaluate(model, &corpus, k)?,
        Some(path) => {
            let q = DecompositionQuery::new(cfg.decomp_k, cfg.decomp_n);
            evaluate_via_index(&load_index(path)?, model, &corpus, k, &q)?
        }
    };
    writeln!(out, "{}", report.tsv_line())?;
    writeln!(out, "{report}")?;
    Ok(())
}

fn eval(a: EvalArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = config_or_default(a.config.as_deref())?;
    match load_checkpoint(&a.checkpoint)? {
        AnyCheckpoint::F32(c) => eval_model(&c.model, &a, &cfg, out),
        AnyCheckpoint::F64(c) => eval_model(&c.model, &a, &cfg, out),
    }
}

fn inspect(a: InspectArgs, out: &mut dyn Write) -> Result<()> {
    match (&a.checkpoint, &a.config, a.vocab) {
        (Some(path), _, _) => writeln!(out, "{}", load_header(path)?.describe())?,
        (None, Some(path), Some(v)) => {
            let shape = RunConfig::load(path)?.train.model_shape(v);
            shape.validate()?;
            writeln!(out, "{shape}\n\n{}", format_parameter_table(&shape.parameter_table()))?
        }
        _ => return Err(Error::Input("inspect needs --checkpoint, or --config with --vocab".into())),
    }
    Ok(())
}
