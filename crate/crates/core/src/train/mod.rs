//! BPR training with session-parallel mini-batches and Adam.

mod adam;
mod batch;
mod gradcheck;
mod loss;
mod step;

pub use adam::{adam_update, AdamState};
pub use batch::{session_parallel_batches, session_parallel_batches_in_order, Batch, SessionParallelBatches, SlotStep};
pub use gradcheck::{grad_check, GradCheckReport, GRAD_CHECK_TOLERANCE};
pub use loss::bpr_loss;

use std::fmt::{self, Write as _};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{HeadKind, Model, ModelShape, Params};
use crate::real::Real;

/// Hyperparameters for one training run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Probability of keeping a hidden unit; 1 disables dropout.
    pub dropout_keep: f64,
    pub epochs: usize,
    pub seed: u64,
    pub input_dim: usize,
    /// GRU width for the vector and fc heads; the matrix head derives it from its order.
    pub hidden_dim: usize,
    pub head: HeadKind,
    /// Visit sessions in a fresh seeded order each epoch.
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.002,
            batch_size: 256,
            dropout_keep: 0.5,
            epochs: 10,
            seed: 0,
            input_dim: 32,
            hidden_dim: 100,
            head: HeadKind::Matrix { order: 10 },
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.dropout_keep > 0.0 && self.dropout_keep <= 1.0) {
            return Err(Error::Config(format!("dropout keep must lie in (0, 1], got {}", self.dropout_keep)));
        }
        Ok(())
    }

    pub fn model_shape(&self, vocab_size: usize) -> ModelShape {
        match self.head {
            HeadKind::Vector => ModelShape::vector(vocab_size, self.input_dim, self.hidden_dim),
            HeadKind::Fc { order } => ModelShape::fc(vocab_size, self.input_dim, self.hidden_dim, order),
            HeadKind::Matrix { order } => ModelShape::matrix(vocab_size, self.input_dim, order),
        }
    }
}

/// Loss of one update step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRecord {
    /// 1-based.
    pub epoch: usize,
    /// 1-based batch number within the epoch.
    pub step: usize,
    pub loss: f64,
}

impl fmt::Display for LossRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "epoch {} step {} loss {}", self.epoch, self.step, self.loss)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossTrace {
    pub records: Vec<LossRecord>,
}

impl LossTrace {
    /// `(epoch, mean step loss)` for each epoch present in the trace.
    pub fn epoch_means(&self) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64, usize)> = Vec::new();
        for r in &self.records {
            match out.last_mut() {
                Some((e, sum, n)) if *e == r.epoch => {
                    *sum += r.loss;
                    *n += 1;
                }
                _ => out.push((r.epoch, r.loss, 1)),
            }
        }
        out.into_iter().map(|(e, sum, n)| (e, sum / n as f64)).collect()
    }

    /// One `epoch <k> step <s> loss <float>` line per record.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            let _ = writeln!(s, "{r}");
        }
        s
    }
}

/// Model, optimizer state and progress; everything needed to resume.
#[derive(Clone, Debug, PartialEq)]
pub struct Trainer<T> {
    pub config: TrainConfig,
    pub model: Model<T>,
    pub adam: AdamState<T>,
    pub epochs_done: usize,
}

impl<T: Real> Trainer<T> {
    /// Fresh model initialized from `config.seed`.
    pub fn new(config: TrainConfig, vocab_size: usize) -> Result<Self> {
        config.validate()?;
        let model = Model::new(config.model_shape(vocab_size), config.seed)?;
        let adam = AdamState::new(model.params());
        Ok(Trainer { config, model, adam, epochs_done: 0 })
    }

    /// Continues from saved state; `config.epochs` is the total target.
    pub fn resume(config: TrainConfig, model: Model<T>, adam: AdamState<T>, epochs_done: usize) -> Result<Self> {
        config.validate()?;
        let want = config.model_shape(model.vocab_size());
        if want != *model.shape() {
            return Err(Error::Config(format!("config describes {want} but the checkpoint holds {}", model.shape())));
        }
        Ok(Trainer { config, model, adam, epochs_done })
    }

    /// Trains until `config.epochs` epochs are done, reporting each step to `on_step`.
    pub fn run(&mut self, sessions: &[Vec<u32>], mut on_step: impl FnMut(&LossRecord)) -> Result<LossTrace> {
        let mut trace = LossTrace::default();
        while self.epochs_done < self.config.epochs {
            self.run_epoch(sessions, |r| {
                on_step(r);
                trace.records.push(*r);
            })?;
        }
        Ok(trace)
    }

    /// One pass over `sessions`. Randomness depends only on the seed and epoch number.
    pub fn run_epoch(&mut self, sessions: &[Vec<u32>], mut on_step: impl FnMut(&LossRecord)) -> Result<()> {
        let epoch = self.epochs_done + 1;
        let cfg = self.config;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64);

        let mut order: Vec<usize> = (0..sessions.len()).collect();
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let hd = self.model.shape().hidden_dim;
        let mut hidden = vec![vec![T::zero(); hd]; cfg.batch_size];
        let mut masks = vec![vec![T::one(); hd]; cfg.batch_size];
        let keep_scale = T::of(1.0 / cfg.dropout_keep);
        let mut grads = Params::zeros(self.model.shape());

        for (i, batch) in session_parallel_batches_in_order(sessions, order, cfg.batch_size)?.enumerate() {
            let step = i + 1;
            let use_masks = cfg.dropout_keep < 1.0;
            if use_masks {
                for (slot, _) in batch.active() {
                    for m in masks[slot].iter_mut() {
                        *m = if rng.gen::<f64>() < cfg.dropout_keep { keep_scale } else { T::zero() };
                    }
                }
            }
            grads.fill_zero();
            let out = step::forward_backward(
                &self.model,
                &batch,
                &hidden,
                use_masks.then_some(masks.as_slice()),
                Some(&mut grads),
            )?;
            for (slot, h) in out.hidden.into_iter().enumerate() {
                if let Some(h) = h {
                    hidden[slot] = h;
                }
            }
            let Some(loss) = out.loss else { continue };
            let loss = loss.f64();
            if !loss.is_finite() {
                return Err(Error::Training(format!("loss diverged to {loss} at epoch {epoch} step {step}")));
            }
            adam_update(self.model.params_mut(), &grads, &mut self.adam, cfg.learning_rate)?;
            on_step(&LossRecord { epoch, step, loss });
        }
        self.epochs_done = epoch;
        Ok(())
    }
}

/// Trains a fresh model for `config.epochs` epochs.
pub fn train<T: Real>(sessions: &[Vec<u32>], vocab_size: usize, config: TrainConfig) -> Result<(Model<T>, LossTrace)> {
    let mut trainer = Trainer::new(config, vocab_size)?;
    let trace = trainer.run(sessions, |_| {})?;
    Ok((trainer.model, trace))
}
