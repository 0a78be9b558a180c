//! Session-based next-item recommendation with symmetric-matrix session embeddings.
//!
//! A GRU reads the clicks of a session. Instead of ending in a vector, the
//! matrix head reshapes the final hidden state into a symmetric matrix `A`
//! and scores an item embedding `y` as the quadratic form `yᵀAy`, so one
//! session can favour several unrelated directions at once. Two vector heads
//! are included for comparison.
//!
//! Modules:
//!
//! * [`symmat`] packed symmetric matrices, `Γ₁`/`Γ₂` flatten maps, Jacobi eigensolver
//! * [`model`] embeddings, GRU cell, vector / fc / matrix heads
//! * [`train`] session-parallel batching, BPR loss, backprop, Adam, gradient checking
//! * [`data`] click-log and playlist ingestion, splits, corpus cache
//! * [`index`] exact, flatten and decomposition retrieval
//! * [`eval`] recall@K and MRR@K
//! * [`synthetic`] planted two-interest corpora
//! * [`checkpoint`], [`config`], [`cli`] the files and verbs behind the `qsrec` binary

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod index;
pub mod io;
pub mod model;
pub mod real;
pub mod symmat;
pub mod synthetic;
pub mod train;

pub use error::{Error, Result};
pub use real::{Precision, Real};
