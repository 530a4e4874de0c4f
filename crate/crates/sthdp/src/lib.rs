//! Spatio-temporal hierarchical Dirichlet process for trajectory corpora.
//!
//! Two coupled HDPs share a clustering of motion words: one models the
//! discrete location-velocity words of each document, the other models the
//! continuous time stamps attached to those words. Inference is collapsed
//! Gibbs sampling over a Chinese-restaurant-franchise representation, with
//! split-merge Metropolis-Hastings moves layered on top to escape local
//! modes. The crate also ships corpus construction from raw trajectories,
//! model extraction, evaluation metrics, and a synthetic grid-world
//! generator used for end-to-end recovery checks.

pub mod checkpoint;
pub mod corpus;
pub mod eval;
pub mod gibbs;
pub mod logmath;
pub mod model;
pub mod priors;
pub mod seating;
pub mod split_merge;
pub mod synthgrid;

use thiserror::Error;

/// Errors surfaced by corpus I/O, checkpointing, and model files.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unsupported format version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
