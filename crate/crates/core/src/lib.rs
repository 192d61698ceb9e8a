//! Dynamic attributed network embedding.
//!
//! Snapshots of an attributed graph are embedded with activeness-gated
//! neighborhood aggregation ([`spatial`]); the recent history of each node's
//! layerwise embeddings is summarized by attention and extrapolated one step
//! ahead ([`temporal`]); the model is fit with negative sampling and Adam
//! ([`training`]) and scored on new-link prediction and node classification
//! ([`eval`]).

pub mod diffnum;
pub mod eval;
pub mod graph;
pub mod spatial;
pub mod temporal;
pub mod training;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] graph::GraphError),
    #[error(transparent)]
    Diff(#[from] diffnum::DiffError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training: {0}")]
    Training(String),
    #[error("evaluation: {0}")]
    Eval(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed file {path}: {message}")]
    Format {
        path: std::path::PathBuf,
        message: String,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
