//! Edge representation learning on dual hypergraphs.
//!
//! A graph `(X, M, E)` is turned into its dual hypergraph `(E, Mᵀ, X)` by a
//! linear-time reshape of the edge list ([`dht`]). Ordinary node message
//! passing on the dual then learns edge representations ([`layers`]), which
//! two edge pooling operators coarsen or prune ([`pooling`]). Everything is
//! trained with the small reverse-mode engine in [`autodiff`].
//!
//! Module map:
//!
//! - [`tensor`], [`autodiff`], [`optim`]: dense matrices, tape-based
//!   gradients, Adam.
//! - [`graph`], [`dht`]: sparse graphs, the dual transformation and its
//!   inverse, the line-graph baseline.
//! - [`layers`]: GCN, the edge layer on the dual, and four edge-aware
//!   baselines.
//! - [`pooling`]: cluster pooling, score-based edge drop, unpooling.
//! - [`tasks`]: autoencoders, graph classification, metrics, training loops.
//! - [`datagen`], [`io`]: seeded generators and the JSON graph format.
//! - [`bench`]: transformation and message-passing timing harness.

pub mod autodiff;
pub mod bench;
pub mod datagen;
pub mod dht;
pub mod gradcheck;
pub mod graph;
pub mod io;
pub mod layers;
pub mod optim;
pub mod pooling;
pub mod tasks;
pub mod tensor;

use thiserror::Error;

pub use autodiff::{Tape, Var};
pub use dht::{dht, dht_inverse, DualHypergraph};
pub use graph::{Graph, Topology};
pub use optim::{Adam, AdamConfig, ParamId, ParamStore};
pub use tensor::Tensor;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] tensor::TensorError),
    #[error(transparent)]
    Autodiff(#[from] autodiff::AutodiffError),
    #[error(transparent)]
    Graph(#[from] graph::GraphError),
    #[error(transparent)]
    Optim(#[from] optim::OptimError),
    #[error("{layer}: expected input width {expected}, got {got}")]
    InputDim {
        layer: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("edge {edge} is not one-hot: {detail}")]
    Encoding { edge: usize, detail: String },
    #[error("keep ratio {0} is outside (0, 1]")]
    KeepRatio(f64),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("loss became non-finite at epoch {epoch} (last finite loss {last})")]
    NonFiniteLoss { epoch: usize, last: f64 },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
