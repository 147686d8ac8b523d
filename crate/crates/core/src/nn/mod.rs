//! Minimal reverse-mode tensor engine.
//!
//! Supports exactly the layer set the built-in models need (conv2d,
//! maxpool, concat, dense, relu, sigmoid, dropout, global average pool,
//! flatten), trained with Adam, MSE loss, dropout, and patience-based
//! early stopping. Everything is deterministic given (weights, data,
//! config): shuffling, weight init, and dropout masks all derive from the
//! run seed.
//!
//! Training runs in single precision; the engine is generic over the
//! scalar so gradient checks can run the same code in double precision.

mod adam;
mod exec;
mod graph;
mod tensor;
mod train;
mod weights_io;

pub use adam::{AdamParams, AdamState};
pub use exec::{backward, forward, forward_with_contexts, Gradients, Mode, SampleContext};
pub use graph::{LayerKind, LayerNode, ModelGraph, NodeShape};
pub use tensor::{Scalar, Tensor};
pub use train::{
    predict_set, train, Dataset, EarlyStopper, EpochRecord, InMemoryDataset, LossKind,
    OptimizerKind, StopReason, TrainConfig, TrainLog,
};
pub use weights_io::{load_weights, read_weight_file, save_weights, WEIGHT_MAGIC};

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("graph error: {0}")]
    Graph(String),
    #[error("shape error at node '{node}': {detail}")]
    Shape { node: String, detail: String },
    #[error("tensor error: {0}")]
    Tensor(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error("weight file {path}: {detail}")]
    WeightFile { path: PathBuf, detail: String },
    #[error("weight tensor '{name}': {detail}")]
    WeightMismatch { name: String, detail: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
