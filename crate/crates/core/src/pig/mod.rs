//! Physics-informed graph model, LSTM baseline, training, and evaluation.

pub mod checkpoint;
pub mod eval;
pub mod graph;
pub mod lstm;
pub mod model;
pub mod train;

use thiserror::Error;

use crate::ad::{AdError, StoreError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("cycle belongs to trial {cycle:?}, not {trial:?}")]
    CycleMismatch { cycle: String, trial: String },
    #[error("vibration window needs {needed} samples but is configured for {configured}")]
    WindowLength { needed: usize, configured: usize },
    #[error("graph carries no targets")]
    MissingTargets,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("empty data split")]
    EmptySplit,
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use eval::{evaluate, EvalCell, EvalReport};
pub use graph::{
    build_graph, build_training_graph, EdgeKind, GraphEdge, GraphInstance, GraphNode, NodeKind,
    NodeRole, TimeMark,
};
pub use lstm::{BaselineConfig, BaselineLstm, LstmSpec};
pub use model::{pig_loss, PigConfig, PigForward, PigModel};
pub use train::{train, AngleEstimator, EpochStats, SampleGrad, TrainConfig};
