//! Minimal tensor + layer library with exact backpropagation: Conv2D,
//! BatchNorm, ReLU, MaxPool, GAP, Dense, softmax, focal loss, Adam with L2
//! decay, Glorot initialization and finite-difference gradient verification.
//!
//! Training runs in f32; gradient checks run the same code in f64. The
//! network graph is fixed-shape (1-3 branches of 7 BN-Conv2D-ReLU blocks,
//! GAP, concat, dense softmax head), so there is no general autodiff —
//! every layer carries its own backward.

mod adam;
mod checkpoint;
mod gradcheck;
mod init;
mod loss;
mod model;
mod ops;
mod scalar;
mod tensor;
mod train;

pub use adam::{AdamHyper, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointData, CHECKPOINT_MAGIC};
pub use gradcheck::{grad_check_model, GradCheckReport, GroupReport};
pub use init::glorot_uniform_init;
pub use loss::{focal_loss, uniform_alpha};
pub use model::{
    ArchitectureSpec, BnParams, ConvBlock, ConvParams, DenseParams, Grads, Mode, ModelGraph,
    Trace,
};
pub use ops::{dense_forward, gap_forward, maxpool_forward, relu_forward, softmax_rows};
pub use scalar::Scalar;
pub use tensor::{Matrix, Tensor4};
pub use train::{
    evaluate_accuracy, predict, train, EpochStats, FeatureSet, SampleFeatures, TrainConfig,
    TrainHistory,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeError(String),
    #[error("empty training set")]
    EmptyDataset,
    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),
    #[error("incompatible checkpoint: {0}")]
    IncompatibleCheckpoint(String),
    #[error("checkpoint io: {0}")]
    Io(String),
}
