//! Experiment orchestration: variant naming, configuration, the per-variant
//! feature pipeline, and subject-wise cross-validation.

mod config;
mod crossval;
mod pipeline;
mod variant;

pub use config::{
    AlphaMode, DataConfig, ExperimentConfig, PretrainSource, PretrainingConfig, TrainSection,
};
pub use crossval::{
    render_report_text, render_results_csv, resolve_pretrained, run_crossval, run_single_fold,
    CrossvalReport, FoldRunResult, MetricsSummary,
};
pub use pipeline::{branch_feature_dims, build_feature_set};
pub use variant::{
    format_variant_name, parse_variant_name, InputCombo, PaddingKind, TransferSpec, Variant,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("variant name: {0}")]
    Variant(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] crate::dataio::DataError),
    #[error(transparent)]
    Audio(#[from] crate::audio::AudioError),
    #[error(transparent)]
    Feature(#[from] crate::features::FeatureError),
    #[error(transparent)]
    Augment(#[from] crate::augment::AugmentError),
    #[error(transparent)]
    Transfer(#[from] crate::transfer::TransferError),
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error("leakage: {0}")]
    Leakage(String),
}
