//! Crackle detection in lung sounds.
//!
//! The pipeline goes: respiratory-cycle preprocessing (resampling, phase
//! splitting, fixed-length padding), log-mel feature extraction, optional
//! augmentation (time stretching, VTLP), a 7-block CNN trained with focal
//! loss and Adam, transfer-learning surgery that turns a pre-trained
//! single-input model into a multi-input one, and subject-wise
//! cross-validation reporting Se / P+ / F-score.
//!
//! Heavy inner loops (convolution, feature extraction, fold-run jobs) are
//! data-parallel via rayon when the `parallel` feature is enabled (default).
//! Both execution modes produce bitwise-identical results; see [`parallel`].

pub mod audio;
pub mod augment;
pub mod dataio;
pub mod experiment;
pub mod features;
pub mod metrics;
pub mod nn;
pub mod parallel;
mod seeds;
pub mod transfer;

pub use audio::{AudioSignal, ClassLabel, Domain, PhaseRatio, RespiratoryCycle};
pub use features::LogMelSpectrogram;
pub use metrics::{ConfusionCounts, MetricsReport};
