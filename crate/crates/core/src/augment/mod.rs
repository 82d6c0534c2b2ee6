//! Training-set augmentation: phase-vocoder time stretching, vocal tract
//! length perturbation, and the per-domain augmentation policy.

mod plan;
mod stretch;
mod vtlp;

pub use plan::{apply_plan, AugmentPlan};
pub use stretch::time_stretch;
pub use vtlp::{vtlp, VTLP_ALPHA_MAX, VTLP_ALPHA_MIN};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AugmentError {
    #[error("stretch rate {0} outside [0.5, 2.0]")]
    InvalidRate(f64),
    #[error("signal too short to stretch ({0} < 1024 samples)")]
    TooShort(usize),
    #[error("vtlp alpha {0} outside [0.9, 1.1]")]
    InvalidAlpha(f64),
    #[error("plan/domain mismatch: {0}")]
    PlanMismatch(String),
    #[error("augmentation applied to a non-training sample ({0})")]
    SplitLeakage(String),
}
