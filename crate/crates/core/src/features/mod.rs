//! Log-mel spectrogram extraction and normalization — the network input.

mod dump;
mod logmel;
mod mel;
mod stft;

pub use dump::{read_feature_dump, write_feature_dump};
pub use logmel::{log_mel, normalize, LogMelSpectrogram, LOG_FLOOR_EPS};
pub use mel::{build_mel_filterbank, default_filterbank, hz_to_mel, mel_to_hz, MelFilterbank};
pub use stft::{stft_magnitude, Spectrogram, FFT_BINS, WINDOW_SIZE};

use thiserror::Error;

/// Mel bins used throughout the pipeline.
pub const N_MELS: usize = 45;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("signal shorter than one window ({0} < {1} samples)")]
    TooShort(usize, usize),
    #[error("negative frequency {0} Hz")]
    InvalidFrequency(f64),
    #[error("invalid frequency range [{0}, {1}] Hz (Nyquist {2})")]
    InvalidRange(f64, f64, f64),
    #[error("shape mismatch: {0}")]
    ShapeError(String),
    #[error("feature io: {0}")]
    Io(String),
}
