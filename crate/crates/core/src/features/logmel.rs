//! Mel projection, log compression and per-spectrogram normalization.

use super::{FeatureError, MelFilterbank, Spectrogram};

/// Floor added before the log so silence frames stay bounded.
pub const LOG_FLOOR_EPS: f64 = 1e-10;

/// Log-mel feature matrix, frames x n_mels.
#[derive(Debug, Clone, PartialEq)]
pub struct LogMelSpectrogram {
    pub values: Vec<f64>,
    pub frames: usize,
    pub bins: usize,
    pub normalized: bool,
}

impl LogMelSpectrogram {
    pub fn at(&self, frame: usize, bin: usize) -> f64 {
        self.values[frame * self.bins + bin]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Population standard deviation over all entries.
    pub fn std(&self) -> f64 {
        let mean = self.mean();
        let var = self.values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / self.values.len() as f64;
        var.sqrt()
    }
}

/// Project magnitudes through the filterbank and apply the natural log with
/// an epsilon floor: values[t][m] = ln(sum_k fb[m][k] mag[t][k] + 1e-10).
pub fn log_mel(spec: &Spectrogram, fb: &MelFilterbank) -> Result<LogMelSpectrogram, FeatureError> {
    if spec.bins != fb.n_bins {
        return Err(FeatureError::ShapeError(format!(
            "spectrogram has {} bins, filterbank expects {}",
            spec.bins, fb.n_bins
        )));
    }
    let frames = spec.frames;
    let n_mels = fb.n_mels;
    let mut values = vec![0.0; frames * n_mels];
    crate::parallel::for_each_chunk_mut(&mut values, n_mels, |t, row| {
        let mag = spec.frame(t);
        for (m, v) in row.iter_mut().enumerate() {
            let dot: f64 = fb.row(m).iter().zip(mag).map(|(w, x)| w * x).sum();
            *v = (dot + LOG_FLOOR_EPS).ln();
        }
    });
    Ok(LogMelSpectrogram { values, frames, bins: n_mels, normalized: false })
}

/// Zero-mean / unit-std normalization over all entries of one spectrogram.
/// A degenerate input (std below 1e-12) maps to all zeros.
pub fn normalize(lm: &LogMelSpectrogram) -> LogMelSpectrogram {
    let mean = lm.mean();
    let std = lm.std();
    let values = if std < 1e-12 {
        vec![0.0; lm.values.len()]
    } else {
        lm.values.iter().map(|v| (v - mean) / std).collect()
    };
    LogMelSpectrogram { values, frames: lm.frames, bins: lm.bins, normalized: true }
}
