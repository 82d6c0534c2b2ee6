//! HTK-style mel scale and the triangular filterbank.

use super::{FeatureError, FFT_BINS, N_MELS};
use crate::features::stft::WINDOW_SIZE;

/// mel = 2595 log10(1 + f / 700)
pub fn hz_to_mel(f: f64) -> Result<f64, FeatureError> {
    if f < 0.0 {
        return Err(FeatureError::InvalidFrequency(f));
    }
    Ok(2595.0 * (1.0 + f / 700.0).log10())
}

/// Inverse of [`hz_to_mel`].
pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filterbank, `n_mels` rows x `n_fft_bins` columns.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    pub weights: Vec<f64>,
    pub n_mels: usize,
    pub n_bins: usize,
    pub f_min: f64,
    pub f_max: f64,
}

impl MelFilterbank {
    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }
}

/// Build the filterbank: n_mels + 2 mel-equispaced edge points from `f_min`
/// to `f_max`; row m is the triangle rising from edge m to a peak of 1 at
/// edge m+1 and falling to edge m+2, sampled at the FFT bin centers
/// k * fs / 512.
pub fn build_mel_filterbank(
    n_mels: usize,
    n_fft_bins: usize,
    fs: u32,
    f_min: f64,
    f_max: f64,
) -> Result<MelFilterbank, FeatureError> {
    let nyquist = fs as f64 / 2.0;
    if n_mels == 0 || !(f_min >= 0.0) || f_min >= f_max || f_max > nyquist {
        return Err(FeatureError::InvalidRange(f_min, f_max, nyquist));
    }
    let mel_lo = hz_to_mel(f_min)?;
    let mel_hi = hz_to_mel(f_max)?;
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
        .collect();

    let bin_hz = fs as f64 / WINDOW_SIZE as f64;
    let mut weights = vec![0.0; n_mels * n_fft_bins];
    for m in 0..n_mels {
        let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        for k in 0..n_fft_bins {
            let f = k as f64 * bin_hz;
            let w = if f >= lo && f <= center {
                (f - lo) / (center - lo)
            } else if f > center && f <= hi {
                (hi - f) / (hi - center)
            } else {
                0.0
            };
            weights[m * n_fft_bins + k] = w;
        }
    }
    Ok(MelFilterbank { weights, n_mels, n_bins: n_fft_bins, f_min, f_max })
}

/// The pipeline's standard filterbank: 45 mels over 0..8000 Hz at 16 kHz.
pub fn default_filterbank() -> MelFilterbank {
    build_mel_filterbank(N_MELS, FFT_BINS, 16_000, 0.0, 8_000.0)
        .expect("default filterbank parameters are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_scale_anchor_points() {
        assert_eq!(hz_to_mel(0.0).unwrap(), 0.0);
        let m700 = hz_to_mel(700.0).unwrap();
        assert!((m700 - 2595.0 * 2f64.log10()).abs() < 1e-9);
        assert!((m700 - 781.17).abs() < 0.01);
    }

    #[test]
    fn mel_inverse_composes_to_identity() {
        for f in [0.0, 123.4, 700.0, 4000.0, 7999.0] {
            let back = mel_to_hz(hz_to_mel(f).unwrap());
            assert!((back - f).abs() < 1e-9, "{f} -> {back}");
        }
        assert_eq!(hz_to_mel(-1.0), Err(FeatureError::InvalidFrequency(-1.0)));
    }

    #[test]
    fn rejects_invalid_range() {
        assert!(build_mel_filterbank(45, 257, 16_000, 0.0, 9_000.0).is_err());
        assert!(build_mel_filterbank(45, 257, 16_000, 4000.0, 4000.0).is_err());
        assert!(build_mel_filterbank(0, 257, 16_000, 0.0, 8_000.0).is_err());
    }

    #[test]
    fn rows_are_triangles_with_unit_peak_bound() {
        let fb = default_filterbank();
        assert_eq!(fb.n_mels, 45);
        assert_eq!(fb.n_bins, 257);
        for m in 0..fb.n_mels {
            let row = fb.row(m);
            assert!(row.iter().all(|&w| (0.0..=1.0).contains(&w)), "row {m}");
            assert!(row.iter().any(|&w| w > 0.0), "row {m} empty");
            // unimodal: rises to the max then falls
            let peak = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            for k in 1..=peak {
                assert!(row[k] >= row[k - 1] - 1e-12);
            }
            for k in peak + 1..row.len() {
                assert!(row[k] <= row[k - 1] + 1e-12);
            }
        }
    }

    #[test]
    fn column_sums_bounded_by_two() {
        let fb = default_filterbank();
        for k in 0..fb.n_bins {
            let sum: f64 = (0..fb.n_mels).map(|m| fb.row(m)[k]).sum();
            assert!(sum <= 2.0 + 1e-12, "bin {k}: {sum}");
        }
    }

    #[test]
    fn centers_are_sorted() {
        let fb = default_filterbank();
        let center = |m: usize| {
            fb.row(m)
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0
        };
        for m in 1..fb.n_mels {
            assert!(center(m) >= center(m - 1), "row {m}");
        }
    }

    #[test]
    fn row_zero_vanishes_above_its_second_edge() {
        let fb = default_filterbank();
        let mel_hi = hz_to_mel(8000.0).unwrap();
        let edge2 = mel_to_hz(2.0 * mel_hi / 46.0);
        let bin_hz = 16_000.0 / 512.0;
        for k in 0..fb.n_bins {
            if k as f64 * bin_hz > edge2 {
                assert_eq!(fb.row(0)[k], 0.0, "bin {k}");
            }
        }
    }
}
