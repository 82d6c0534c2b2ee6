//! Short-time magnitude spectra over non-overlapping 512-sample windows.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::FeatureError;
use crate::audio::AudioSignal;

/// FFT window size in samples. Frames do not overlap.
pub const WINDOW_SIZE: usize = 512;
/// One-sided spectrum size: WINDOW_SIZE / 2 + 1.
pub const FFT_BINS: usize = WINDOW_SIZE / 2 + 1;

/// Magnitude spectrogram, frames x 257.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub magnitudes: Vec<f64>,
    pub frames: usize,
    pub bins: usize,
    pub sample_rate_hz: u32,
}

impl Spectrogram {
    pub fn new(frames: usize, bins: usize, sample_rate_hz: u32) -> Self {
        Self { magnitudes: vec![0.0; frames * bins], frames, bins, sample_rate_hz }
    }

    pub fn at(&self, frame: usize, bin: usize) -> f64 {
        self.magnitudes[frame * self.bins + bin]
    }

    pub fn frame(&self, frame: usize) -> &[f64] {
        &self.magnitudes[frame * self.bins..(frame + 1) * self.bins]
    }

    pub fn frame_mut(&mut self, frame: usize) -> &mut [f64] {
        &mut self.magnitudes[frame * self.bins..(frame + 1) * self.bins]
    }
}

/// Periodic Hann window: w[i] = 0.5 (1 - cos(2 pi i / N)).
fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()))
        .collect()
}

/// Magnitude STFT: frame t covers samples [512 t, 512 t + 512), a periodic
/// Hann window is applied, and the magnitude is the modulus of the
/// un-normalized one-sided DFT (257 bins). With that convention,
/// |X_0|^2 + |X_256|^2 + 2 sum_{k=1..255} |X_k|^2 = 512 * windowed-frame energy.
pub fn stft_magnitude(sig: &AudioSignal) -> Result<Spectrogram, FeatureError> {
    let n = sig.len();
    if n < WINDOW_SIZE {
        return Err(FeatureError::TooShort(n, WINDOW_SIZE));
    }
    let frames = n / WINDOW_SIZE;
    let window = hann_window(WINDOW_SIZE);
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(WINDOW_SIZE);

    let mut out = Spectrogram::new(frames, FFT_BINS, sig.sample_rate_hz);
    crate::parallel::for_each_chunk_mut(&mut out.magnitudes, FFT_BINS, |t, row| {
        let mut buf: Vec<Complex<f64>> = sig.samples[t * WINDOW_SIZE..(t + 1) * WINDOW_SIZE]
            .iter()
            .zip(&window)
            .map(|(&s, &w)| Complex::new(s * w, 0.0))
            .collect();
        fft.process(&mut buf);
        for (k, v) in row.iter_mut().enumerate() {
            *v = buf[k].norm();
        }
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// O(N^2) DFT oracle over the same windowed frames.
    pub(crate) fn naive_stft(samples: &[f64]) -> Vec<Vec<f64>> {
        let frames = samples.len() / WINDOW_SIZE;
        let w = hann_window(WINDOW_SIZE);
        (0..frames)
            .map(|t| {
                let frame: Vec<f64> = samples[t * WINDOW_SIZE..(t + 1) * WINDOW_SIZE]
                    .iter()
                    .zip(&w)
                    .map(|(&s, &wi)| s * wi)
                    .collect();
                (0..FFT_BINS)
                    .map(|k| {
                        let mut re = 0.0;
                        let mut im = 0.0;
                        for (n, &x) in frame.iter().enumerate() {
                            let ang = -2.0 * std::f64::consts::PI * (k * n) as f64
                                / WINDOW_SIZE as f64;
                            re += x * ang.cos();
                            im += x * ang.sin();
                        }
                        (re * re + im * im).sqrt()
                    })
                    .collect()
            })
            .collect()
    }

    fn rand_signal(len: usize, seed: u64) -> Vec<f64> {
        let mut state = seed;
        (0..len)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect()
    }

    #[test]
    fn frame_count_and_shape() {
        let sig = AudioSignal::new(vec![0.1; 1024], 16_000);
        let spec = stft_magnitude(&sig).unwrap();
        assert_eq!(spec.frames, 2);
        assert_eq!(spec.bins, 257);
    }

    #[test]
    fn too_short_rejected() {
        let sig = AudioSignal::new(vec![0.0; 511], 16_000);
        assert_eq!(stft_magnitude(&sig), Err(FeatureError::TooShort(511, 512)));
    }

    #[test]
    fn zero_signal_gives_zero_spectrogram() {
        let sig = AudioSignal::new(vec![0.0; 2048], 16_000);
        let spec = stft_magnitude(&sig).unwrap();
        assert!(spec.magnitudes.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn sine_peaks_at_expected_bin() {
        // 1000 Hz at fs 16000: bin = 1000 / (16000/512) = 32
        let fs = 16_000.0;
        let samples: Vec<f64> = (0..4096)
            .map(|i| (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / fs).sin())
            .collect();
        let spec = stft_magnitude(&AudioSignal::new(samples, 16_000)).unwrap();
        for t in 0..spec.frames {
            let row = spec.frame(t);
            let argmax = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(argmax, 32, "frame {t}");
        }
    }

    #[test]
    fn matches_naive_dft_oracle() {
        for seed in 0..5u64 {
            let samples = rand_signal(2048, seed + 1);
            let spec = stft_magnitude(&AudioSignal::new(samples.clone(), 16_000)).unwrap();
            let oracle = naive_stft(&samples);
            for t in 0..spec.frames {
                for k in 0..FFT_BINS {
                    let a = spec.at(t, k);
                    let b = oracle[t][k];
                    let rel = (a - b).abs() / b.abs().max(1e-9);
                    assert!(rel < 1e-6, "frame {t} bin {k}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn parseval_consistency() {
        let samples = rand_signal(1024, 99);
        let spec = stft_magnitude(&AudioSignal::new(samples.clone(), 16_000)).unwrap();
        let w = hann_window(WINDOW_SIZE);
        for t in 0..spec.frames {
            let energy: f64 = samples[t * WINDOW_SIZE..(t + 1) * WINDOW_SIZE]
                .iter()
                .zip(&w)
                .map(|(&s, &wi)| (s * wi) * (s * wi))
                .sum();
            let row = spec.frame(t);
            let spectral = row[0] * row[0]
                + row[256] * row[256]
                + 2.0 * row[1..256].iter().map(|m| m * m).sum::<f64>();
            let rel = (spectral - 512.0 * energy).abs() / (512.0 * energy);
            assert!(rel < 1e-6, "frame {t}: {spectral} vs {}", 512.0 * energy);
        }
    }
}
