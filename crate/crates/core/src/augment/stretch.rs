//! Phase-vocoder time stretching: duration changes, pitch stays.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::AugmentError;
use crate::audio::AudioSignal;

const FFT_SIZE: usize = 512;
const SYN_HOP: usize = FFT_SIZE / 4;
const MIN_LEN: usize = 1024;

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()))
        .collect()
}

fn wrap_phase(x: f64) -> f64 {
    use std::f64::consts::PI;
    x - 2.0 * PI * (x / (2.0 * PI)).round()
}

/// Stretch `sig` so the output lasts about 1/rate of the input duration
/// (rate 2.0 halves it). Classic phase vocoder: analysis hop = rate x
/// synthesis hop, per-bin instantaneous-frequency estimation, overlap-add
/// resynthesis normalized by the accumulated squared window.
pub fn time_stretch(sig: &AudioSignal, rate: f64) -> Result<AudioSignal, AugmentError> {
    if !(0.5..=2.0).contains(&rate) || !rate.is_finite() {
        return Err(AugmentError::InvalidRate(rate));
    }
    if sig.len() < MIN_LEN {
        return Err(AugmentError::TooShort(sig.len()));
    }

    let ana_hop = ((SYN_HOP as f64) * rate).round().max(1.0) as usize;
    let n_frames = (sig.len() - FFT_SIZE) / ana_hop + 1;
    let window = hann(FFT_SIZE);
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(FFT_SIZE);
    let ifft = planner.plan_fft_inverse(FFT_SIZE);

    let half = FFT_SIZE / 2; // 256; process one-sided, mirror for a real output
    let mut prev_phase = vec![0.0f64; half + 1];
    let mut synth_phase = vec![0.0f64; half + 1];
    let out_len = (n_frames - 1) * SYN_HOP + FFT_SIZE;
    let mut out = vec![0.0f64; out_len];
    let mut wsum = vec![0.0f64; out_len];

    let mut buf = vec![Complex::new(0.0, 0.0); FFT_SIZE];
    for t in 0..n_frames {
        let start = t * ana_hop;
        for i in 0..FFT_SIZE {
            buf[i] = Complex::new(sig.samples[start + i] * window[i], 0.0);
        }
        fft.process(&mut buf);

        let mut synth = vec![Complex::new(0.0, 0.0); FFT_SIZE];
        for k in 0..=half {
            let mag = buf[k].norm();
            let phase = buf[k].arg();
            if t == 0 {
                synth_phase[k] = phase;
            } else {
                let omega = 2.0 * std::f64::consts::PI * k as f64 / FFT_SIZE as f64;
                let delta = wrap_phase(phase - prev_phase[k] - omega * ana_hop as f64);
                let omega_true = omega + delta / ana_hop as f64;
                synth_phase[k] += omega_true * SYN_HOP as f64;
            }
            prev_phase[k] = phase;
            synth[k] = Complex::from_polar(mag, synth_phase[k]);
        }
        for k in 1..half {
            synth[FFT_SIZE - k] = synth[k].conj();
        }
        ifft.process(&mut synth);

        let pos = t * SYN_HOP;
        for i in 0..FFT_SIZE {
            let sample = synth[i].re / FFT_SIZE as f64;
            out[pos + i] += sample * window[i];
            wsum[pos + i] += window[i] * window[i];
        }
    }

    for (o, &w) in out.iter_mut().zip(&wsum) {
        if w > 1e-9 {
            *o /= w;
        }
    }
    Ok(AudioSignal::new(out, sig.sample_rate_hz))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, len: usize, fs: f64) -> AudioSignal {
        let samples = (0..len)
            .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / fs).sin())
            .collect();
        AudioSignal::new(samples, fs as u32)
    }

    /// Dominant frequency by DFT argmax over a 512-bin grid, independent of
    /// the stft module.
    fn dominant_hz(samples: &[f64], fs: f64) -> f64 {
        let n = 512.min(samples.len());
        let seg = &samples[samples.len() / 2 - n / 2..samples.len() / 2 + n / 2];
        let mut best = (0usize, -1.0f64);
        for k in 0..n / 2 {
            let mut re = 0.0;
            let mut im = 0.0;
            for (i, &x) in seg.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (k * i) as f64 / n as f64;
                re += x * ang.cos();
                im += x * ang.sin();
            }
            let mag = re * re + im * im;
            if mag > best.1 {
                best = (k, mag);
            }
        }
        best.0 as f64 * fs / n as f64
    }

    #[test]
    fn rejects_bad_arguments() {
        let sig = tone(440.0, 4096, 16_000.0);
        assert_eq!(time_stretch(&sig, 0.4), Err(AugmentError::InvalidRate(0.4)));
        assert_eq!(time_stretch(&sig, 2.5), Err(AugmentError::InvalidRate(2.5)));
        let short = tone(440.0, 1000, 16_000.0);
        assert_eq!(time_stretch(&short, 1.0), Err(AugmentError::TooShort(1000)));
    }

    #[test]
    fn identity_rate_preserves_signal() {
        let sig = tone(440.0, 8192, 16_000.0);
        let out = time_stretch(&sig, 1.0).unwrap();
        assert!(sig.len() - out.len() <= SYN_HOP * 4);
        let n = out.len().min(sig.len());
        let (xs, ys) = (&sig.samples[..n], &out.samples[..n]);
        let mx = xs.iter().sum::<f64>() / n as f64;
        let my = ys.iter().sum::<f64>() / n as f64;
        let mut num = 0.0;
        let mut dx = 0.0;
        let mut dy = 0.0;
        for i in 0..n {
            num += (xs[i] - mx) * (ys[i] - my);
            dx += (xs[i] - mx) * (xs[i] - mx);
            dy += (ys[i] - my) * (ys[i] - my);
        }
        let corr = num / (dx * dy).sqrt();
        assert!(corr > 0.99, "correlation {corr}");
    }

    #[test]
    fn duration_formula() {
        let sig = tone(300.0, 32_000, 16_000.0);
        let out = time_stretch(&sig, 2.0).unwrap();
        assert!((out.len() as i64 - 16_000).unsigned_abs() <= 512, "len {}", out.len());
    }

    #[test]
    fn pitch_preserved_when_slowing_down() {
        let fs = 16_000.0;
        let sig = tone(440.0, 16_384, fs);
        let out = time_stretch(&sig, 0.8).unwrap();
        let hz = dominant_hz(&out.samples, fs);
        assert!((hz - 440.0).abs() <= fs / 512.0, "dominant {hz} Hz");
    }

    #[test]
    fn round_trip_recovers_length() {
        let sig = tone(200.0, 20_000, 16_000.0);
        let fwd = time_stretch(&sig, 0.8).unwrap();
        let back = time_stretch(&fwd, 1.25).unwrap();
        assert!(
            (back.len() as i64 - sig.len() as i64).unsigned_abs() <= 2 * FFT_SIZE as u64,
            "{} vs {}",
            back.len(),
            sig.len()
        );
    }
}
