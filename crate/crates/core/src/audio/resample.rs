//! Band-limited sample-rate conversion.
//!
//! Windowed-sinc interpolation: Kaiser window (beta 8.6) over a 64-tap
//! support, low-pass cutoff at 0.9 x Nyquist of the lower of the two rates.
//! Tap weights are normalized per output sample so a constant signal maps
//! to the same constant and DC is preserved exactly.

use super::{AudioError, AudioSignal};

const HALF_TAPS: isize = 32;
const KAISER_BETA: f64 = 8.6;

/// Zeroth-order modified Bessel function of the first kind, by power series.
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..=30 {
        term *= (half / m as f64) * (half / m as f64);
        sum += term;
        if term < 1e-16 * sum {
            break;
        }
    }
    sum
}

fn kaiser(r: f64) -> f64 {
    if r.abs() > 1.0 {
        return 0.0;
    }
    bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / bessel_i0(KAISER_BETA)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Resample to `target_hz`. Output length is round(len * target / source);
/// equal rates return the input bit-identically.
pub fn resample(sig: &AudioSignal, target_hz: u32) -> Result<AudioSignal, AudioError> {
    sig.validate()?;
    if target_hz == 0 {
        return Err(AudioError::InvalidRate(target_hz));
    }
    if sig.sample_rate_hz == target_hz {
        return Ok(sig.clone());
    }

    let src = &sig.samples;
    let n = src.len();
    let ratio = target_hz as f64 / sig.sample_rate_hz as f64;
    let out_len = ((n as f64) * ratio).round() as usize;
    // Cutoff in cycles per input sample: 0.45 when downsampling is not
    // involved, scaled down by the rate ratio otherwise.
    let fc = 0.45 * ratio.min(1.0);

    let mut out = Vec::with_capacity(out_len);
    for j in 0..out_len {
        let t = j as f64 / ratio;
        let k_lo = ((t - HALF_TAPS as f64).ceil() as isize).max(0);
        let k_hi = ((t + HALF_TAPS as f64).floor() as isize).min(n as isize - 1);
        let mut acc = 0.0;
        let mut gain = 0.0;
        for k in k_lo..=k_hi {
            let dx = k as f64 - t;
            let h = 2.0 * fc * sinc(2.0 * fc * dx) * kaiser(dx / HALF_TAPS as f64);
            acc += src[k as usize] * h;
            gain += h;
        }
        out.push(if gain.abs() > 1e-12 { acc / gain } else { 0.0 });
    }
    Ok(AudioSignal::new(out, target_hz))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Straightforward reimplementation of the windowed-sinc formula, kept
    /// independent of the production loop above.
    fn naive_resample(src: &[f64], src_hz: u32, dst_hz: u32) -> Vec<f64> {
        let ratio = dst_hz as f64 / src_hz as f64;
        let out_len = (src.len() as f64 * ratio).round() as usize;
        let fc = 0.45 * ratio.min(1.0);
        (0..out_len)
            .map(|j| {
                let t = j as f64 / ratio;
                let mut num = 0.0;
                let mut den = 0.0;
                for (k, &s) in src.iter().enumerate() {
                    let dx = k as f64 - t;
                    if dx.abs() > 32.0 {
                        continue;
                    }
                    let h = 2.0 * fc * sinc(2.0 * fc * dx) * kaiser(dx / 32.0);
                    num += s * h;
                    den += h;
                }
                if den.abs() > 1e-12 {
                    num / den
                } else {
                    0.0
                }
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
    fn identity_at_equal_rates() {
        let sig = AudioSignal::new(rand_signal(777, 3), 16_000);
        let out = resample(&sig, 16_000).unwrap();
        assert_eq!(out.samples, sig.samples);
        assert_eq!(out.sample_rate_hz, 16_000);
    }

    #[test]
    fn length_formula() {
        let sig = AudioSignal::new(vec![0.0; 4410], 44_100);
        let out = resample(&sig, 16_000).unwrap();
        assert_eq!(out.len(), 1600);
        assert_eq!(out.sample_rate_hz, 16_000);
    }

    #[test]
    fn constant_maps_to_constant() {
        let sig = AudioSignal::new(vec![0.5; 2000], 8_000);
        let out = resample(&sig, 16_000).unwrap();
        assert_eq!(out.len(), 4000);
        // interior samples, away from the boundary taps
        for &v in &out.samples[100..out.len() - 100] {
            assert!((v - 0.5).abs() < 1e-6, "got {v}");
        }
    }

    #[test]
    fn matches_naive_oracle() {
        for (seed, len, src_hz, dst_hz) in
            [(1u64, 500usize, 44_100u32, 16_000u32), (2, 300, 8_000, 16_000), (3, 441, 22_050, 16_000)]
        {
            let samples = rand_signal(len, seed);
            let out = resample(&AudioSignal::new(samples.clone(), src_hz), dst_hz).unwrap();
            let expect = naive_resample(&samples, src_hz, dst_hz);
            assert_eq!(out.len(), expect.len());
            for (a, b) in out.samples.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn resample_is_linear() {
        let x = rand_signal(400, 11);
        let y = rand_signal(400, 12);
        let (a, b) = (0.7, -1.3);
        let combo: Vec<f64> = x.iter().zip(&y).map(|(xi, yi)| a * xi + b * yi).collect();
        let rx = resample(&AudioSignal::new(x, 44_100), 16_000).unwrap();
        let ry = resample(&AudioSignal::new(y, 44_100), 16_000).unwrap();
        let rc = resample(&AudioSignal::new(combo, 44_100), 16_000).unwrap();
        for i in 0..rc.len() {
            let lin = a * rx.samples[i] + b * ry.samples[i];
            assert!((rc.samples[i] - lin).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(
            resample(&AudioSignal::new(vec![], 8_000), 16_000),
            Err(AudioError::EmptySignal)
        );
        assert_eq!(
            resample(&AudioSignal::new(vec![1.0, f64::INFINITY], 8_000), 16_000),
            Err(AudioError::InvalidSignal(1))
        );
        assert_eq!(
            resample(&AudioSignal::new(vec![1.0], 8_000), 0),
            Err(AudioError::InvalidRate(0))
        );
    }
}
