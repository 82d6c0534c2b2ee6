//! Vocal tract length perturbation on the linear-frequency magnitude
//! spectrogram, before the mel projection.

use super::AugmentError;
use crate::features::Spectrogram;

pub const VTLP_ALPHA_MIN: f64 = 0.9;
pub const VTLP_ALPHA_MAX: f64 = 1.1;

/// Boundary frequency as a fraction of Nyquist (4800 Hz at 16 kHz).
const F_HI_FRACTION: f64 = 0.6;

/// Piecewise-linear frequency warp: f' = alpha f up to the boundary
/// f0 = F_hi min(alpha,1)/alpha, then linear so Nyquist maps to Nyquist.
fn warp(f: f64, alpha: f64, nyquist: f64) -> f64 {
    let f_hi = F_HI_FRACTION * nyquist;
    let knee = f_hi * alpha.min(1.0) / alpha;
    if f <= knee {
        alpha * f
    } else {
        nyquist - (nyquist - f_hi * alpha.min(1.0)) * (nyquist - f) / (nyquist - knee)
    }
}

/// Warp the 257-bin frequency axis: each input bin's magnitude is scattered
/// onto the two output bins bracketing its warped frequency with linear
/// interpolation weights, so total spectral mass is preserved. alpha = 1 is
/// the exact identity.
pub fn vtlp(spec: &Spectrogram, alpha: f64) -> Result<Spectrogram, AugmentError> {
    if !(VTLP_ALPHA_MIN..=VTLP_ALPHA_MAX).contains(&alpha) || !alpha.is_finite() {
        return Err(AugmentError::InvalidAlpha(alpha));
    }
    let nyquist = spec.sample_rate_hz as f64 / 2.0;
    let bins = spec.bins;
    // bin k sits at k * fs / 512; position of the warped bin on the same grid
    let positions: Vec<f64> = (0..bins)
        .map(|k| {
            let f = k as f64 * nyquist / (bins - 1) as f64;
            warp(f, alpha, nyquist) * (bins - 1) as f64 / nyquist
        })
        .collect();

    let mut out = Spectrogram::new(spec.frames, bins, spec.sample_rate_hz);
    crate::parallel::for_each_chunk_mut(&mut out.magnitudes, bins, |t, row| {
        let src = spec.frame(t);
        for k in 0..bins {
            let pos = positions[k].clamp(0.0, (bins - 1) as f64);
            let i0 = pos.floor() as usize;
            let frac = pos - i0 as f64;
            row[i0] += src[k] * (1.0 - frac);
            if frac > 0.0 {
                row[(i0 + 1).min(bins - 1)] += src[k] * frac;
            }
        }
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn impulse_at(bin: usize) -> Spectrogram {
        let mut s = Spectrogram::new(1, 257, 16_000);
        s.magnitudes[bin] = 1.0;
        s
    }

    #[test]
    fn alpha_out_of_range_rejected() {
        let s = impulse_at(10);
        assert_eq!(vtlp(&s, 0.8), Err(AugmentError::InvalidAlpha(0.8)));
        assert_eq!(vtlp(&s, 1.2), Err(AugmentError::InvalidAlpha(1.2)));
    }

    #[test]
    fn alpha_one_is_identity() {
        let mut s = Spectrogram::new(3, 257, 16_000);
        for (i, v) in s.magnitudes.iter_mut().enumerate() {
            *v = (i % 13) as f64 * 0.25;
        }
        let out = vtlp(&s, 1.0).unwrap();
        for (a, b) in out.magnitudes.iter().zip(&s.magnitudes) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn tone_moves_to_the_warped_bin() {
        // bin 32 = 1000 Hz, alpha 1.1 -> 1100 Hz = bin 35.2 -> argmax 35
        let out = vtlp(&impulse_at(32), 1.1).unwrap();
        let argmax = out
            .frame(0)
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, 35);
    }

    #[test]
    fn mass_preserved_and_nonnegative() {
        let mut state = 42u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut s = Spectrogram::new(4, 257, 16_000);
        for v in s.magnitudes.iter_mut() {
            *v = next();
        }
        for alpha in [0.9, 0.95, 1.05, 1.1] {
            let out = vtlp(&s, alpha).unwrap();
            assert!(out.magnitudes.iter().all(|&m| m >= 0.0));
            let before: f64 = s.magnitudes.iter().sum();
            let after: f64 = out.magnitudes.iter().sum();
            assert!((after - before).abs() / before < 0.01, "alpha {alpha}: {before} vs {after}");
        }
    }

    #[test]
    fn nyquist_stays_put() {
        let out = vtlp(&impulse_at(256), 0.9).unwrap();
        let argmax = out
            .frame(0)
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, 256);
    }
}
