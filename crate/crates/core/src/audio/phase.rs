//! Splitting respiratory cycles into inspiration and expiration by a fixed
//! length ratio, and the fixed target lengths the ratio induces.

use super::{AudioError, AudioSignal, PhaseRatio, FIXED_CYCLE_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseKind {
    FullCycle,
    Inspiration,
    Expiration,
}

/// A full cycle or one of its phases, tagged with where it came from.
#[derive(Debug, Clone)]
pub struct PhaseSegment {
    pub signal: AudioSignal,
    pub kind: PhaseKind,
    pub recording_id: String,
    pub cycle_index: usize,
}

impl PhaseSegment {
    pub fn full_cycle(signal: AudioSignal, recording_id: impl Into<String>, cycle_index: usize) -> Self {
        Self {
            signal,
            kind: PhaseKind::FullCycle,
            recording_id: recording_id.into(),
            cycle_index,
        }
    }
}

/// Fixed padded lengths for the cycle and both phases at a given ratio,
/// all in samples at 16 kHz.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedLengths {
    pub cycle_len: usize,
    pub insp_len: usize,
    pub exp_len: usize,
}

/// Padded target lengths induced by `ratio`: the inspiration gets
/// round-half-up(131960 * insp/cycle) samples and the expiration the rest.
pub fn fixed_lengths_for(ratio: PhaseRatio) -> FixedLengths {
    let insp_len = ratio.insp_len(FIXED_CYCLE_LEN);
    FixedLengths {
        cycle_len: FIXED_CYCLE_LEN,
        insp_len,
        exp_len: FIXED_CYCLE_LEN - insp_len,
    }
}

/// Split a full cycle at the ratio: the inspiration is the first
/// round-half-up(L * insp/cycle) samples, the expiration the remainder.
/// Concatenating the two reproduces the cycle exactly.
pub fn split_phases(
    cycle: &PhaseSegment,
    ratio: PhaseRatio,
) -> Result<(PhaseSegment, PhaseSegment), AudioError> {
    if cycle.signal.len() < 2 {
        return Err(AudioError::TooShort(cycle.signal.len()));
    }
    let len = cycle.signal.len();
    let cut = ratio.insp_len(len).min(len - 1).max(1);
    let rate = cycle.signal.sample_rate_hz;
    let insp = PhaseSegment {
        signal: AudioSignal::new(cycle.signal.samples[..cut].to_vec(), rate),
        kind: PhaseKind::Inspiration,
        recording_id: cycle.recording_id.clone(),
        cycle_index: cycle.cycle_index,
    };
    let exp = PhaseSegment {
        signal: AudioSignal::new(cycle.signal.samples[cut..].to_vec(), rate),
        kind: PhaseKind::Expiration,
        recording_id: cycle.recording_id.clone(),
        cycle_index: cycle.cycle_index,
    };
    Ok((insp, exp))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle(samples: Vec<f64>) -> PhaseSegment {
        PhaseSegment::full_cycle(AudioSignal::new(samples, 16_000), "rec", 0)
    }

    #[test]
    fn exact_division() {
        let c = cycle((0..3000).map(|i| i as f64).collect());
        let (insp, exp) = split_phases(&c, PhaseRatio::new(1, 3).unwrap()).unwrap();
        assert_eq!(insp.signal.len(), 1000);
        assert_eq!(exp.signal.len(), 2000);
        assert_eq!(insp.kind, PhaseKind::Inspiration);
        assert_eq!(exp.kind, PhaseKind::Expiration);
    }

    #[test]
    fn round_half_up_split() {
        let c = cycle(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let (insp, exp) = split_phases(&c, PhaseRatio::new(1, 2).unwrap()).unwrap();
        assert_eq!(insp.signal.samples, vec![1.0, 2.0, 3.0]);
        assert_eq!(exp.signal.samples, vec![4.0, 5.0]);
    }

    #[test]
    fn too_short_rejected() {
        let c = cycle(vec![1.0]);
        assert!(matches!(
            split_phases(&c, PhaseRatio::new(1, 2).unwrap()),
            Err(AudioError::TooShort(1))
        ));
    }

    #[test]
    fn split_concat_is_identity_for_all_ratios() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for len in [2usize, 3, 7, 100, 999, 4096] {
            let samples: Vec<f64> = (0..len).map(|_| next()).collect();
            for ratio in PhaseRatio::ALL {
                let c = cycle(samples.clone());
                let (insp, exp) = split_phases(&c, ratio).unwrap();
                let mut glued = insp.signal.samples.clone();
                glued.extend_from_slice(&exp.signal.samples);
                assert_eq!(glued, samples, "ratio {:?} len {}", ratio, len);
                assert!(!insp.signal.is_empty() && !exp.signal.is_empty());
            }
        }
    }

    #[test]
    fn fixed_lengths_match_formula() {
        let r12 = fixed_lengths_for(PhaseRatio::new(1, 2).unwrap());
        assert_eq!((r12.insp_len, r12.exp_len), (65_980, 65_980));
        // round_half_up(131960/3) = round_half_up(43986.67) = 43987
        let r13 = fixed_lengths_for(PhaseRatio::new(1, 3).unwrap());
        assert_eq!((r13.insp_len, r13.exp_len), (43_987, 87_973));
        let r25 = fixed_lengths_for(PhaseRatio::new(2, 5).unwrap());
        assert_eq!((r25.insp_len, r25.exp_len), (52_784, 79_176));
    }

    #[test]
    fn fixed_lengths_partition_cycle_for_every_ratio() {
        for ratio in PhaseRatio::ALL {
            let fl = fixed_lengths_for(ratio);
            assert_eq!(fl.insp_len + fl.exp_len, 131_960, "{:?}", ratio);
            assert_eq!(fl.cycle_len, 131_960);
        }
    }
}
