//! Fixed-length padding of cycles and phases.

use super::{AudioError, AudioSignal};

/// Extend `seg` to `target_len` by appending its own samples in
/// time-reversed alternation: the output is the first `target_len` samples
/// of the infinite sequence s, reverse(s), s, reverse(s), ... so the first
/// padding chunk starts with the last sample of s (the edge sample is
/// duplicated at the junction). Longer inputs keep their first `target_len`
/// samples.
pub fn sample_pad(seg: &AudioSignal, target_len: usize) -> Result<AudioSignal, AudioError> {
    if seg.is_empty() {
        return Err(AudioError::EmptySignal);
    }
    let s = &seg.samples;
    let n = s.len();
    let mut out = Vec::with_capacity(target_len);
    if n >= target_len {
        out.extend_from_slice(&s[..target_len]);
    } else {
        out.extend_from_slice(s);
        for i in n..target_len {
            let block = i / n;
            let pos = i % n;
            let v = if block % 2 == 1 { s[n - 1 - pos] } else { s[pos] };
            out.push(v);
        }
    }
    Ok(AudioSignal::new(out, seg.sample_rate_hz))
}

/// Extend shorter signals with zeros; truncate longer ones exactly like
/// [`sample_pad`]. The ablation baseline.
pub fn zero_pad(seg: &AudioSignal, target_len: usize) -> Result<AudioSignal, AudioError> {
    if seg.is_empty() {
        return Err(AudioError::EmptySignal);
    }
    let mut out = seg.samples.clone();
    out.resize(target_len.max(out.len()), 0.0);
    out.truncate(target_len);
    Ok(AudioSignal::new(out, seg.sample_rate_hz))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(samples: &[f64]) -> AudioSignal {
        AudioSignal::new(samples.to_vec(), 16_000)
    }

    #[test]
    fn sample_pad_stated_rule() {
        let out = sample_pad(&sig(&[1.0, 2.0, 3.0, 4.0, 5.0]), 8).unwrap();
        assert_eq!(out.samples, vec![1.0, 2.0, 3.0, 4.0, 5.0, 5.0, 4.0, 3.0]);
    }

    #[test]
    fn sample_pad_identity_when_exact() {
        let out = sample_pad(&sig(&[1.0, 2.0, 3.0]), 3).unwrap();
        assert_eq!(out.samples, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn sample_pad_unrolls_multiple_reflections() {
        // s, reverse(s), s, reverse(s), ... for s = [1, 2]
        let out = sample_pad(&sig(&[1.0, 2.0]), 7).unwrap();
        assert_eq!(out.samples, vec![1.0, 2.0, 2.0, 1.0, 1.0, 2.0, 2.0]);
    }

    #[test]
    fn sample_pad_truncates_long_input() {
        let out = sample_pad(&sig(&[1.0, 2.0, 3.0, 4.0]), 2).unwrap();
        assert_eq!(out.samples, vec![1.0, 2.0]);
    }

    #[test]
    fn sample_pad_junction_duplicates_edge() {
        let out = sample_pad(&sig(&[0.5, -0.25, 0.75]), 9).unwrap();
        assert_eq!(out.samples[2], out.samples[3]);
    }

    #[test]
    fn empty_input_rejected() {
        assert_eq!(sample_pad(&sig(&[]), 4), Err(AudioError::EmptySignal));
        assert_eq!(zero_pad(&sig(&[]), 4), Err(AudioError::EmptySignal));
    }

    #[test]
    fn zero_pad_rules() {
        assert_eq!(
            zero_pad(&sig(&[1.0, 2.0, 3.0]), 5).unwrap().samples,
            vec![1.0, 2.0, 3.0, 0.0, 0.0]
        );
        assert_eq!(
            zero_pad(&sig(&[1.0, 2.0, 3.0]), 3).unwrap().samples,
            vec![1.0, 2.0, 3.0]
        );
        assert_eq!(
            zero_pad(&sig(&[1.0, 2.0, 3.0, 4.0]), 2).unwrap().samples,
            vec![1.0, 2.0]
        );
    }
}
