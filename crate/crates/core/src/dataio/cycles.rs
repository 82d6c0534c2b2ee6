//! Slicing annotated respiratory cycles out of a recording.

use super::icbhi::IcbhiAnnotationRow;
use crate::audio::{AudioSignal, Domain, RespiratoryCycle, Split};

/// Slice [round(t_start fs), round(t_end fs)) per row. Rows running past
/// the end of the audio are clipped; zero-length slices are skipped.
/// Returns (cycles, clipped count, skipped count).
pub fn extract_cycles(
    audio: &AudioSignal,
    rows: &[IcbhiAnnotationRow],
    subject_id: &str,
    recording_id: &str,
    domain: Domain,
) -> (Vec<RespiratoryCycle>, usize, usize) {
    let fs = audio.sample_rate_hz as f64;
    let len = audio.samples.len();
    let mut cycles = Vec::with_capacity(rows.len());
    let mut clipped = 0usize;
    let mut skipped = 0usize;
    for (i, row) in rows.iter().enumerate() {
        let start = ((row.t_start * fs).round() as usize).min(len);
        let mut end = (row.t_end * fs).round() as usize;
        if end > len {
            end = len;
            clipped += 1;
        }
        if end <= start {
            skipped += 1;
            continue;
        }
        cycles.push(RespiratoryCycle {
            signal: AudioSignal::new(audio.samples[start..end].to_vec(), audio.sample_rate_hz),
            label: row.label(),
            subject_id: subject_id.to_string(),
            recording_id: recording_id.to_string(),
            cycle_index: i,
            domain,
            split: Split::Unassigned,
            augment: None,
        });
    }
    (cycles, clipped, skipped)
}
