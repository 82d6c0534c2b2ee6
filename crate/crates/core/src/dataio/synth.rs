//! Synthetic desk-scale lung-sound data: band-limited breath noise shaped
//! by a respiratory envelope, with damped-sinusoid crackle transients in
//! the mid-to-late inspiratory region for crackle cycles and tonal wheezes
//! for the source-domain classes.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    manifest::{write_manifest, ManifestRow},
    wav::write_wav_16bit,
    Condition, DataError, RecordingRef, SubjectRecord,
};
use crate::audio::{AudioSignal, ClassLabel, Domain, RespiratoryCycle, Split, TARGET_RATE_HZ};
use crate::seeds::derive_seed;

#[derive(Debug, Clone, Copy)]
pub struct SynthSpec {
    pub n_normal_subjects: usize,
    pub n_crackle_subjects: usize,
    pub cycles_per_subject: usize,
    pub seed: u64,
}

const FS: f64 = TARGET_RATE_HZ as f64;
/// Fraction of the cycle taken by inspiration in the generated envelope.
const INSP_FRACTION: f64 = 0.4;

fn one_pole_lowpass(x: &mut [f64], cutoff_hz: f64) {
    let a = (-2.0 * std::f64::consts::PI * cutoff_hz / FS).exp();
    let mut state = 0.0;
    for v in x.iter_mut() {
        state = (1.0 - a) * *v + a * state;
        *v = state;
    }
}

fn breath_envelope(len: usize) -> Vec<f64> {
    let insp_len = (len as f64 * INSP_FRACTION) as usize;
    (0..len)
        .map(|i| {
            let (phase, scale) = if i < insp_len {
                (i as f64 / insp_len as f64, 1.0)
            } else {
                ((i - insp_len) as f64 / (len - insp_len) as f64, 0.7)
            };
            // raised-cosine hump per phase, with a small floor
            scale * (0.15 + 0.85 * (std::f64::consts::PI * phase).sin().powi(2))
        })
        .collect()
}

fn breath_noise(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut noise: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    // two cascaded poles, about 12 dB/oct above 250 Hz
    one_pole_lowpass(&mut noise, 250.0);
    one_pole_lowpass(&mut noise, 250.0);
    let peak = noise.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-9);
    let envelope = breath_envelope(len);
    noise
        .iter()
        .zip(&envelope)
        .map(|(n, e)| 0.35 * n / peak * e)
        .collect()
}

fn add_crackles(samples: &mut [f64], rng: &mut ChaCha8Rng) {
    let insp_len = (samples.len() as f64 * INSP_FRACTION) as usize;
    let n_crackles = rng.gen_range(5..=20);
    for _ in 0..n_crackles {
        // mid-to-late inspiration
        let onset = rng.gen_range((0.45 * insp_len as f64) as usize..(0.95 * insp_len as f64) as usize);
        let dur = rng.gen_range((0.005 * FS) as usize..=(0.015 * FS) as usize);
        let freq = rng.gen_range(100.0..2000.0);
        let amp = rng.gen_range(0.25..0.55);
        for t in 0..dur.min(samples.len().saturating_sub(onset)) {
            let ts = t as f64 / FS;
            let decay = (-3.0 * t as f64 / dur as f64).exp();
            samples[onset + t] += amp * decay * (2.0 * std::f64::consts::PI * freq * ts).sin();
        }
    }
}

fn add_wheeze(samples: &mut [f64], rng: &mut ChaCha8Rng) {
    let freq = rng.gen_range(150.0..900.0);
    let vibrato = rng.gen_range(2.0..6.0);
    let envelope = breath_envelope(samples.len());
    for (i, v) in samples.iter_mut().enumerate() {
        let ts = i as f64 / FS;
        let f = freq * (1.0 + 0.02 * (2.0 * std::f64::consts::PI * vibrato * ts).sin());
        *v += 0.3 * envelope[i] * (2.0 * std::f64::consts::PI * f * ts).sin();
    }
}

fn synth_cycle(label: ClassLabel, seed: u64) -> AudioSignal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dur_s = rng.gen_range(3.0..7.0);
    let len = (dur_s * FS) as usize;
    let mut samples = breath_noise(len, &mut rng);
    match label {
        ClassLabel::Normal => {}
        ClassLabel::Crackle => add_crackles(&mut samples, &mut rng),
        ClassLabel::Wheeze => add_wheeze(&mut samples, &mut rng),
        ClassLabel::Both => {
            add_wheeze(&mut samples, &mut rng);
            add_crackles(&mut samples, &mut rng);
        }
    }
    for v in samples.iter_mut() {
        *v = v.clamp(-1.0, 1.0);
    }
    AudioSignal::new(samples, TARGET_RATE_HZ)
}

fn make_subject(
    subject_id: &str,
    condition: Condition,
    label: ClassLabel,
    domain: Domain,
    cycles_per_subject: usize,
    seed: u64,
) -> (SubjectRecord, Vec<RespiratoryCycle>) {
    let recording_id = format!("{subject_id}_r0");
    let cycles = (0..cycles_per_subject)
        .map(|i| RespiratoryCycle {
            signal: synth_cycle(label, derive_seed(seed, &recording_id, i, label.index() as u64)),
            label,
            subject_id: subject_id.to_string(),
            recording_id: recording_id.clone(),
            cycle_index: i,
            domain,
            split: Split::Unassigned,
            augment: None,
        })
        .collect();
    let record = SubjectRecord {
        subject_id: subject_id.to_string(),
        condition,
        recordings: vec![RecordingRef { recording_id, audio_path: PathBuf::new() }],
    };
    (record, cycles)
}

/// In-memory target-domain stand-in: healthy subjects with normal cycles,
/// IPF subjects with crackle cycles. Deterministic per seed.
pub fn synth_target_dataset(spec: &SynthSpec) -> (Vec<SubjectRecord>, Vec<RespiratoryCycle>) {
    let mut subjects = Vec::new();
    let mut cycles = Vec::new();
    for i in 0..spec.n_normal_subjects {
        let (s, c) = make_subject(
            &format!("h{i:02}"),
            Condition::Healthy,
            ClassLabel::Normal,
            Domain::Target,
            spec.cycles_per_subject,
            spec.seed,
        );
        subjects.push(s);
        cycles.extend(c);
    }
    for i in 0..spec.n_crackle_subjects {
        let (s, c) = make_subject(
            &format!("p{i:02}"),
            Condition::Ipf,
            ClassLabel::Crackle,
            Domain::Target,
            spec.cycles_per_subject,
            spec.seed,
        );
        subjects.push(s);
        cycles.extend(c);
    }
    (subjects, cycles)
}

/// 4-class source-domain stand-in, one class per subject.
pub fn synth_source_dataset(
    subjects_per_class: usize,
    cycles_per_subject: usize,
    seed: u64,
) -> Vec<RespiratoryCycle> {
    let classes = [
        (ClassLabel::Normal, "srcN"),
        (ClassLabel::Crackle, "srcC"),
        (ClassLabel::Wheeze, "srcW"),
        (ClassLabel::Both, "srcB"),
    ];
    let mut cycles = Vec::new();
    for (label, prefix) in classes {
        for i in 0..subjects_per_class {
            let (_, c) = make_subject(
                &format!("{prefix}{i:02}"),
                Condition::SourceSubject,
                label,
                Domain::Source,
                cycles_per_subject,
                seed,
            );
            cycles.extend(c);
        }
    }
    cycles
}

/// Write a synthetic target dataset to disk: one wav per subject
/// (cycles concatenated) plus the manifest. Returns the manifest path.
pub fn write_synth_target_to_dir(dir: &Path, spec: &SynthSpec) -> Result<PathBuf, DataError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| DataError::Io { path: dir.display().to_string(), msg: e.to_string() })?;
    let (subjects, cycles) = synth_target_dataset(spec);
    let mut rows = Vec::new();
    for subject in &subjects {
        let recording_id = &subject.recordings[0].recording_id;
        let mine: Vec<&RespiratoryCycle> = cycles
            .iter()
            .filter(|c| c.subject_id == subject.subject_id)
            .collect();
        let mut joined = Vec::new();
        let mut t = 0.0f64;
        let wav_name = format!("{recording_id}.wav");
        for c in &mine {
            let dur = c.signal.len() as f64 / FS;
            rows.push(ManifestRow {
                subject_id: subject.subject_id.clone(),
                condition: subject.condition,
                recording_id: recording_id.clone(),
                wav_path: PathBuf::from(&wav_name),
                t_start: t,
                t_end: t + dur,
                label: c.label,
            });
            joined.extend_from_slice(&c.signal.samples);
            t += dur;
        }
        write_wav_16bit(&dir.join(&wav_name), &AudioSignal::new(joined, TARGET_RATE_HZ))?;
    }
    let manifest = dir.join("manifest.tsv");
    write_manifest(&manifest, &rows)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::stft_magnitude;

    #[test]
    fn counts_and_determinism() {
        let spec = SynthSpec {
            n_normal_subjects: 4,
            n_crackle_subjects: 4,
            cycles_per_subject: 10,
            seed: 7,
        };
        let (subjects, cycles) = synth_target_dataset(&spec);
        assert_eq!(subjects.len(), 8);
        assert_eq!(cycles.len(), 80);
        assert_eq!(cycles.iter().filter(|c| c.label == ClassLabel::Normal).count(), 40);
        assert_eq!(cycles.iter().filter(|c| c.label == ClassLabel::Crackle).count(), 40);

        let (_, again) = synth_target_dataset(&spec);
        for (a, b) in cycles.iter().zip(&again) {
            assert_eq!(a.signal.samples, b.signal.samples);
        }
    }

    /// Band energy above 500 Hz from the 512-bin magnitude STFT
    /// (bin 16 = 500 Hz at 16 kHz).
    fn hf_energy(samples: &[f64]) -> f64 {
        if samples.len() < 512 {
            return 0.0;
        }
        let spec = stft_magnitude(&AudioSignal::new(samples.to_vec(), TARGET_RATE_HZ)).unwrap();
        let mut energy = 0.0;
        for t in 0..spec.frames {
            for k in 16..spec.bins {
                let m = spec.at(t, k);
                energy += m * m;
            }
        }
        energy
    }

    #[test]
    fn crackle_cycles_have_inspiratory_high_frequency_energy() {
        let spec = SynthSpec {
            n_normal_subjects: 0,
            n_crackle_subjects: 10,
            cycles_per_subject: 10,
            seed: 3,
        };
        let (_, cycles) = synth_target_dataset(&spec);
        let mut hits = 0usize;
        for c in &cycles {
            let insp_len = (c.signal.len() as f64 * INSP_FRACTION) as usize;
            let insp_hf = hf_energy(&c.signal.samples[..insp_len]);
            let exp_hf = hf_energy(&c.signal.samples[insp_len..]);
            if insp_hf > exp_hf {
                hits += 1;
            }
        }
        assert!(
            hits as f64 >= 0.95 * cycles.len() as f64,
            "{hits}/{} crackle cycles with inspiratory HF dominance",
            cycles.len()
        );
    }

    #[test]
    fn source_dataset_covers_four_classes() {
        let cycles = synth_source_dataset(2, 3, 5);
        assert_eq!(cycles.len(), 4 * 2 * 3);
        for label in [ClassLabel::Normal, ClassLabel::Crackle, ClassLabel::Wheeze, ClassLabel::Both] {
            assert_eq!(cycles.iter().filter(|c| c.label == label).count(), 6);
        }
    }

    #[test]
    fn disk_round_trip_preserves_counts() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec {
            n_normal_subjects: 2,
            n_crackle_subjects: 1,
            cycles_per_subject: 3,
            seed: 11,
        };
        let manifest = write_synth_target_to_dir(dir.path(), &spec).unwrap();
        let (subjects, cycles) = crate::dataio::load_target_dataset(&manifest).unwrap();
        assert_eq!(subjects.len(), 3);
        assert_eq!(cycles.len(), 9);
        assert_eq!(
            cycles.iter().filter(|c| c.label == ClassLabel::Crackle).count(),
            3
        );
    }
}
