//! Target-domain manifest: a tab-separated text file, one row per
//! respiratory cycle.
//!
//! ```text
//! # crackle-manifest v1
//! # subject_id  condition  recording_id  wav_path  t_start  t_end  label
//! s01  healthy  s01_r0  audio/s01_r0.wav  0.000  4.125  normal
//! ```
//!
//! `wav_path` is resolved relative to the manifest's directory; `condition`
//! is healthy|ipf, `label` is normal|crackle.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::{read_wav, Condition, DataError, RecordingRef, SubjectRecord};
use crate::audio::{AudioSignal, ClassLabel, Domain, RespiratoryCycle, Split};

pub const MANIFEST_HEADER: &str = "# crackle-manifest v1";

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub subject_id: String,
    pub condition: Condition,
    pub recording_id: String,
    pub wav_path: PathBuf,
    pub t_start: f64,
    pub t_end: f64,
    pub label: ClassLabel,
}

pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<(), DataError> {
    let mut out = String::new();
    out.push_str(MANIFEST_HEADER);
    out.push('\n');
    out.push_str("# subject_id\tcondition\trecording_id\twav_path\tt_start\tt_end\tlabel\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{}\n",
            r.subject_id,
            r.condition.name(),
            r.recording_id,
            r.wav_path.display(),
            r.t_start,
            r.t_end,
            r.label.name()
        ));
    }
    std::fs::write(path, out)
        .map_err(|e| DataError::Io { path: path.display().to_string(), msg: e.to_string() })
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>, DataError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| DataError::Io { path: path.display().to_string(), msg: e.to_string() })?;
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').collect();
        if fields.len() != 7 {
            return Err(DataError::ParseError {
                line,
                msg: format!("expected 7 tab-separated fields, found {}", fields.len()),
            });
        }
        let condition = Condition::from_name(fields[1]).ok_or_else(|| DataError::ParseError {
            line,
            msg: format!("condition '{}'", fields[1]),
        })?;
        let label = ClassLabel::from_name(fields[6]).ok_or_else(|| DataError::ParseError {
            line,
            msg: format!("label '{}'", fields[6]),
        })?;
        let t_start: f64 = fields[4]
            .parse()
            .map_err(|_| DataError::ParseError { line, msg: format!("t_start '{}'", fields[4]) })?;
        let t_end: f64 = fields[5]
            .parse()
            .map_err(|_| DataError::ParseError { line, msg: format!("t_end '{}'", fields[5]) })?;
        if t_start < 0.0 || t_end <= t_start {
            return Err(DataError::AnnotationError(format!(
                "line {line}: bad interval [{t_start}, {t_end}]"
            )));
        }
        if !matches!(label, ClassLabel::Normal | ClassLabel::Crackle) {
            return Err(DataError::AnnotationError(format!(
                "line {line}: target-domain label must be normal or crackle"
            )));
        }
        rows.push(ManifestRow {
            subject_id: fields[0].to_string(),
            condition,
            recording_id: fields[2].to_string(),
            wav_path: PathBuf::from(fields[3]),
            t_start,
            t_end,
            label,
        });
    }
    if rows.is_empty() {
        return Err(DataError::ManifestError(format!("{}: no data rows", path.display())));
    }
    Ok(rows)
}

/// Read the manifest and load every cycle; wav files are read once each.
pub fn load_target_dataset(
    manifest_path: &Path,
) -> Result<(Vec<SubjectRecord>, Vec<RespiratoryCycle>), DataError> {
    let rows = read_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let mut audio_cache: BTreeMap<PathBuf, AudioSignal> = BTreeMap::new();
    let mut subjects: BTreeMap<String, SubjectRecord> = BTreeMap::new();
    let mut cycles = Vec::with_capacity(rows.len());
    let mut per_recording_index: BTreeMap<String, usize> = BTreeMap::new();

    for row in &rows {
        let full = if row.wav_path.is_absolute() {
            row.wav_path.clone()
        } else {
            base.join(&row.wav_path)
        };
        if !audio_cache.contains_key(&full) {
            audio_cache.insert(full.clone(), read_wav(&full)?);
        }
        let audio = &audio_cache[&full];
        let fs = audio.sample_rate_hz as f64;
        let start = ((row.t_start * fs).round() as usize).min(audio.samples.len());
        let end = ((row.t_end * fs).round() as usize).min(audio.samples.len());
        if end <= start {
            return Err(DataError::AnnotationError(format!(
                "{}: cycle [{}, {}] outside audio",
                row.recording_id, row.t_start, row.t_end
            )));
        }
        let idx_slot = per_recording_index.entry(row.recording_id.clone()).or_insert(0);
        let cycle_index = *idx_slot;
        *idx_slot += 1;

        cycles.push(RespiratoryCycle {
            signal: AudioSignal::new(audio.samples[start..end].to_vec(), audio.sample_rate_hz),
            label: row.label,
            subject_id: row.subject_id.clone(),
            recording_id: row.recording_id.clone(),
            cycle_index,
            domain: Domain::Target,
            split: Split::Unassigned,
            augment: None,
        });

        let entry = subjects.entry(row.subject_id.clone()).or_insert_with(|| SubjectRecord {
            subject_id: row.subject_id.clone(),
            condition: row.condition,
            recordings: Vec::new(),
        });
        if entry.condition != row.condition {
            return Err(DataError::ManifestError(format!(
                "subject {} listed with two conditions",
                row.subject_id
            )));
        }
        if !entry.recordings.iter().any(|r| r.recording_id == row.recording_id) {
            entry.recordings.push(RecordingRef {
                recording_id: row.recording_id.clone(),
                audio_path: full,
            });
        }
    }
    Ok((subjects.into_values().collect(), cycles))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::write_wav_16bit;

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![ManifestRow {
            subject_id: "s01".into(),
            condition: Condition::Healthy,
            recording_id: "s01_r0".into(),
            wav_path: PathBuf::from("s01_r0.wav"),
            t_start: 0.0,
            t_end: 1.5,
            label: ClassLabel::Normal,
        }];
        let path = dir.path().join("manifest.tsv");
        write_manifest(&path, &rows).unwrap();
        let back = read_manifest(&path).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn rejects_wheeze_labels_in_target_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tsv");
        std::fs::write(
            &path,
            "# crackle-manifest v1\ns\thealthy\tr\tw.wav\t0.0\t1.0\twheeze\n",
        )
        .unwrap();
        assert!(matches!(read_manifest(&path), Err(DataError::AnnotationError(_))));
    }

    #[test]
    fn loads_cycles_from_wavs() {
        let dir = tempfile::tempdir().unwrap();
        let wav = dir.path().join("rec.wav");
        let sig = AudioSignal::new(
            (0..32_000).map(|i| ((i % 100) as f64 / 100.0 - 0.5) * 0.5).collect(),
            16_000,
        );
        write_wav_16bit(&wav, &sig).unwrap();
        let rows = vec![
            ManifestRow {
                subject_id: "p01".into(),
                condition: Condition::Ipf,
                recording_id: "rec".into(),
                wav_path: PathBuf::from("rec.wav"),
                t_start: 0.0,
                t_end: 1.0,
                label: ClassLabel::Crackle,
            },
            ManifestRow {
                subject_id: "p01".into(),
                condition: Condition::Ipf,
                recording_id: "rec".into(),
                wav_path: PathBuf::from("rec.wav"),
                t_start: 1.0,
                t_end: 2.0,
                label: ClassLabel::Normal,
            },
        ];
        let mpath = dir.path().join("manifest.tsv");
        write_manifest(&mpath, &rows).unwrap();
        let (subjects, cycles) = load_target_dataset(&mpath).unwrap();
        assert_eq!(subjects.len(), 1);
        assert_eq!(cycles.len(), 2);
        assert_eq!(cycles[0].signal.len(), 16_000);
        assert_eq!(cycles[0].cycle_index, 0);
        assert_eq!(cycles[1].cycle_index, 1);
        assert_eq!(cycles[0].domain, Domain::Target);
    }
}
