//! ICBHI 2017 annotation files: one row per respiratory cycle with four
//! whitespace-separated columns (t_start, t_end, crackles, wheezes).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::{cycles::extract_cycles, wav::read_wav, Condition, DataError, RecordingRef, SubjectRecord};
use crate::audio::{ClassLabel, Domain, RespiratoryCycle};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcbhiAnnotationRow {
    pub t_start: f64,
    pub t_end: f64,
    pub has_crackle: bool,
    pub has_wheeze: bool,
}

impl IcbhiAnnotationRow {
    pub fn label(&self) -> ClassLabel {
        match (self.has_crackle, self.has_wheeze) {
            (false, false) => ClassLabel::Normal,
            (true, false) => ClassLabel::Crackle,
            (false, true) => ClassLabel::Wheeze,
            (true, true) => ClassLabel::Both,
        }
    }
}

fn parse_flag(field: &str, line: usize) -> Result<bool, DataError> {
    match field.parse::<f64>() {
        Ok(v) if v == 0.0 => Ok(false),
        Ok(v) if v == 1.0 => Ok(true),
        _ => Err(DataError::ParseError { line, msg: format!("flag field '{field}'") }),
    }
}

/// Parse one annotation file. Rows come back in file order; reversed or
/// overlapping cycle times are rejected.
pub fn parse_icbhi_annotation(text: &str) -> Result<Vec<IcbhiAnnotationRow>, DataError> {
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(DataError::ParseError {
                line,
                msg: format!("expected 4 columns, found {}", fields.len()),
            });
        }
        let t_start: f64 = fields[0]
            .parse()
            .map_err(|_| DataError::ParseError { line, msg: format!("t_start '{}'", fields[0]) })?;
        let t_end: f64 = fields[1]
            .parse()
            .map_err(|_| DataError::ParseError { line, msg: format!("t_end '{}'", fields[1]) })?;
        let has_crackle = parse_flag(fields[2], line)?;
        let has_wheeze = parse_flag(fields[3], line)?;
        if t_start < 0.0 || t_end <= t_start {
            return Err(DataError::AnnotationError(format!(
                "line {line}: reversed or empty interval [{t_start}, {t_end}]"
            )));
        }
        if let Some(prev) = rows.last() {
            let prev: &IcbhiAnnotationRow = prev;
            if t_start < prev.t_end - 1e-6 {
                return Err(DataError::AnnotationError(format!(
                    "line {line}: cycle starting at {t_start} overlaps previous ending at {}",
                    prev.t_end
                )));
            }
        }
        rows.push(IcbhiAnnotationRow { t_start, t_end, has_crackle, has_wheeze });
    }
    Ok(rows)
}

/// ICBHI filenames carry the patient id as the token before the first
/// underscore ("101_1b1_Al_sc_Meditron.txt" -> "101").
pub fn subject_id_from_filename(name: &str) -> Option<String> {
    let stem = name.rsplit('/').next()?;
    let token = stem.split('_').next()?;
    if token.is_empty() {
        None
    } else {
        Some(token.to_string())
    }
}

/// Find all annotation files in an ICBHI-layout directory, keyed by
/// recording id, grouped per subject.
pub fn scan_icbhi_annotations(dir: &Path) -> Result<Vec<SubjectRecord>, DataError> {
    let mut by_subject: BTreeMap<String, Vec<RecordingRef>> = BTreeMap::new();
    let entries = std::fs::read_dir(dir)
        .map_err(|e| DataError::Io { path: dir.display().to_string(), msg: e.to_string() })?;
    let mut txts: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|x| x == "txt").unwrap_or(false))
        .collect();
    txts.sort();
    for txt in txts {
        let stem = txt.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let Some(subject) = subject_id_from_filename(&stem) else {
            continue;
        };
        by_subject
            .entry(subject)
            .or_default()
            .push(RecordingRef { recording_id: stem, audio_path: txt.with_extension("wav") });
    }
    Ok(by_subject
        .into_iter()
        .map(|(subject_id, recordings)| SubjectRecord {
            subject_id,
            condition: Condition::SourceSubject,
            recordings,
        })
        .collect())
}

/// Load the full source-domain dataset: every annotated cycle of every
/// recording, resolved against the sibling .wav files.
pub fn load_icbhi_dataset(dir: &Path) -> Result<Vec<RespiratoryCycle>, DataError> {
    let subjects = scan_icbhi_annotations(dir)?;
    let mut out = Vec::new();
    for subject in &subjects {
        for rec in &subject.recordings {
            let txt_path = rec.audio_path.with_extension("txt");
            let text = std::fs::read_to_string(&txt_path).map_err(|e| DataError::Io {
                path: txt_path.display().to_string(),
                msg: e.to_string(),
            })?;
            let rows = parse_icbhi_annotation(&text)?;
            let audio = read_wav(&rec.audio_path)?;
            let (cycles, _clipped, _skipped) = extract_cycles(
                &audio,
                &rows,
                &subject.subject_id,
                &rec.recording_id,
                Domain::Source,
            );
            out.extend(cycles);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_documented_rows() {
        let rows = parse_icbhi_annotation("0.364\t2.436\t0\t0\n").unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].t_start, 0.364);
        assert_eq!(rows[0].t_end, 2.436);
        assert_eq!(rows[0].label(), ClassLabel::Normal);

        let rows = parse_icbhi_annotation("1.0\t3.5\t1\t1").unwrap();
        assert_eq!(rows[0].label(), ClassLabel::Both);
    }

    #[test]
    fn label_mapping() {
        let mk = |c, w| IcbhiAnnotationRow { t_start: 0.0, t_end: 1.0, has_crackle: c, has_wheeze: w };
        assert_eq!(mk(false, false).label(), ClassLabel::Normal);
        assert_eq!(mk(true, false).label(), ClassLabel::Crackle);
        assert_eq!(mk(false, true).label(), ClassLabel::Wheeze);
        assert_eq!(mk(true, true).label(), ClassLabel::Both);
    }

    #[test]
    fn malformed_lines_carry_line_numbers() {
        let err = parse_icbhi_annotation("0.0\t1.0\t0\t0\nbogus line\n").unwrap_err();
        match err {
            DataError::ParseError { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reversed_and_overlapping_times_rejected() {
        assert!(matches!(
            parse_icbhi_annotation("2.0\t1.0\t0\t0"),
            Err(DataError::AnnotationError(_))
        ));
        assert!(matches!(
            parse_icbhi_annotation("0.0\t2.0\t0\t0\n1.5\t3.0\t0\t0"),
            Err(DataError::AnnotationError(_))
        ));
        // touching intervals are fine
        assert!(parse_icbhi_annotation("0.0\t2.0\t0\t0\n2.0\t3.0\t1\t0").is_ok());
    }

    #[test]
    fn subject_ids_from_filenames() {
        assert_eq!(subject_id_from_filename("101_1b1_Al_sc_Meditron"), Some("101".into()));
        assert_eq!(subject_id_from_filename("226_1b1_Pl_sc_LittC2SE.txt"), Some("226".into()));
        assert_eq!(subject_id_from_filename(""), None);
    }
}
