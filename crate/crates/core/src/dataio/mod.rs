//! Dataset ingestion: ICBHI-format parsing, WAV loading, the target-domain
//! manifest, subject-wise fold construction, and synthetic desk-scale data.

mod cycles;
mod folds;
mod icbhi;
mod manifest;
mod synth;
mod wav;

pub use cycles::extract_cycles;
pub use folds::{build_folds, Fold, FoldPlan};
pub use icbhi::{
    load_icbhi_dataset, parse_icbhi_annotation, scan_icbhi_annotations, subject_id_from_filename,
    IcbhiAnnotationRow,
};
pub use manifest::{load_target_dataset, read_manifest, write_manifest, ManifestRow};
pub use synth::{
    synth_source_dataset, synth_target_dataset, write_synth_target_to_dir, SynthSpec,
};
pub use wav::{read_wav, write_wav_16bit};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("parse error at line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    #[error("annotation error: {0}")]
    AnnotationError(String),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt file: {0}")]
    CorruptFile(String),
    #[error("{have} IPF subjects for {need} folds")]
    InsufficientSubjects { have: usize, need: usize },
    #[error("manifest error: {0}")]
    ManifestError(String),
    #[error("io error on {path}: {msg}")]
    Io { path: String, msg: String },
}

/// Clinical condition of a subject (source-domain subjects are opaque).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    Healthy,
    Ipf,
    SourceSubject,
}

impl Condition {
    pub fn name(self) -> &'static str {
        match self {
            Condition::Healthy => "healthy",
            Condition::Ipf => "ipf",
            Condition::SourceSubject => "source",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "healthy" => Some(Condition::Healthy),
            "ipf" => Some(Condition::Ipf),
            "source" => Some(Condition::SourceSubject),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RecordingRef {
    pub recording_id: String,
    pub audio_path: PathBuf,
}

/// One subject with their recordings.
#[derive(Debug, Clone)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub condition: Condition,
    pub recordings: Vec<RecordingRef>,
}
