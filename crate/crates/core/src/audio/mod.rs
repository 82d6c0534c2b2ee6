//! Raw-signal preprocessing: resampling, inspiration/expiration splitting
//! and fixed-length padding of respiratory cycles and phases.
//!
//! All operations are pure functions of their inputs; values are immutable
//! once constructed and safe to share between threads.

mod pad;
mod phase;
mod resample;

pub use pad::{sample_pad, zero_pad};
pub use phase::{fixed_lengths_for, split_phases, FixedLengths, PhaseKind, PhaseSegment};
pub use resample::resample;

use thiserror::Error;

/// Target sample rate for the whole pipeline, in Hz.
pub const TARGET_RATE_HZ: u32 = 16_000;

/// Fixed respiratory-cycle length after padding, in samples at 16 kHz
/// (the maximum cycle length observed in the target domain).
pub const FIXED_CYCLE_LEN: usize = 131_960;

#[derive(Debug, Error, PartialEq)]
pub enum AudioError {
    #[error("empty signal")]
    EmptySignal,
    #[error("signal contains a non-finite sample at index {0}")]
    InvalidSignal(usize),
    #[error("cycle too short to split ({0} samples)")]
    TooShort(usize),
    #[error("invalid phase ratio {0}:{1}")]
    InvalidRatio(u32, u32),
    #[error("invalid target rate {0} Hz")]
    InvalidRate(u32),
}

/// Mono audio with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Self {
        Self { samples, sample_rate_hz }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Checks the invariants required before feature extraction.
    pub fn validate(&self) -> Result<(), AudioError> {
        if self.samples.is_empty() {
            return Err(AudioError::EmptySignal);
        }
        if let Some(i) = self.samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::InvalidSignal(i));
        }
        Ok(())
    }
}

/// Class label of a respiratory cycle. Source-domain cycles use all four;
/// the target domain only Normal and Crackle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassLabel {
    Normal,
    Crackle,
    Wheeze,
    Both,
}

impl ClassLabel {
    /// Class index used by the network (Normal=0, Crackle=1, Wheeze=2, Both=3).
    pub fn index(self) -> usize {
        match self {
            ClassLabel::Normal => 0,
            ClassLabel::Crackle => 1,
            ClassLabel::Wheeze => 2,
            ClassLabel::Both => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Normal => "normal",
            ClassLabel::Crackle => "crackle",
            ClassLabel::Wheeze => "wheeze",
            ClassLabel::Both => "both",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "normal" => Some(ClassLabel::Normal),
            "crackle" => Some(ClassLabel::Crackle),
            "wheeze" => Some(ClassLabel::Wheeze),
            "both" => Some(ClassLabel::Both),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    Source,
    Target,
}

/// Which dataset split a cycle is currently assigned to. Cycles start
/// unassigned; fold application tags them, and augmentation refuses to touch
/// anything outside the training split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Unassigned,
    Train,
    Val,
    Test,
}

/// How a cycle came to be: recorded, or derived by augmentation. VTLP is
/// recorded here and applied later at the spectrogram stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AugmentTag {
    Stretched { rate: f64 },
    Vtlp { alpha: f64 },
    StretchedVtlp { rate: f64, alpha: f64 },
}

/// One full inhale+exhale segment with its metadata.
#[derive(Debug, Clone)]
pub struct RespiratoryCycle {
    pub signal: AudioSignal,
    pub label: ClassLabel,
    pub subject_id: String,
    pub recording_id: String,
    pub cycle_index: usize,
    pub domain: Domain,
    pub split: Split,
    pub augment: Option<AugmentTag>,
}

impl RespiratoryCycle {
    /// Target labels are restricted to {Normal, Crackle}.
    pub fn label_is_valid(&self) -> bool {
        match self.domain {
            Domain::Source => true,
            Domain::Target => matches!(self.label, ClassLabel::Normal | ClassLabel::Crackle),
        }
    }
}

/// Ratio of inspiration length to full cycle length. Only the five ratios
/// studied in the pipeline are constructible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PhaseRatio {
    insp_num: u32,
    cycle_den: u32,
}

impl PhaseRatio {
    pub const ALL: [PhaseRatio; 5] = [
        PhaseRatio { insp_num: 1, cycle_den: 3 },
        PhaseRatio { insp_num: 2, cycle_den: 5 },
        PhaseRatio { insp_num: 3, cycle_den: 7 },
        PhaseRatio { insp_num: 4, cycle_den: 9 },
        PhaseRatio { insp_num: 1, cycle_den: 2 },
    ];

    pub fn new(insp_num: u32, cycle_den: u32) -> Result<Self, AudioError> {
        let r = PhaseRatio { insp_num, cycle_den };
        if Self::ALL.contains(&r) {
            Ok(r)
        } else {
            Err(AudioError::InvalidRatio(insp_num, cycle_den))
        }
    }

    pub fn insp_num(self) -> u32 {
        self.insp_num
    }

    pub fn cycle_den(self) -> u32 {
        self.cycle_den
    }

    /// Inspiration sample count for a cycle of `len` samples:
    /// round-half-up of len * insp_num / cycle_den, in exact integer
    /// arithmetic.
    pub fn insp_len(self, len: usize) -> usize {
        let num = 2 * len as u64 * self.insp_num as u64 + self.cycle_den as u64;
        (num / (2 * self.cycle_den as u64)) as usize
    }

    /// Two-digit token used in variant names ("12", "25", ...).
    pub fn token(self) -> String {
        format!("{}{}", self.insp_num, self.cycle_den)
    }

    pub fn from_token(tok: &str) -> Option<Self> {
        let mut chars = tok.chars();
        let n = chars.next()?.to_digit(10)?;
        let d = chars.next()?.to_digit(10)?;
        if chars.next().is_some() {
            return None;
        }
        PhaseRatio::new(n, d).ok()
    }
}
