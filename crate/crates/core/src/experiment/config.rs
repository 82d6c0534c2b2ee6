//! Experiment configuration: a TOML file with flag-friendly overrides.
//!
//! ```toml
//! variant = "2ndConv_Cyc_Inp_Ratio_12_SamplePad"
//! seeds = [1, 2, 3, 4, 5]
//! folds = 7
//! fold_seed = 0
//!
//! [data]
//! kind = "synth"              # or "manifest" with path = "..."
//! normal_subjects = 8
//! crackle_subjects = 7
//! cycles_per_subject = 10
//! seed = 42
//!
//! [pretraining]
//! source = "synth"            # or "checkpoint" with path = "..."
//! subjects_per_class = 2
//! cycles_per_subject = 10
//! epochs = 10
//! seed = 7
//!
//! [train]
//! epochs = 150
//! batch_size = 15
//! learning_rate = 0.0001
//! l2 = 0.001
//! focal_gamma = 2.0
//! alpha = "inverse_frequency"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{parse_variant_name, ExperimentError, Variant};
use crate::nn::AdamHyper;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    Synth {
        normal_subjects: usize,
        crackle_subjects: usize,
        cycles_per_subject: usize,
        #[serde(default)]
        seed: u64,
    },
    Manifest { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum PretrainSource {
    Synth {
        subjects_per_class: usize,
        cycles_per_subject: usize,
        #[serde(default)]
        seed: u64,
    },
    Checkpoint { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainingConfig {
    #[serde(flatten)]
    pub source: PretrainSource,
    #[serde(default = "default_pretrain_epochs")]
    pub epochs: usize,
    #[serde(default = "default_source_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
}

fn default_pretrain_epochs() -> usize {
    150
}

fn default_source_batch() -> usize {
    32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMode {
    Uniform,
    InverseFrequency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_target_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_l2")]
    pub l2: f64,
    #[serde(default = "default_gamma")]
    pub focal_gamma: f64,
    #[serde(default = "default_alpha_mode")]
    pub alpha: AlphaMode,
}

fn default_epochs() -> usize {
    150
}

fn default_target_batch() -> usize {
    15
}

fn default_lr() -> f64 {
    1e-4
}

fn default_l2() -> f64 {
    1e-3
}

fn default_gamma() -> f64 {
    2.0
}

fn default_alpha_mode() -> AlphaMode {
    AlphaMode::InverseFrequency
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            epochs: default_epochs(),
            batch_size: default_target_batch(),
            learning_rate: default_lr(),
            l2: default_l2(),
            focal_gamma: default_gamma(),
            alpha: default_alpha_mode(),
        }
    }
}

impl TrainSection {
    pub fn adam_hyper(&self) -> AdamHyper {
        AdamHyper { lr: self.learning_rate, l2_lambda: self.l2, ..AdamHyper::default() }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}

fn default_folds() -> usize {
    7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub variant: String,
    /// One independent run per seed.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    /// Seed for the fold plan; runs share the same data splittings.
    #[serde(default)]
    pub fold_seed: u64,
    pub data: DataConfig,
    #[serde(default)]
    pub pretraining: Option<PretrainingConfig>,
    #[serde(default)]
    pub train: TrainSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn variant(&self) -> Result<Variant, ExperimentError> {
        parse_variant_name(&self.variant)
    }

    /// SHA-256 of the canonical TOML serialization; embedded in reports so
    /// equal hashes imply equal configurations.
    pub fn config_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_toml_string().as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_config() -> ExperimentConfig {
        ExperimentConfig {
            variant: "2ndConv_Cyc_Inp_Ratio_12_SamplePad".into(),
            seeds: vec![1, 2],
            folds: 7,
            fold_seed: 3,
            data: DataConfig::Synth {
                normal_subjects: 8,
                crackle_subjects: 7,
                cycles_per_subject: 10,
                seed: 42,
            },
            pretraining: Some(PretrainingConfig {
                source: PretrainSource::Synth {
                    subjects_per_class: 2,
                    cycles_per_subject: 10,
                    seed: 7,
                },
                epochs: 10,
                batch_size: 32,
                learning_rate: 1e-3,
            }),
            train: TrainSection::default(),
        }
    }

    #[test]
    fn toml_round_trip() {
        let cfg = sample_config();
        let text = cfg.to_toml_string();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn hash_distinguishes_configs() {
        let a = sample_config();
        let mut b = sample_config();
        assert_eq!(a.config_hash(), sample_config().config_hash());
        b.seeds = vec![9];
        assert_ne!(a.config_hash(), b.config_hash());
    }

    #[test]
    fn defaults_are_paper_faithful() {
        let text = r#"
variant = "Scratch_Cyc_SamplePad"

[data]
kind = "manifest"
path = "data/manifest.tsv"
"#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.seeds, vec![1, 2, 3, 4, 5]);
        assert_eq!(cfg.folds, 7);
        assert_eq!(cfg.train.epochs, 150);
        assert_eq!(cfg.train.batch_size, 15);
        assert_eq!(cfg.train.learning_rate, 1e-4);
        assert_eq!(cfg.train.l2, 1e-3);
        assert_eq!(cfg.train.focal_gamma, 2.0);
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = r#"
variant = "Scratch_Cyc_SamplePad"
bogus = 1

[data]
kind = "manifest"
path = "m.tsv"
"#;
        assert!(ExperimentConfig::from_toml_str(text).is_err());
    }
}
