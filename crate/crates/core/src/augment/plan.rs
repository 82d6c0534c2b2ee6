//! Per-domain augmentation policy.
//!
//! Source domain: time stretching doubles the wheeze and both classes, then
//! one VTLP copy is added for every sample of the original and stretched
//! sets. Target domain: one VTLP copy per crackle sample. Time stretching
//! happens immediately in the audio domain; VTLP is recorded as a tag and
//! applied at the spectrogram stage so the mel/log/normalize stages are
//! shared.

use std::collections::HashSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{time_stretch, AugmentError, VTLP_ALPHA_MAX, VTLP_ALPHA_MIN};
use crate::audio::{AugmentTag, ClassLabel, Domain, RespiratoryCycle, Split};
use crate::seeds::derive_seed;

#[derive(Debug, Clone)]
pub struct AugmentPlan {
    pub domain: Domain,
    pub stretch_classes: HashSet<ClassLabel>,
    pub vtlp_classes: HashSet<ClassLabel>,
    /// Candidate stretch rates; one is chosen uniformly per copy.
    pub stretch_rates: Vec<f64>,
    /// VTLP alpha is drawn uniformly from this range per copy.
    pub vtlp_alpha_range: (f64, f64),
    pub seed: u64,
}

impl AugmentPlan {
    /// Source policy: stretch {Wheeze, Both}, VTLP all four classes.
    pub fn source(seed: u64) -> Self {
        Self {
            domain: Domain::Source,
            stretch_classes: [ClassLabel::Wheeze, ClassLabel::Both].into_iter().collect(),
            vtlp_classes: [
                ClassLabel::Normal,
                ClassLabel::Crackle,
                ClassLabel::Wheeze,
                ClassLabel::Both,
            ]
            .into_iter()
            .collect(),
            stretch_rates: vec![0.8, 1.2],
            vtlp_alpha_range: (VTLP_ALPHA_MIN, VTLP_ALPHA_MAX),
            seed,
        }
    }

    /// Target policy: no stretching, VTLP only for crackles.
    pub fn target(seed: u64) -> Self {
        Self {
            domain: Domain::Target,
            stretch_classes: HashSet::new(),
            vtlp_classes: [ClassLabel::Crackle].into_iter().collect(),
            stretch_rates: vec![],
            vtlp_alpha_range: (VTLP_ALPHA_MIN, VTLP_ALPHA_MAX),
            seed,
        }
    }
}

const SALT_STRETCH: u64 = 0x5354;
const SALT_VTLP: u64 = 0x5654;
const SALT_VTLP_STRETCHED: u64 = 0x5655;

fn draw_alpha(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    rng.gen_range(range.0..=range.1)
}

/// Expand the training set per the plan. Every input must belong to the
/// plan's domain and carry split = Train; copies inherit the parent's
/// metadata and are tagged with their provenance. Deterministic given the
/// plan seed, independent of input order per sample.
pub fn apply_plan(
    dataset: &[RespiratoryCycle],
    plan: &AugmentPlan,
) -> Result<Vec<RespiratoryCycle>, AugmentError> {
    for c in dataset {
        if c.domain != plan.domain {
            return Err(AugmentError::PlanMismatch(format!(
                "cycle {}#{} has domain {:?}, plan targets {:?}",
                c.recording_id, c.cycle_index, c.domain, plan.domain
            )));
        }
        if !c.label_is_valid() {
            return Err(AugmentError::PlanMismatch(format!(
                "cycle {}#{} label {:?} invalid for {:?}",
                c.recording_id, c.cycle_index, c.label, c.domain
            )));
        }
        if c.split != Split::Train {
            return Err(AugmentError::SplitLeakage(format!(
                "cycle {}#{} has split {:?}",
                c.recording_id, c.cycle_index, c.split
            )));
        }
    }

    let mut out: Vec<RespiratoryCycle> = dataset.to_vec();

    // Pass 1: time-stretched copies.
    let mut stretched: Vec<RespiratoryCycle> = Vec::new();
    if !plan.stretch_rates.is_empty() {
        for c in dataset {
            if !plan.stretch_classes.contains(&c.label) {
                continue;
            }
            let seed = derive_seed(plan.seed, &c.recording_id, c.cycle_index, SALT_STRETCH);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rate = plan.stretch_rates[rng.gen_range(0..plan.stretch_rates.len())];
            let signal = time_stretch(&c.signal, rate)?;
            let mut copy = c.clone();
            copy.signal = signal;
            copy.augment = Some(AugmentTag::Stretched { rate });
            stretched.push(copy);
        }
    }

    // Pass 2: one VTLP copy per eligible sample of original + stretched.
    let mut vtlp_copies: Vec<RespiratoryCycle> = Vec::new();
    for c in dataset.iter().filter(|c| plan.vtlp_classes.contains(&c.label)) {
        let seed = derive_seed(plan.seed, &c.recording_id, c.cycle_index, SALT_VTLP);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let alpha = draw_alpha(&mut rng, plan.vtlp_alpha_range);
        let mut copy = c.clone();
        copy.augment = Some(AugmentTag::Vtlp { alpha });
        vtlp_copies.push(copy);
    }
    for c in stretched.iter().filter(|c| plan.vtlp_classes.contains(&c.label)) {
        let seed = derive_seed(plan.seed, &c.recording_id, c.cycle_index, SALT_VTLP_STRETCHED);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let alpha = draw_alpha(&mut rng, plan.vtlp_alpha_range);
        let rate = match c.augment {
            Some(AugmentTag::Stretched { rate }) => rate,
            _ => unreachable!("stretched pass only produces Stretched tags"),
        };
        let mut copy = c.clone();
        copy.augment = Some(AugmentTag::StretchedVtlp { rate, alpha });
        vtlp_copies.push(copy);
    }

    out.extend(stretched);
    out.extend(vtlp_copies);
    Ok(out)
}
