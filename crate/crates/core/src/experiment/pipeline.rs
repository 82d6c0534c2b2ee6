//! Cycle -> network-input features for a given variant: resample, split,
//! pad, STFT, optional VTLP warp, mel projection, log, normalize.

use super::variant::PaddingKind;
use super::ExperimentError;
use crate::audio::{
    fixed_lengths_for, resample, sample_pad, split_phases, zero_pad, AudioSignal, AugmentTag,
    PhaseRatio, PhaseSegment, RespiratoryCycle, FIXED_CYCLE_LEN, TARGET_RATE_HZ,
};
use crate::augment::vtlp;
use crate::features::{
    default_filterbank, log_mel, normalize, stft_magnitude, MelFilterbank, WINDOW_SIZE,
};
use crate::nn::{FeatureSet, SampleFeatures};
use crate::parallel;
use crate::transfer::BranchInput;

/// (frames, bins) per branch input at the fixed padded lengths.
pub fn branch_feature_dims(
    inputs: &[BranchInput],
    ratio: Option<PhaseRatio>,
) -> Result<Vec<(usize, usize)>, ExperimentError> {
    inputs
        .iter()
        .map(|input| {
            let samples = match input {
                BranchInput::Cycle => FIXED_CYCLE_LEN,
                BranchInput::Inspiration => {
                    fixed_lengths_for(ratio.ok_or_else(|| {
                        ExperimentError::Config("phase input requires a ratio".into())
                    })?)
                    .insp_len
                }
                BranchInput::Expiration => {
                    fixed_lengths_for(ratio.ok_or_else(|| {
                        ExperimentError::Config("phase input requires a ratio".into())
                    })?)
                    .exp_len
                }
            };
            Ok((samples / WINDOW_SIZE, 45))
        })
        .collect()
}

fn pad(sig: &AudioSignal, target: usize, padding: PaddingKind) -> Result<AudioSignal, ExperimentError> {
    Ok(match padding {
        PaddingKind::Sample => sample_pad(sig, target)?,
        PaddingKind::Zero => zero_pad(sig, target)?,
    })
}

fn features_for_signal(
    sig: &AudioSignal,
    fb: &MelFilterbank,
    vtlp_alpha: Option<f64>,
) -> Result<Vec<f32>, ExperimentError> {
    let mut spec = stft_magnitude(sig)?;
    if let Some(alpha) = vtlp_alpha {
        spec = vtlp(&spec, alpha)?;
    }
    let lm = normalize(&log_mel(&spec, fb)?);
    Ok(lm.values.iter().map(|&v| v as f32).collect())
}

fn cycle_features(
    cycle: &RespiratoryCycle,
    inputs: &[BranchInput],
    ratio: Option<PhaseRatio>,
    padding: PaddingKind,
    fb: &MelFilterbank,
) -> Result<SampleFeatures, ExperimentError> {
    let resampled = resample(&cycle.signal, TARGET_RATE_HZ)?;
    let vtlp_alpha = match cycle.augment {
        Some(AugmentTag::Vtlp { alpha }) | Some(AugmentTag::StretchedVtlp { alpha, .. }) => {
            Some(alpha)
        }
        _ => None,
    };

    let needs_phases = inputs
        .iter()
        .any(|i| matches!(i, BranchInput::Inspiration | BranchInput::Expiration));
    let phases = if needs_phases {
        let ratio =
            ratio.ok_or_else(|| ExperimentError::Config("phase input requires a ratio".into()))?;
        let segment = PhaseSegment::full_cycle(
            resampled.clone(),
            cycle.recording_id.clone(),
            cycle.cycle_index,
        );
        let (insp, exp) = split_phases(&segment, ratio)?;
        let lengths = fixed_lengths_for(ratio);
        Some((
            pad(&insp.signal, lengths.insp_len, padding)?,
            pad(&exp.signal, lengths.exp_len, padding)?,
        ))
    } else {
        None
    };

    let mut branches = Vec::with_capacity(inputs.len());
    for input in inputs {
        let padded = match input {
            BranchInput::Cycle => pad(&resampled, FIXED_CYCLE_LEN, padding)?,
            BranchInput::Inspiration => phases.as_ref().expect("phases computed").0.clone(),
            BranchInput::Expiration => phases.as_ref().expect("phases computed").1.clone(),
        };
        branches.push(features_for_signal(&padded, fb, vtlp_alpha)?);
    }
    Ok(SampleFeatures {
        branches,
        label: cycle.label.index(),
        subject_id: cycle.subject_id.clone(),
    })
}

/// Build the feature set for a list of cycles. Cycles are processed in
/// parallel; output order matches input order.
pub fn build_feature_set(
    cycles: &[&RespiratoryCycle],
    inputs: &[BranchInput],
    ratio: Option<PhaseRatio>,
    padding: PaddingKind,
) -> Result<FeatureSet, ExperimentError> {
    let fb = default_filterbank();
    let dims = branch_feature_dims(inputs, ratio)?;
    let results: Vec<Result<SampleFeatures, ExperimentError>> =
        parallel::map_slice(cycles, |c| cycle_features(c, inputs, ratio, padding, &fb));
    let mut set = FeatureSet::new(dims);
    for r in results {
        set.push(r?);
    }
    Ok(set)
}
