//! Variant names in the published table convention, e.g.
//! "2ndConv_Cyc_Inp_Ratio_12_SamplePad" or "Scratch_Cyc_ZeroPad".
//!
//! The table writes the inspiration token as "Inp" when paired with the
//! full cycle and "Ins" elsewhere; the parser accepts both spellings
//! anywhere and the formatter reproduces the published convention, so
//! formatting after parsing is the identity on all published names.

use super::ExperimentError;
use crate::audio::PhaseRatio;
use crate::transfer::{BranchCombo, BranchInput, FreezePolicy, StartKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaddingKind {
    Sample,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferSpec {
    /// Train from scratch: no pretraining, no freezing.
    Scratch,
    /// Fine-tune a pre-trained model starting at this block/layer.
    FineTune { start_block: usize, start_kind: StartKind },
}

impl TransferSpec {
    pub fn freeze_policy(&self) -> FreezePolicy {
        match self {
            TransferSpec::Scratch => FreezePolicy::none(),
            TransferSpec::FineTune { start_block, start_kind } => {
                FreezePolicy::new(*start_block, *start_kind)
            }
        }
    }
}

/// Which spectrograms feed the network: the full cycle alone, or one of
/// the four multi-input combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputCombo {
    Cyc,
    Multi(BranchCombo),
}

impl InputCombo {
    pub fn branch_inputs(self) -> Vec<BranchInput> {
        match self {
            InputCombo::Cyc => vec![BranchInput::Cycle],
            InputCombo::Multi(combo) => combo.inputs(),
        }
    }

    pub fn needs_ratio(self) -> bool {
        !matches!(self, InputCombo::Cyc)
    }

    fn from_inputs(inputs: &[BranchInput]) -> Option<Self> {
        match inputs {
            [BranchInput::Cycle] => Some(InputCombo::Cyc),
            [BranchInput::Cycle, BranchInput::Inspiration] => {
                Some(InputCombo::Multi(BranchCombo::CycIns))
            }
            [BranchInput::Cycle, BranchInput::Expiration] => {
                Some(InputCombo::Multi(BranchCombo::CycExp))
            }
            [BranchInput::Inspiration, BranchInput::Expiration] => {
                Some(InputCombo::Multi(BranchCombo::InsExp))
            }
            [BranchInput::Cycle, BranchInput::Inspiration, BranchInput::Expiration] => {
                Some(InputCombo::Multi(BranchCombo::CycInsExp))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variant {
    pub transfer: TransferSpec,
    pub combo: InputCombo,
    pub ratio: Option<PhaseRatio>,
    pub padding: PaddingKind,
}

fn err(name: &str, msg: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Variant(format!("'{name}': {msg}"))
}

fn parse_ordinal(tok: &str) -> Option<usize> {
    let ordinals = ["1st", "2nd", "3rd", "4th", "5th", "6th", "7th"];
    ordinals.iter().position(|o| *o == tok).map(|i| i + 1)
}

fn ordinal(n: usize) -> String {
    let suffix = match n {
        1 => "st",
        2 => "nd",
        3 => "rd",
        _ => "th",
    };
    format!("{n}{suffix}")
}

pub fn parse_variant_name(name: &str) -> Result<Variant, ExperimentError> {
    let tokens: Vec<&str> = name.split('_').collect();
    if tokens.len() < 2 {
        return Err(err(name, "too few tokens"));
    }

    let transfer = if tokens[0] == "Scratch" {
        TransferSpec::Scratch
    } else if let Some(rest) = tokens[0].strip_suffix("Conv") {
        let block = parse_ordinal(rest).ok_or_else(|| err(name, format!("ordinal '{rest}'")))?;
        TransferSpec::FineTune { start_block: block, start_kind: StartKind::Conv }
    } else if let Some(rest) = tokens[0].strip_suffix("BN") {
        let block = parse_ordinal(rest).ok_or_else(|| err(name, format!("ordinal '{rest}'")))?;
        TransferSpec::FineTune { start_block: block, start_kind: StartKind::Bn }
    } else {
        return Err(err(name, format!("unknown transfer token '{}'", tokens[0])));
    };

    let padding = match *tokens.last().unwrap() {
        "SamplePad" => PaddingKind::Sample,
        "ZeroPad" => PaddingKind::Zero,
        other => return Err(err(name, format!("unknown padding token '{other}'"))),
    };

    let mut inputs: Vec<BranchInput> = Vec::new();
    let mut ratio: Option<PhaseRatio> = None;
    let mut i = 1;
    let end = tokens.len() - 1;
    while i < end {
        match tokens[i] {
            "Cyc" => inputs.push(BranchInput::Cycle),
            "Ins" | "Inp" => inputs.push(BranchInput::Inspiration),
            "Exp" => inputs.push(BranchInput::Expiration),
            "Ratio" => {
                if i + 1 >= end {
                    return Err(err(name, "Ratio token without digits"));
                }
                ratio = Some(
                    PhaseRatio::from_token(tokens[i + 1])
                        .ok_or_else(|| err(name, format!("ratio '{}'", tokens[i + 1])))?,
                );
                i += 1;
            }
            other => return Err(err(name, format!("unknown token '{other}'"))),
        }
        i += 1;
    }

    let combo = InputCombo::from_inputs(&inputs)
        .ok_or_else(|| err(name, format!("unsupported input combination {inputs:?}")))?;
    if combo.needs_ratio() != ratio.is_some() {
        return Err(err(
            name,
            if ratio.is_some() { "ratio given for cycle-only input" } else { "missing ratio" },
        ));
    }
    Ok(Variant { transfer, combo, ratio, padding })
}

pub fn format_variant_name(v: &Variant) -> String {
    let mut parts: Vec<String> = Vec::new();
    parts.push(match v.transfer {
        TransferSpec::Scratch => "Scratch".to_string(),
        TransferSpec::FineTune { start_block, start_kind } => format!(
            "{}{}",
            ordinal(start_block),
            match start_kind {
                StartKind::Bn => "BN",
                StartKind::Conv => "Conv",
            }
        ),
    });
    match v.combo {
        InputCombo::Cyc => parts.push("Cyc".into()),
        InputCombo::Multi(BranchCombo::CycIns) => {
            parts.push("Cyc".into());
            parts.push("Inp".into());
        }
        InputCombo::Multi(BranchCombo::CycExp) => {
            parts.push("Cyc".into());
            parts.push("Exp".into());
        }
        InputCombo::Multi(BranchCombo::InsExp) => {
            parts.push("Ins".into());
            parts.push("Exp".into());
        }
        InputCombo::Multi(BranchCombo::CycInsExp) => {
            parts.push("Cyc".into());
            parts.push("Ins".into());
            parts.push("Exp".into());
        }
    }
    if let Some(r) = v.ratio {
        parts.push("Ratio".into());
        parts.push(r.token());
    }
    parts.push(match v.padding {
        PaddingKind::Sample => "SamplePad".into(),
        PaddingKind::Zero => "ZeroPad".into(),
    });
    parts.join("_")
}
