//! Transfer-learning surgery: pre-train the single-input CNN on the source
//! domain, replicate it into multi-input branches, apply freeze policies,
//! and fine-tune on the target domain.

use thiserror::Error;

use crate::nn::{
    load_checkpoint, save_checkpoint, train, AdamHyper, ArchitectureSpec, CheckpointData,
    FeatureSet, ModelGraph, NnError, TrainConfig, TrainHistory,
};

#[derive(Debug, Error)]
pub enum TransferError {
    #[error("invalid freeze policy: {0}")]
    InvalidPolicy(String),
    #[error("feature/branch combo mismatch: {0}")]
    ComboMismatch(String),
    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Which spectrogram feeds one branch of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchInput {
    Cycle,
    Inspiration,
    Expiration,
}

/// The four studied multi-input combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BranchCombo {
    CycIns,
    CycExp,
    InsExp,
    CycInsExp,
}

impl BranchCombo {
    pub fn branch_count(self) -> usize {
        match self {
            BranchCombo::CycInsExp => 3,
            _ => 2,
        }
    }

    pub fn inputs(self) -> Vec<BranchInput> {
        match self {
            BranchCombo::CycIns => vec![BranchInput::Cycle, BranchInput::Inspiration],
            BranchCombo::CycExp => vec![BranchInput::Cycle, BranchInput::Expiration],
            BranchCombo::InsExp => vec![BranchInput::Inspiration, BranchInput::Expiration],
            BranchCombo::CycInsExp => {
                vec![BranchInput::Cycle, BranchInput::Inspiration, BranchInput::Expiration]
            }
        }
    }
}

/// Where fine-tuning starts. Blocks below `start_block` keep their
/// pre-trained conv weights frozen; BN parameters stay trainable everywhere
/// while `bn_always_trainable` holds (the default).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FreezePolicy {
    pub start_block: usize,
    pub start_kind: StartKind,
    pub bn_always_trainable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartKind {
    Bn,
    Conv,
}

impl FreezePolicy {
    pub fn new(start_block: usize, start_kind: StartKind) -> Self {
        Self { start_block, start_kind, bn_always_trainable: true }
    }

    /// The degenerate policy that freezes nothing.
    pub fn none() -> Self {
        Self::new(1, StartKind::Bn)
    }
}

/// A pre-trained single-input model: architecture + checkpoint + where it
/// came from.
#[derive(Debug, Clone)]
pub struct PretrainedModel {
    pub arch: ArchitectureSpec,
    pub checkpoint: CheckpointData,
    pub provenance: String,
}

impl PretrainedModel {
    pub fn source_classes(&self) -> usize {
        self.checkpoint.num_classes as usize
    }

    /// Wrap a checkpoint, insisting it is single-input and covers the
    /// architecture.
    pub fn from_checkpoint(
        arch: ArchitectureSpec,
        checkpoint: CheckpointData,
        provenance: impl Into<String>,
    ) -> Result<Self, TransferError> {
        if checkpoint.num_branches != 1 {
            return Err(TransferError::Nn(NnError::IncompatibleCheckpoint(format!(
                "pretrained model must be single-input, found {} branches",
                checkpoint.num_branches
            ))));
        }
        // full coverage check: materialize once
        checkpoint.to_model::<f32>(&arch)?;
        Ok(Self { arch, checkpoint, provenance: provenance.into() })
    }

    pub fn load(path: &std::path::Path, arch: ArchitectureSpec) -> Result<Self, TransferError> {
        let mut file = std::fs::File::open(path)
            .map_err(|e| TransferError::Nn(NnError::Io(format!("{}: {e}", path.display()))))?;
        let data = load_checkpoint(&mut file)?;
        Self::from_checkpoint(arch, data, path.display().to_string())
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), TransferError> {
        let model: ModelGraph<f32> = self.checkpoint.to_model(&self.arch)?;
        let mut file = std::fs::File::create(path)
            .map_err(|e| TransferError::Nn(NnError::Io(format!("{}: {e}", path.display()))))?;
        save_checkpoint(&mut file, &model)?;
        Ok(())
    }
}

/// Train the single-input model from scratch on 4-class source features.
pub fn pretrain(
    train_set: &FeatureSet,
    val_set: &FeatureSet,
    config: &TrainConfig,
    hyper: &AdamHyper,
    num_classes: usize,
    init_seed: u64,
) -> Result<(PretrainedModel, TrainHistory), TransferError> {
    if train_set.branch_dims.len() != 1 {
        return Err(TransferError::ComboMismatch(
            "pretraining expects single-input (full cycle) features".into(),
        ));
    }
    let mut present = vec![false; num_classes];
    for s in &train_set.samples {
        if s.label < num_classes {
            present[s.label] = true;
        }
    }
    if let Some(missing) = present.iter().position(|p| !p) {
        return Err(TransferError::DegenerateDataset(format!(
            "class {missing} missing from the pretraining set"
        )));
    }

    let mut model =
        ModelGraph::<f32>::new_glorot(ArchitectureSpec::standard(), 1, num_classes, init_seed);
    let history = train(&mut model, train_set, val_set, config, hyper)?;
    let mut buf = Vec::new();
    save_checkpoint(&mut buf, &model)?;
    let checkpoint = load_checkpoint(&mut buf.as_slice())?;
    let pm = PretrainedModel {
        arch: model.arch.clone(),
        checkpoint,
        provenance: format!("pretrain(seed={init_seed})"),
    };
    Ok((pm, history))
}

fn replicate_branches(
    pm: &PretrainedModel,
    n_branches: usize,
    target_classes: usize,
    head_seed: u64,
) -> Result<ModelGraph<f32>, TransferError> {
    let single: ModelGraph<f32> = pm.checkpoint.to_model(&pm.arch)?;
    // fresh head; branch blocks are replaced below by independent copies of
    // the pre-trained branch
    let mut model =
        ModelGraph::<f32>::new_glorot(pm.arch.clone(), n_branches, target_classes, head_seed);
    for branch in model.branches.iter_mut() {
        branch.clone_from(&single.branches[0]);
    }
    Ok(model)
}

/// Build the multi-input model: each branch is an independent copy of the
/// pre-trained convolutional stack; the source output layer is discarded
/// and a freshly Glorot-initialized dense head maps the concatenated GAP
/// features to the target classes.
pub fn build_multi_input(
    pm: &PretrainedModel,
    combo: BranchCombo,
    target_classes: usize,
    head_seed: u64,
) -> Result<ModelGraph<f32>, TransferError> {
    replicate_branches(pm, combo.branch_count(), target_classes, head_seed)
}

/// Single-input transfer baseline: one pre-trained branch, fresh head.
pub fn build_single_from_pretrained(
    pm: &PretrainedModel,
    target_classes: usize,
    head_seed: u64,
) -> Result<ModelGraph<f32>, TransferError> {
    replicate_branches(pm, 1, target_classes, head_seed)
}

/// Set the trainable flags per the policy, identically across branches.
/// Conv weights of blocks before `start_block` are frozen; with
/// `bn_always_trainable` every BN stays trainable (otherwise BN layers
/// before the start point freeze too, where a Conv start leaves its own
/// block's BN frozen). The dense head is always trainable.
pub fn apply_freeze_policy(
    model: &mut ModelGraph<f32>,
    policy: &FreezePolicy,
) -> Result<(), TransferError> {
    let blocks = model.arch.blocks();
    if policy.start_block < 1 || policy.start_block > blocks {
        return Err(TransferError::InvalidPolicy(format!(
            "start_block {} outside 1..={blocks}",
            policy.start_block
        )));
    }
    for branch in model.branches.iter_mut() {
        for (idx, block) in branch.iter_mut().enumerate() {
            let block_no = idx + 1;
            block.conv.trainable = block_no >= policy.start_block;
            block.bn.trainable = policy.bn_always_trainable
                || block_no > policy.start_block
                || (block_no == policy.start_block && policy.start_kind == StartKind::Bn);
        }
    }
    Ok(())
}

/// Fine-tune on target features; a thin wrapper over the shared training
/// loop that first checks the feature/branch pairing.
pub fn fine_tune(
    model: &mut ModelGraph<f32>,
    train_set: &FeatureSet,
    val_set: &FeatureSet,
    config: &TrainConfig,
    hyper: &AdamHyper,
) -> Result<TrainHistory, TransferError> {
    if train_set.branch_dims.len() != model.n_branches() {
        return Err(TransferError::ComboMismatch(format!(
            "{} feature branches for a {}-branch model",
            train_set.branch_dims.len(),
            model.n_branches()
        )));
    }
    Ok(train(model, train_set, val_set, config, hyper)?)
}
