//! Finite-difference verification of the analytic gradients.
//!
//! Runs in f64: central differences with eps = 1e-5 against one backward
//! pass, on a random subset of entries per parameter group. Frozen conv
//! groups are reported as skipped.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::focal_loss;
use super::model::{Grads, Mode, ModelGraph};
use super::{NnError, Tensor4};

pub const GRADCHECK_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct GroupReport {
    pub name: String,
    pub max_rel_err: f64,
    pub checked: usize,
    pub skipped: bool,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub groups: Vec<GroupReport>,
}

impl GradCheckReport {
    /// Worst relative error over all checked groups.
    pub fn max_rel_err(&self) -> f64 {
        self.groups
            .iter()
            .filter(|g| !g.skipped)
            .map(|g| g.max_rel_err)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_rel_err() < tolerance
    }
}

enum GroupId {
    BnGamma(usize, usize),
    BnBeta(usize, usize),
    ConvWeight(usize, usize),
    ConvBias(usize, usize),
    DenseWeight,
    DenseBias,
}

fn group_ids(model: &ModelGraph<f64>) -> Vec<(String, GroupId, bool)> {
    let mut out = Vec::new();
    for (br, branch) in model.branches.iter().enumerate() {
        for (j, block) in branch.iter().enumerate() {
            let p = format!("branch{br}.block{}", j + 1);
            out.push((format!("{p}.bn.gamma"), GroupId::BnGamma(br, j), block.bn.trainable));
            out.push((format!("{p}.bn.beta"), GroupId::BnBeta(br, j), block.bn.trainable));
            out.push((format!("{p}.conv.weight"), GroupId::ConvWeight(br, j), block.conv.trainable));
            out.push((format!("{p}.conv.bias"), GroupId::ConvBias(br, j), block.conv.trainable));
        }
    }
    out.push(("output.weight".into(), GroupId::DenseWeight, true));
    out.push(("output.bias".into(), GroupId::DenseBias, true));
    out
}

fn param_mut<'a>(model: &'a mut ModelGraph<f64>, id: &GroupId) -> &'a mut Vec<f64> {
    match id {
        GroupId::BnGamma(br, j) => &mut model.branches[*br][*j].bn.gamma,
        GroupId::BnBeta(br, j) => &mut model.branches[*br][*j].bn.beta,
        GroupId::ConvWeight(br, j) => &mut model.branches[*br][*j].conv.weight,
        GroupId::ConvBias(br, j) => &mut model.branches[*br][*j].conv.bias,
        GroupId::DenseWeight => &mut model.dense.weight,
        GroupId::DenseBias => &mut model.dense.bias,
    }
}

fn analytic<'a>(grads: &'a Grads<f64>, id: &GroupId) -> &'a [f64] {
    match id {
        GroupId::BnGamma(br, j) => &grads.branches[*br][*j].dgamma,
        GroupId::BnBeta(br, j) => &grads.branches[*br][*j].dbeta,
        GroupId::ConvWeight(br, j) => &grads.branches[*br][*j].dconv_w,
        GroupId::ConvBias(br, j) => &grads.branches[*br][*j].dconv_b,
        GroupId::DenseWeight => &grads.ddense_w,
        GroupId::DenseBias => &grads.ddense_b,
    }
}

/// Verify every parameter group of `model` on the given batch. The loss is
/// the Train-mode focal loss, so the BN batch-statistics gradient terms are
/// exercised. `samples_per_group` entries are drawn per group (seeded).
pub fn grad_check_model(
    model: &mut ModelGraph<f64>,
    inputs: &[Tensor4<f64>],
    targets: &[usize],
    gamma: f64,
    alpha: &[f64],
    samples_per_group: usize,
    seed: u64,
) -> Result<GradCheckReport, NnError> {
    let (logits, trace) = model.forward(inputs, Mode::Train)?;
    let (_, dlogits) = focal_loss(&logits, targets, gamma, alpha)?;
    let grads = model.backward(&trace, &dlogits);

    let ids = group_ids(model);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut groups = Vec::with_capacity(ids.len());

    for (name, id, trainable) in ids {
        if !trainable {
            groups.push(GroupReport { name, max_rel_err: 0.0, checked: 0, skipped: true });
            continue;
        }
        let len = param_mut(model, &id).len();
        let mut indices: Vec<usize> = (0..len).collect();
        indices.shuffle(&mut rng);
        indices.truncate(samples_per_group.min(len));

        let mut max_rel = 0.0f64;
        for &idx in &indices {
            let orig = param_mut(model, &id)[idx];
            param_mut(model, &id)[idx] = orig + GRADCHECK_EPS;
            let loss_p = run_loss(model, inputs, targets, gamma, alpha)?;
            param_mut(model, &id)[idx] = orig - GRADCHECK_EPS;
            let loss_m = run_loss(model, inputs, targets, gamma, alpha)?;
            param_mut(model, &id)[idx] = orig;

            let numeric = (loss_p - loss_m) / (2.0 * GRADCHECK_EPS);
            let a = analytic(&grads, &id)[idx];
            let denom = numeric.abs().max(a.abs()).max(1e-6);
            max_rel = max_rel.max((numeric - a).abs() / denom);
        }
        groups.push(GroupReport { name, max_rel_err: max_rel, checked: indices.len(), skipped: false });
    }
    Ok(GradCheckReport { groups })
}

fn run_loss(
    model: &mut ModelGraph<f64>,
    inputs: &[Tensor4<f64>],
    targets: &[usize],
    gamma: f64,
    alpha: &[f64],
) -> Result<f64, NnError> {
    let (logits, _) = model.forward(inputs, Mode::Train)?;
    let (loss, _) = focal_loss(&logits, targets, gamma, alpha)?;
    Ok(loss)
}
