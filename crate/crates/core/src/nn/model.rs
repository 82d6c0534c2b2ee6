//! The fixed-shape network graph: 1-3 branches of 7 BN-Conv2D-ReLU blocks
//! (maxpool after the first five), per-branch GAP, feature concatenation,
//! and a dense softmax head.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_update_group, AdamHyper, AdamState};
use super::init::glorot_uniform_from;
use super::ops::{
    batchnorm_backward, batchnorm_forward, conv2d_backward, conv2d_forward, dense_backward,
    dense_forward, gap_backward, gap_forward, maxpool_backward, maxpool_forward, relu_backward,
    relu_forward, BnCache, ConvCache, PoolCache,
};
use super::{Matrix, NnError, Scalar, Tensor4};

pub use super::ops::BnMode as Mode;

/// Channel/pool layout of one branch. The head (GAP + dense) is implied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchitectureSpec {
    /// Output channels of each convolutional block.
    pub channels: Vec<usize>,
    /// Whether a 2x2 maxpool follows the block.
    pub pool_after: Vec<bool>,
}

impl ArchitectureSpec {
    /// The 7-block layout used everywhere: channels
    /// [16, 32, 64, 64, 128, 128, 256], pooling after blocks 1-5.
    pub fn standard() -> Self {
        Self {
            channels: vec![16, 32, 64, 64, 128, 128, 256],
            pool_after: vec![true, true, true, true, true, false, false],
        }
    }

    pub fn blocks(&self) -> usize {
        self.channels.len()
    }

    pub fn block_in_channels(&self, block: usize) -> usize {
        if block == 0 {
            1
        } else {
            self.channels[block - 1]
        }
    }

    /// GAP feature width of one branch.
    pub fn feature_dim(&self) -> usize {
        *self.channels.last().expect("architecture has blocks")
    }
}

#[derive(Debug, Clone)]
pub struct BnParams<S> {
    pub gamma: Vec<S>,
    pub beta: Vec<S>,
    pub running_mean: Vec<S>,
    pub running_var: Vec<S>,
    pub trainable: bool,
}

impl<S: Scalar> BnParams<S> {
    fn identity(channels: usize) -> Self {
        Self {
            gamma: vec![S::ONE; channels],
            beta: vec![S::ZERO; channels],
            running_mean: vec![S::ZERO; channels],
            running_var: vec![S::ONE; channels],
            trainable: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConvParams<S> {
    pub weight: Vec<S>,
    pub bias: Vec<S>,
    pub in_c: usize,
    pub out_c: usize,
    pub trainable: bool,
}

#[derive(Debug, Clone)]
pub struct ConvBlock<S> {
    pub bn: BnParams<S>,
    pub conv: ConvParams<S>,
}

#[derive(Debug, Clone)]
pub struct DenseParams<S> {
    pub weight: Vec<S>,
    pub bias: Vec<S>,
    pub in_dim: usize,
    pub out_dim: usize,
}

#[derive(Debug, Clone)]
pub struct ModelGraph<S> {
    pub arch: ArchitectureSpec,
    pub branches: Vec<Vec<ConvBlock<S>>>,
    pub dense: DenseParams<S>,
    pub num_classes: usize,
}

pub struct BlockTrace<S> {
    bn: BnCache<S>,
    conv: ConvCache<S>,
    relu_out: Tensor4<S>,
    pool: Option<PoolCache>,
}

pub struct BranchTrace<S> {
    blocks: Vec<BlockTrace<S>>,
    gap_in_dims: (usize, usize, usize),
}

/// Everything backward needs from one forward pass.
pub struct Trace<S> {
    branches: Vec<BranchTrace<S>>,
    concat: Matrix<S>,
}

impl<S: Scalar> Trace<S> {
    /// The concatenated per-branch GAP features (batch x 256·branches).
    pub fn concat_features(&self) -> &Matrix<S> {
        &self.concat
    }
}

/// Gradients mirroring the parameter layout. Frozen conv groups come back
/// as empty vectors.
pub struct BlockGrads<S> {
    pub dgamma: Vec<S>,
    pub dbeta: Vec<S>,
    pub dconv_w: Vec<S>,
    pub dconv_b: Vec<S>,
}

pub struct Grads<S> {
    pub branches: Vec<Vec<BlockGrads<S>>>,
    pub ddense_w: Vec<S>,
    pub ddense_b: Vec<S>,
}

impl<S: Scalar> ModelGraph<S> {
    /// Fresh Glorot-initialized model. One seeded stream initializes every
    /// tensor in a fixed order, so equal seeds give identical models.
    pub fn new_glorot(
        arch: ArchitectureSpec,
        n_branches: usize,
        num_classes: usize,
        seed: u64,
    ) -> Self {
        assert!((1..=3).contains(&n_branches), "1-3 branches supported");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let branches = (0..n_branches)
            .map(|_| {
                (0..arch.blocks())
                    .map(|j| {
                        let in_c = arch.block_in_channels(j);
                        let out_c = arch.channels[j];
                        ConvBlock {
                            bn: BnParams::identity(in_c),
                            conv: ConvParams {
                                weight: glorot_uniform_from(
                                    in_c * 9,
                                    out_c * 9,
                                    out_c * in_c * 9,
                                    &mut rng,
                                ),
                                bias: vec![S::ZERO; out_c],
                                in_c,
                                out_c,
                                trainable: true,
                            },
                        }
                    })
                    .collect()
            })
            .collect();
        let in_dim = arch.feature_dim() * n_branches;
        let dense = DenseParams {
            weight: glorot_uniform_from(in_dim, num_classes, in_dim * num_classes, &mut rng),
            bias: vec![S::ZERO; num_classes],
            in_dim,
            out_dim: num_classes,
        };
        Self { arch, branches, dense, num_classes }
    }

    pub fn n_branches(&self) -> usize {
        self.branches.len()
    }

    fn check_inputs(&self, inputs: &[Tensor4<S>]) -> Result<usize, NnError> {
        if inputs.len() != self.branches.len() {
            return Err(NnError::ShapeError(format!(
                "{} inputs for {} branches",
                inputs.len(),
                self.branches.len()
            )));
        }
        let batch = inputs[0].b;
        for (i, t) in inputs.iter().enumerate() {
            if t.c != 1 {
                return Err(NnError::ShapeError(format!("input {i} has {} channels", t.c)));
            }
            if t.b != batch {
                return Err(NnError::ShapeError("branch batch sizes differ".into()));
            }
        }
        Ok(batch)
    }

    /// Forward pass with trace. Train mode updates BN running statistics in
    /// place (on every block, frozen or not).
    pub fn forward(
        &mut self,
        inputs: &[Tensor4<S>],
        mode: Mode,
    ) -> Result<(Matrix<S>, Trace<S>), NnError> {
        let batch = self.check_inputs(inputs)?;
        let n_branches = self.branches.len();
        let feat = self.arch.feature_dim();
        let mut branch_traces = Vec::with_capacity(n_branches);
        let mut concat = Matrix::zeros(batch, feat * n_branches);

        for (br, input) in inputs.iter().enumerate() {
            let mut x = input.clone();
            let mut blocks = Vec::with_capacity(self.arch.blocks());
            for j in 0..self.arch.blocks() {
                let block = &mut self.branches[br][j];
                let (y_bn, bn_cache, update) = batchnorm_forward(
                    &x,
                    &block.bn.gamma,
                    &block.bn.beta,
                    &block.bn.running_mean,
                    &block.bn.running_var,
                    mode,
                )?;
                if let Some(u) = update {
                    block.bn.running_mean = u.mean;
                    block.bn.running_var = u.var;
                }
                let (y_conv, conv_cache) = conv2d_forward(
                    &y_bn,
                    &block.conv.weight,
                    &block.conv.bias,
                    block.conv.in_c,
                    block.conv.out_c,
                )?;
                let relu_out = relu_forward(&y_conv);
                let (next, pool) = if self.arch.pool_after[j] {
                    let (pooled, cache) = maxpool_forward(&relu_out);
                    (pooled, Some(cache))
                } else {
                    (relu_out.clone(), None)
                };
                blocks.push(BlockTrace { bn: bn_cache, conv: conv_cache, relu_out, pool });
                x = next;
            }
            let gap_in_dims = (x.c, x.h, x.w);
            let feats = gap_forward(&x);
            for b in 0..batch {
                concat.row_mut(b)[br * feat..(br + 1) * feat].copy_from_slice(feats.row(b));
            }
            branch_traces.push(BranchTrace { blocks, gap_in_dims });
        }

        let logits = dense_forward(&concat, &self.dense.weight, &self.dense.bias, self.num_classes);
        Ok((logits, Trace { branches: branch_traces, concat }))
    }

    /// Inference logits from the running statistics; no mutation, no trace.
    pub fn infer_logits(&self, inputs: &[Tensor4<S>]) -> Result<Matrix<S>, NnError> {
        let batch = self.check_inputs(inputs)?;
        let n_branches = self.branches.len();
        let feat = self.arch.feature_dim();
        let mut concat = Matrix::zeros(batch, feat * n_branches);
        for (br, input) in inputs.iter().enumerate() {
            let mut x = input.clone();
            for j in 0..self.arch.blocks() {
                let block = &self.branches[br][j];
                let (y_bn, _, _) = batchnorm_forward(
                    &x,
                    &block.bn.gamma,
                    &block.bn.beta,
                    &block.bn.running_mean,
                    &block.bn.running_var,
                    Mode::Infer,
                )?;
                let (y_conv, _) = conv2d_forward(
                    &y_bn,
                    &block.conv.weight,
                    &block.conv.bias,
                    block.conv.in_c,
                    block.conv.out_c,
                )?;
                let relu_out = relu_forward(&y_conv);
                x = if self.arch.pool_after[j] {
                    maxpool_forward(&relu_out).0
                } else {
                    relu_out
                };
            }
            let feats = gap_forward(&x);
            for b in 0..batch {
                concat.row_mut(b)[br * feat..(br + 1) * feat].copy_from_slice(feats.row(b));
            }
        }
        Ok(dense_forward(&concat, &self.dense.weight, &self.dense.bias, self.num_classes))
    }

    /// Backpropagate from the logit gradient. Input gradients always flow
    /// (earlier BN layers need them); weight gradients are skipped for
    /// frozen conv groups.
    pub fn backward(&self, trace: &Trace<S>, dlogits: &Matrix<S>) -> Grads<S> {
        let feat = self.arch.feature_dim();
        let (dconcat, ddense_w, ddense_b) =
            dense_backward(&trace.concat, &self.dense.weight, dlogits);

        let mut branch_grads = Vec::with_capacity(self.branches.len());
        for (br, btrace) in trace.branches.iter().enumerate() {
            let batch = dlogits.rows;
            let mut dgap = Matrix::zeros(batch, feat);
            for b in 0..batch {
                dgap.row_mut(b).copy_from_slice(&dconcat.row(b)[br * feat..(br + 1) * feat]);
            }
            let (c, h, w) = btrace.gap_in_dims;
            let mut d = gap_backward(&dgap, c, h, w);

            let mut grads_rev = Vec::with_capacity(self.arch.blocks());
            for j in (0..self.arch.blocks()).rev() {
                let block = &self.branches[br][j];
                let t = &btrace.blocks[j];
                if let Some(pool) = &t.pool {
                    d = maxpool_backward(pool, &d);
                }
                d = relu_backward(&t.relu_out, &d);
                let (dx_conv, dconv_w, dconv_b) = conv2d_backward(
                    &t.conv,
                    &block.conv.weight,
                    &d,
                    block.conv.in_c,
                    block.conv.out_c,
                    block.conv.trainable,
                );
                let (dx_bn, dgamma, dbeta) = batchnorm_backward(&t.bn, &block.bn.gamma, &dx_conv);
                grads_rev.push(BlockGrads { dgamma, dbeta, dconv_w, dconv_b });
                d = dx_bn;
            }
            grads_rev.reverse();
            branch_grads.push(grads_rev);
        }
        Grads { branches: branch_grads, ddense_w, ddense_b }
    }

    /// Parameter-group sizes in the fixed optimizer order: per branch, per
    /// block [bn.gamma, bn.beta, conv.weight, conv.bias], then the dense
    /// weight and bias.
    pub fn adam_group_sizes(&self) -> Vec<usize> {
        let mut sizes = Vec::new();
        for branch in &self.branches {
            for block in branch {
                sizes.push(block.bn.gamma.len());
                sizes.push(block.bn.beta.len());
                sizes.push(block.conv.weight.len());
                sizes.push(block.conv.bias.len());
            }
        }
        sizes.push(self.dense.weight.len());
        sizes.push(self.dense.bias.len());
        sizes
    }

    /// One Adam step over all trainable groups. Frozen groups (and their
    /// moments) are untouched; L2 decay applies to conv/dense weights only.
    pub fn adam_step(&mut self, hyper: &AdamHyper, state: &mut AdamState<S>, grads: &Grads<S>) {
        let scale = state.begin_step();
        let mut group = 0;
        for (br, branch) in self.branches.iter_mut().enumerate() {
            for (j, block) in branch.iter_mut().enumerate() {
                let g = &grads.branches[br][j];
                if block.bn.trainable {
                    adam_update_group(hyper, &scale, state.slot_mut(group), &mut block.bn.gamma, &g.dgamma, false);
                    adam_update_group(hyper, &scale, state.slot_mut(group + 1), &mut block.bn.beta, &g.dbeta, false);
                }
                group += 2;
                if block.conv.trainable {
                    adam_update_group(hyper, &scale, state.slot_mut(group), &mut block.conv.weight, &g.dconv_w, true);
                    adam_update_group(hyper, &scale, state.slot_mut(group + 1), &mut block.conv.bias, &g.dconv_b, false);
                }
                group += 2;
            }
        }
        adam_update_group(hyper, &scale, state.slot_mut(group), &mut self.dense.weight, &grads.ddense_w, true);
        adam_update_group(hyper, &scale, state.slot_mut(group + 1), &mut self.dense.bias, &grads.ddense_b, false);
    }

    /// Named parameters in checkpoint order. Shapes: conv weights
    /// (out_c, in_c, 3, 3), dense weight (in_dim, out_dim), the rest flat.
    pub fn named_params(&self) -> Vec<(String, Vec<usize>, &[S])> {
        let mut out: Vec<(String, Vec<usize>, &[S])> = Vec::new();
        for (br, branch) in self.branches.iter().enumerate() {
            for (j, block) in branch.iter().enumerate() {
                let p = format!("branch{br}.block{}", j + 1);
                out.push((format!("{p}.bn.gamma"), vec![block.bn.gamma.len()], &block.bn.gamma));
                out.push((format!("{p}.bn.beta"), vec![block.bn.beta.len()], &block.bn.beta));
                out.push((
                    format!("{p}.bn.running_mean"),
                    vec![block.bn.running_mean.len()],
                    &block.bn.running_mean,
                ));
                out.push((
                    format!("{p}.bn.running_var"),
                    vec![block.bn.running_var.len()],
                    &block.bn.running_var,
                ));
                out.push((
                    format!("{p}.conv.weight"),
                    vec![block.conv.out_c, block.conv.in_c, 3, 3],
                    &block.conv.weight,
                ));
                out.push((format!("{p}.conv.bias"), vec![block.conv.out_c], &block.conv.bias));
            }
        }
        out.push((
            "output.weight".into(),
            vec![self.dense.in_dim, self.dense.out_dim],
            &self.dense.weight,
        ));
        out.push(("output.bias".into(), vec![self.dense.out_dim], &self.dense.bias));
        out
    }

    /// All trainable-flagged parameter bytes, for freeze-contract checks.
    pub fn frozen_conv_snapshot(&self) -> Vec<(String, Vec<S>)> {
        let mut out = Vec::new();
        for (br, branch) in self.branches.iter().enumerate() {
            for (j, block) in branch.iter().enumerate() {
                if !block.conv.trainable {
                    out.push((format!("branch{br}.block{}.conv.weight", j + 1), block.conv.weight.clone()));
                    out.push((format!("branch{br}.block{}.conv.bias", j + 1), block.conv.bias.clone()));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::loss::focal_loss;

    fn tiny_arch() -> ArchitectureSpec {
        ArchitectureSpec {
            channels: vec![4, 6, 8],
            pool_after: vec![true, true, false],
        }
    }

    fn rand_input(b: usize, h: usize, w: usize, seed: u64) -> Tensor4<f64> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor4::from_vec(b, 1, h, w, (0..b * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    #[test]
    fn forward_shapes_single_branch() {
        let mut m = ModelGraph::<f64>::new_glorot(ArchitectureSpec::standard(), 1, 4, 7);
        let x = rand_input(2, 16, 45, 1);
        let (logits, _) = m.forward(&[x], Mode::Train).unwrap();
        assert_eq!((logits.rows, logits.cols), (2, 4));
    }

    #[test]
    fn forward_shapes_multi_branch() {
        let mut m = ModelGraph::<f64>::new_glorot(ArchitectureSpec::standard(), 3, 2, 7);
        let (logits, _) = m
            .forward(
                &[rand_input(2, 16, 45, 1), rand_input(2, 8, 45, 2), rand_input(2, 12, 45, 3)],
                Mode::Infer,
            )
            .unwrap();
        assert_eq!((logits.rows, logits.cols), (2, 2));
        assert_eq!(m.dense.in_dim, 768);
    }

    #[test]
    fn input_validation() {
        let mut m = ModelGraph::<f64>::new_glorot(tiny_arch(), 2, 2, 1);
        assert!(m.forward(&[rand_input(1, 8, 8, 1)], Mode::Train).is_err());
        let two_ch = Tensor4::<f64>::zeros(1, 2, 8, 8);
        assert!(m.forward(&[two_ch.clone(), two_ch], Mode::Train).is_err());
    }

    #[test]
    fn same_seed_same_model() {
        let a = ModelGraph::<f32>::new_glorot(tiny_arch(), 2, 2, 42);
        let b = ModelGraph::<f32>::new_glorot(tiny_arch(), 2, 2, 42);
        for (x, y) in a.named_params().iter().zip(b.named_params().iter()) {
            assert_eq!(x.0, y.0);
            assert_eq!(x.2, y.2);
        }
    }

    #[test]
    fn train_mode_updates_running_stats_infer_does_not() {
        let mut m = ModelGraph::<f64>::new_glorot(tiny_arch(), 1, 2, 3);
        let before = m.branches[0][0].bn.running_mean.clone();
        let x = rand_input(3, 10, 10, 4);
        m.forward(&[x.clone()], Mode::Infer).unwrap();
        assert_eq!(m.branches[0][0].bn.running_mean, before);
        m.forward(&[x], Mode::Train).unwrap();
        assert_ne!(m.branches[0][0].bn.running_mean, before);
    }

    #[test]
    fn backward_matches_finite_differences_on_a_weight() {
        let mut m = ModelGraph::<f64>::new_glorot(tiny_arch(), 1, 2, 5);
        let x = rand_input(2, 9, 9, 6);
        let targets = [0usize, 1];
        let alpha = [1.0, 1.0];

        let (logits, trace) = m.forward(&[x.clone()], Mode::Train).unwrap();
        let (_, dlogits) = focal_loss(&logits, &targets, 2.0, &alpha).unwrap();
        let grads = m.backward(&trace, &dlogits);

        let eps = 1e-6;
        // block-2 conv weight, a middle entry
        let idx = m.branches[0][1].conv.weight.len() / 2;
        let orig = m.branches[0][1].conv.weight[idx];
        m.branches[0][1].conv.weight[idx] = orig + eps;
        let (lp, _) = m.forward(&[x.clone()], Mode::Train).unwrap();
        let (loss_p, _) = focal_loss(&lp, &targets, 2.0, &alpha).unwrap();
        m.branches[0][1].conv.weight[idx] = orig - eps;
        let (lm, _) = m.forward(&[x.clone()], Mode::Train).unwrap();
        let (loss_m, _) = focal_loss(&lm, &targets, 2.0, &alpha).unwrap();
        m.branches[0][1].conv.weight[idx] = orig;

        let numeric = (loss_p - loss_m) / (2.0 * eps);
        let analytic = grads.branches[0][1].dconv_w[idx];
        let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-8);
        assert!(rel < 1e-4, "numeric {numeric} analytic {analytic}");
    }

    #[test]
    fn frozen_conv_skips_weight_gradients_but_propagates() {
        let mut m = ModelGraph::<f64>::new_glorot(tiny_arch(), 1, 2, 8);
        m.branches[0][1].conv.trainable = false;
        let x = rand_input(2, 9, 9, 9);
        let (logits, trace) = m.forward(&[x], Mode::Train).unwrap();
        let (_, dlogits) = focal_loss(&logits, &[0, 1], 2.0, &[1.0, 1.0]).unwrap();
        let grads = m.backward(&trace, &dlogits);
        assert!(grads.branches[0][1].dconv_w.is_empty());
        // the BN below the frozen conv still gets a gradient
        assert!(grads.branches[0][0].dgamma.iter().any(|g| g.abs() > 0.0));
    }
}
