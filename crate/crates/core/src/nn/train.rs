//! Minibatch training loop with per-epoch shuffling and
//! best-validation-accuracy model selection.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{AdamHyper, AdamState};
use super::loss::focal_loss;
use super::model::{Mode, ModelGraph};
use super::{NnError, Scalar, Tensor4};
use crate::seeds::splitmix;

/// One training sample: per-branch feature matrices (row-major frames x
/// bins, f32), a class index and the owning subject.
#[derive(Debug, Clone)]
pub struct SampleFeatures {
    pub branches: Vec<Vec<f32>>,
    pub label: usize,
    pub subject_id: String,
}

/// A set of samples sharing per-branch feature shapes.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    /// (frames, bins) per branch.
    pub branch_dims: Vec<(usize, usize)>,
    pub samples: Vec<SampleFeatures>,
}

impl FeatureSet {
    pub fn new(branch_dims: Vec<(usize, usize)>) -> Self {
        Self { branch_dims, samples: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn push(&mut self, sample: SampleFeatures) {
        debug_assert_eq!(sample.branches.len(), self.branch_dims.len());
        self.samples.push(sample);
    }

    /// Stack the given samples into one tensor per branch.
    pub fn batch_tensors<S: Scalar>(&self, indices: &[usize]) -> Vec<Tensor4<S>> {
        self.branch_dims
            .iter()
            .enumerate()
            .map(|(br, &(h, w))| {
                let mut t = Tensor4::<S>::zeros(indices.len(), 1, h, w);
                for (slot, &idx) in indices.iter().enumerate() {
                    let src = &self.samples[idx].branches[br];
                    let dst = &mut t.data[slot * h * w..(slot + 1) * h * w];
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d = S::from_f64(s as f64);
                    }
                }
                t
            })
            .collect()
    }

    pub fn labels(&self, indices: &[usize]) -> Vec<usize> {
        indices.iter().map(|&i| self.samples[i].label).collect()
    }

    /// Per-class inverse-frequency alpha weights, normalized to mean 1.
    /// Classes absent from the set get weight 1.
    pub fn inverse_frequency_alpha(&self, num_classes: usize) -> Vec<f64> {
        let mut counts = vec![0usize; num_classes];
        for s in &self.samples {
            if s.label < num_classes {
                counts[s.label] += 1;
            }
        }
        let raw: Vec<f64> = counts
            .iter()
            .map(|&c| if c == 0 { 1.0 } else { self.samples.len() as f64 / c as f64 })
            .collect();
        let mean = raw.iter().sum::<f64>() / num_classes as f64;
        raw.into_iter().map(|a| a / mean).collect()
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub focal_gamma: f64,
    /// Per-class loss weights; length must equal the model's class count.
    pub focal_alpha: Vec<f64>,
    pub shuffle_seed: u64,
}

impl TrainConfig {
    /// Paper-faithful batch sizes: 32 for the source domain, 15 for the
    /// target domain; 150 epochs, focal gamma 2.
    pub fn source_default(num_classes: usize, seed: u64) -> Self {
        Self { batch_size: 32, epochs: 150, focal_gamma: 2.0, focal_alpha: vec![1.0; num_classes], shuffle_seed: seed }
    }

    pub fn target_default(num_classes: usize, seed: u64) -> Self {
        Self { batch_size: 15, epochs: 150, focal_gamma: 2.0, focal_alpha: vec![1.0; num_classes], shuffle_seed: seed }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    /// Epoch whose snapshot the model ended up with (ties break earliest).
    pub best_epoch: Option<usize>,
    pub best_val_accuracy: f64,
}

/// Predicted class per sample: argmax of the inference logits (softmax is
/// monotone, ties pick the lowest index).
pub fn predict<S: Scalar>(model: &ModelGraph<S>, set: &FeatureSet, indices: &[usize]) -> Result<Vec<usize>, NnError> {
    if indices.is_empty() {
        return Ok(Vec::new());
    }
    let mut preds = Vec::with_capacity(indices.len());
    for chunk in indices.chunks(64) {
        let inputs: Vec<Tensor4<S>> = set.batch_tensors(chunk);
        let logits = model.infer_logits(&inputs)?;
        for b in 0..logits.rows {
            let row = logits.row(b);
            let mut best = 0usize;
            for (k, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = k;
                }
            }
            preds.push(best);
        }
    }
    Ok(preds)
}

/// Fraction of correctly classified samples, in inference mode.
pub fn evaluate_accuracy<S: Scalar>(model: &ModelGraph<S>, set: &FeatureSet) -> Result<f64, NnError> {
    if set.is_empty() {
        return Ok(0.0);
    }
    let indices: Vec<usize> = (0..set.len()).collect();
    let preds = predict(model, set, &indices)?;
    let correct = preds
        .iter()
        .zip(&set.samples)
        .filter(|(p, s)| **p == s.label)
        .count();
    Ok(correct as f64 / set.len() as f64)
}

/// Train `model` in place. Each epoch shuffles (seeded by shuffle_seed and
/// the epoch index), walks minibatches with Adam, then records validation
/// accuracy; when done the model is restored to the snapshot of the
/// best-validation-accuracy epoch. Zero epochs leave the initial weights.
pub fn train<S: Scalar>(
    model: &mut ModelGraph<S>,
    train_set: &FeatureSet,
    val_set: &FeatureSet,
    config: &TrainConfig,
    hyper: &AdamHyper,
) -> Result<TrainHistory, NnError> {
    if train_set.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    if config.focal_alpha.len() != model.num_classes {
        return Err(NnError::ShapeError(format!(
            "{} focal alphas for {} classes",
            config.focal_alpha.len(),
            model.num_classes
        )));
    }

    let mut adam = AdamState::<S>::new(&model.adam_group_sizes());
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, ModelGraph<S>)> = None;

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix(
            config.shuffle_seed ^ (epoch as u64).wrapping_mul(0x9e37_79b9),
        ));
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size.max(1)) {
            let inputs: Vec<Tensor4<S>> = train_set.batch_tensors(batch);
            let targets = train_set.labels(batch);
            let (logits, trace) = model.forward(&inputs, Mode::Train)?;
            let (loss, dlogits) =
                focal_loss(&logits, &targets, config.focal_gamma, &config.focal_alpha)?;
            loss_sum += loss.to_f64() * batch.len() as f64;
            let grads = model.backward(&trace, &dlogits);
            model.adam_step(hyper, &mut adam, &grads);
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let val_accuracy = evaluate_accuracy(model, val_set)?;
        history.push(EpochStats { epoch, train_loss, val_accuracy });

        let improved = match &best {
            None => true,
            Some((_, acc, _)) => val_accuracy > *acc,
        };
        if improved {
            best = Some((epoch, val_accuracy, model.clone()));
        }
    }

    let (best_epoch, best_val_accuracy) = match best {
        Some((epoch, acc, snapshot)) => {
            *model = snapshot;
            (Some(epoch), acc)
        }
        None => (None, 0.0),
    };
    Ok(TrainHistory { epochs: history, best_epoch, best_val_accuracy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::model::ArchitectureSpec;

    fn tiny_arch() -> ArchitectureSpec {
        ArchitectureSpec { channels: vec![4, 8], pool_after: vec![true, true] }
    }

    /// Two well-separated classes: constant-level patches with opposite
    /// gradients along the time axis.
    fn toy_set(n_per_class: usize, h: usize, w: usize, seed: u64) -> FeatureSet {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut set = FeatureSet::new(vec![(h, w)]);
        for i in 0..2 * n_per_class {
            let label = i % 2;
            let sign = if label == 0 { 1.0f32 } else { -1.0 };
            let feat: Vec<f32> = (0..h * w)
                .map(|j| {
                    let ramp = (j / w) as f32 / h as f32 - 0.5;
                    sign * ramp + rng.gen_range(-0.05..0.05)
                })
                .collect();
            set.push(SampleFeatures {
                branches: vec![feat],
                label,
                subject_id: format!("s{i}"),
            });
        }
        set
    }

    #[test]
    fn empty_train_set_rejected() {
        let mut model = ModelGraph::<f32>::new_glorot(tiny_arch(), 1, 2, 1);
        let empty = FeatureSet::new(vec![(8, 8)]);
        let cfg = TrainConfig {
            batch_size: 4,
            epochs: 1,
            focal_gamma: 2.0,
            focal_alpha: vec![1.0, 1.0],
            shuffle_seed: 0,
        };
        assert_eq!(
            train(&mut model, &empty, &empty, &cfg, &AdamHyper::default()),
            Err(NnError::EmptyDataset)
        );
    }

    #[test]
    fn zero_epochs_returns_initial_weights() {
        let mut model = ModelGraph::<f32>::new_glorot(tiny_arch(), 1, 2, 2);
        let reference = model.clone();
        let set = toy_set(4, 8, 8, 3);
        let cfg = TrainConfig {
            batch_size: 4,
            epochs: 0,
            focal_gamma: 2.0,
            focal_alpha: vec![1.0, 1.0],
            shuffle_seed: 0,
        };
        let history = train(&mut model, &set, &set, &cfg, &AdamHyper::default()).unwrap();
        assert!(history.epochs.is_empty());
        assert_eq!(history.best_epoch, None);
        for (a, b) in model.named_params().iter().zip(reference.named_params().iter()) {
            assert_eq!(a.2, b.2);
        }
    }

    #[test]
    fn learns_a_separable_toy_problem() {
        let mut model = ModelGraph::<f32>::new_glorot(tiny_arch(), 1, 2, 7);
        let train_set = toy_set(10, 8, 8, 5);
        let cfg = TrainConfig {
            batch_size: 8,
            epochs: 60,
            focal_gamma: 2.0,
            focal_alpha: vec![1.0, 1.0],
            shuffle_seed: 11,
        };
        let hyper = AdamHyper { lr: 3e-3, ..AdamHyper::default() };
        let history = train(&mut model, &train_set, &train_set, &cfg, &hyper).unwrap();
        let acc = evaluate_accuracy(&model, &train_set).unwrap();
        assert!(acc >= 0.95, "accuracy {acc}, history tail {:?}", history.epochs.last());
    }

    #[test]
    fn identical_seeds_identical_history() {
        let run = || {
            let mut model = ModelGraph::<f32>::new_glorot(tiny_arch(), 1, 2, 9);
            let set = toy_set(6, 8, 8, 13);
            let cfg = TrainConfig {
                batch_size: 4,
                epochs: 3,
                focal_gamma: 2.0,
                focal_alpha: vec![1.0, 1.0],
                shuffle_seed: 21,
            };
            let history = train(&mut model, &set, &set, &cfg, &AdamHyper::default()).unwrap();
            let params: Vec<Vec<f32>> =
                model.named_params().iter().map(|(_, _, v)| v.to_vec()).collect();
            (history, params)
        };
        let (h1, p1) = run();
        let (h2, p2) = run();
        assert_eq!(h1, h2);
        assert_eq!(p1, p2);
    }

    #[test]
    fn inverse_frequency_alpha_normalized() {
        let mut set = FeatureSet::new(vec![(4, 4)]);
        for i in 0..9 {
            set.push(SampleFeatures {
                branches: vec![vec![0.0; 16]],
                label: if i < 6 { 0 } else { 1 },
                subject_id: "s".into(),
            });
        }
        let alpha = set.inverse_frequency_alpha(2);
        // inverse frequencies 9/6 and 9/3, normalized to mean 1
        assert!((alpha[0] - (1.5 / 2.25)).abs() < 1e-12);
        assert!((alpha[1] - (3.0 / 2.25)).abs() < 1e-12);
        let mean = (alpha[0] + alpha[1]) / 2.0;
        assert!((mean - 1.0).abs() < 1e-12);
    }
}
