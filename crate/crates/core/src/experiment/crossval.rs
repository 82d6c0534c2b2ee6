//! Subject-wise cross-validation: pretrain (or load) once, then for every
//! (run seed, fold) pair augment the training split, build features,
//! assemble and fine-tune the model, and evaluate the held-out subjects.
//! Fold-run jobs are independent and run in parallel; the report is a
//! deterministic ordered merge.

use std::collections::BTreeSet;

use super::config::{AlphaMode, DataConfig, ExperimentConfig, PretrainSource};
use super::pipeline::build_feature_set;
use super::variant::{InputCombo, PaddingKind, TransferSpec, Variant};
use super::ExperimentError;
use crate::audio::{RespiratoryCycle, Split};
use crate::augment::{apply_plan, AugmentPlan};
use crate::dataio::{
    build_folds, synth_source_dataset, synth_target_dataset, Fold, SubjectRecord, SynthSpec,
};
use crate::metrics::{compute_metrics, ConfusionCounts, MetricsReport};
use crate::nn::{predict, ArchitectureSpec, ModelGraph, TrainConfig};
use crate::seeds::derive_seed;
use crate::transfer::{
    apply_freeze_policy, build_multi_input, build_single_from_pretrained, fine_tune, pretrain,
    PretrainedModel,
};
use crate::{parallel, transfer};

const SALT_AUGMENT: u64 = 0xA1;
const SALT_INIT: u64 = 0xA2;
const SALT_SHUFFLE: u64 = 0xA3;

#[derive(Debug, Clone)]
pub struct FoldRunResult {
    pub run_seed: u64,
    pub fold: usize,
    pub counts: ConfusionCounts,
    pub metrics: MetricsReport,
    pub best_epoch: Option<usize>,
    pub best_val_accuracy: f64,
}

/// Mean and standard deviation (over runs) of each metric.
#[derive(Debug, Clone, Copy)]
pub struct MetricsSummary {
    pub mean: MetricsReport,
    pub std: MetricsReport,
}

#[derive(Debug, Clone)]
pub struct CrossvalReport {
    pub variant: String,
    pub config_hash: String,
    pub n_runs: usize,
    pub n_folds: usize,
    /// Run-major, fold-minor; n_runs * n_folds entries.
    pub entries: Vec<FoldRunResult>,
    /// Per run: confusion counts pooled over folds, then metrics (micro).
    pub per_run_micro: Vec<(u64, MetricsReport)>,
    pub micro: MetricsSummary,
    /// Mean F-score over all fold-run entries (macro view).
    pub macro_f_mean: f64,
}

/// Load or train the single-input source model named by the config.
pub fn resolve_pretrained(
    cfg: &ExperimentConfig,
    padding: PaddingKind,
) -> Result<PretrainedModel, ExperimentError> {
    let pc = cfg.pretraining.as_ref().ok_or_else(|| {
        ExperimentError::Config("transfer variant needs a [pretraining] section".into())
    })?;
    match &pc.source {
        PretrainSource::Checkpoint { path } => {
            Ok(PretrainedModel::load(path, ArchitectureSpec::standard())?)
        }
        PretrainSource::Synth { subjects_per_class, cycles_per_subject, seed } => {
            let cycles = synth_source_dataset(*subjects_per_class, *cycles_per_subject, *seed);
            // hold out the last subject of each class for validation when
            // there is more than one subject per class
            let val_suffix = format!("{:02}", subjects_per_class.saturating_sub(1));
            let is_val = |c: &RespiratoryCycle| {
                *subjects_per_class > 1 && c.subject_id.ends_with(&val_suffix)
            };
            let mut train_cycles: Vec<RespiratoryCycle> =
                cycles.iter().filter(|c| !is_val(c)).cloned().collect();
            for c in train_cycles.iter_mut() {
                c.split = Split::Train;
            }
            let val_refs: Vec<&RespiratoryCycle> = cycles.iter().filter(|c| is_val(c)).collect();

            let plan = AugmentPlan::source(derive_seed(*seed, "pretrain", 0, SALT_AUGMENT));
            let augmented = apply_plan(&train_cycles, &plan)?;
            let aug_refs: Vec<&RespiratoryCycle> = augmented.iter().collect();
            let inputs = [transfer::BranchInput::Cycle];
            let train_set = build_feature_set(&aug_refs, &inputs, None, padding)?;
            let val_set = if val_refs.is_empty() {
                train_set.clone()
            } else {
                build_feature_set(&val_refs, &inputs, None, padding)?
            };

            let train_cfg = TrainConfig {
                batch_size: pc.batch_size,
                epochs: pc.epochs,
                focal_gamma: cfg.train.focal_gamma,
                focal_alpha: match cfg.train.alpha {
                    AlphaMode::Uniform => vec![1.0; 4],
                    AlphaMode::InverseFrequency => train_set.inverse_frequency_alpha(4),
                },
                shuffle_seed: derive_seed(*seed, "pretrain", 0, SALT_SHUFFLE),
            };
            let hyper = crate::nn::AdamHyper {
                lr: pc.learning_rate,
                l2_lambda: cfg.train.l2,
                ..Default::default()
            };
            let (pm, _history) = pretrain(&train_set, &val_set, &train_cfg, &hyper, 4, *seed)?;
            Ok(pm)
        }
    }
}

fn load_target(
    cfg: &ExperimentConfig,
) -> Result<(Vec<SubjectRecord>, Vec<RespiratoryCycle>), ExperimentError> {
    match &cfg.data {
        DataConfig::Synth { normal_subjects, crackle_subjects, cycles_per_subject, seed } => {
            Ok(synth_target_dataset(&SynthSpec {
                n_normal_subjects: *normal_subjects,
                n_crackle_subjects: *crackle_subjects,
                cycles_per_subject: *cycles_per_subject,
                seed: *seed,
            }))
        }
        DataConfig::Manifest { path } => Ok(crate::dataio::load_target_dataset(path)?),
    }
}

struct JobContext<'a> {
    cfg: &'a ExperimentConfig,
    variant: &'a Variant,
    cycles: &'a [RespiratoryCycle],
    pretrained: Option<&'a PretrainedModel>,
}

fn run_one(
    ctx: &JobContext<'_>,
    fold: &Fold,
    fold_idx: usize,
    run_seed: u64,
) -> Result<FoldRunResult, ExperimentError> {
    run_one_inner(ctx, fold, fold_idx, run_seed).map(|(r, _)| r)
}

/// Train and evaluate a single (fold, seed) job; returns the trained model
/// alongside the result. Used by the `finetune` CLI subcommand.
pub fn run_single_fold(
    cfg: &ExperimentConfig,
    fold_idx: usize,
    run_seed: u64,
) -> Result<(FoldRunResult, ModelGraph<f32>), ExperimentError> {
    let variant = cfg.variant()?;
    let (subjects, cycles) = load_target(cfg)?;
    let plan = build_folds(&subjects, cfg.folds, cfg.fold_seed)?;
    if fold_idx >= plan.folds.len() {
        return Err(ExperimentError::Config(format!(
            "fold {fold_idx} outside 0..{}",
            plan.folds.len()
        )));
    }
    let pretrained = match variant.transfer {
        TransferSpec::FineTune { .. } => Some(resolve_pretrained(cfg, variant.padding)?),
        TransferSpec::Scratch => None,
    };
    let ctx = JobContext {
        cfg,
        variant: &variant,
        cycles: &cycles,
        pretrained: pretrained.as_ref(),
    };
    let (result, model) = run_one_inner(&ctx, &plan.folds[fold_idx], fold_idx, run_seed)?;
    Ok((result, model.expect("run_one_inner returns the model")))
}

fn run_one_inner(
    ctx: &JobContext<'_>,
    fold: &Fold,
    fold_idx: usize,
    run_seed: u64,
) -> Result<(FoldRunResult, Option<ModelGraph<f32>>), ExperimentError> {
    let variant = ctx.variant;
    let inputs = variant.combo.branch_inputs();

    let mut train_cycles: Vec<RespiratoryCycle> = ctx
        .cycles
        .iter()
        .filter(|c| fold.train.contains(&c.subject_id))
        .cloned()
        .collect();
    for c in train_cycles.iter_mut() {
        c.split = Split::Train;
    }
    let val_refs: Vec<&RespiratoryCycle> =
        ctx.cycles.iter().filter(|c| fold.val.contains(&c.subject_id)).collect();
    let test_refs: Vec<&RespiratoryCycle> =
        ctx.cycles.iter().filter(|c| fold.test.contains(&c.subject_id)).collect();

    // hard leakage gate: the three subject sets must not intersect and the
    // augmented training data must stay inside the fold's train subjects
    let train_subjects: BTreeSet<&String> =
        train_cycles.iter().map(|c| &c.subject_id).collect();
    for r in val_refs.iter().chain(test_refs.iter()) {
        if train_subjects.contains(&r.subject_id) {
            return Err(ExperimentError::Leakage(format!(
                "subject {} appears in train and val/test of fold {fold_idx}",
                r.subject_id
            )));
        }
    }

    let plan = AugmentPlan::target(derive_seed(run_seed, "fold", fold_idx, SALT_AUGMENT));
    let augmented = apply_plan(&train_cycles, &plan)?;
    for c in &augmented {
        if !fold.train.contains(&c.subject_id) {
            return Err(ExperimentError::Leakage(format!(
                "augmented sample from non-train subject {}",
                c.subject_id
            )));
        }
    }

    let aug_refs: Vec<&RespiratoryCycle> = augmented.iter().collect();
    let train_set = build_feature_set(&aug_refs, &inputs, variant.ratio, variant.padding)?;
    let val_set = build_feature_set(&val_refs, &inputs, variant.ratio, variant.padding)?;
    let test_set = build_feature_set(&test_refs, &inputs, variant.ratio, variant.padding)?;

    let head_seed = derive_seed(run_seed, "fold", fold_idx, SALT_INIT);
    let mut model: ModelGraph<f32> = match (&variant.transfer, &variant.combo) {
        (TransferSpec::Scratch, combo) => ModelGraph::new_glorot(
            ArchitectureSpec::standard(),
            combo.branch_inputs().len(),
            2,
            head_seed,
        ),
        (TransferSpec::FineTune { .. }, InputCombo::Cyc) => {
            let pm = ctx.pretrained.expect("pretrained model resolved for transfer variants");
            build_single_from_pretrained(pm, 2, head_seed)?
        }
        (TransferSpec::FineTune { .. }, InputCombo::Multi(combo)) => {
            let pm = ctx.pretrained.expect("pretrained model resolved for transfer variants");
            build_multi_input(pm, *combo, 2, head_seed)?
        }
    };
    if let TransferSpec::FineTune { .. } = variant.transfer {
        apply_freeze_policy(&mut model, &variant.transfer.freeze_policy())?;
    }

    let train_cfg = TrainConfig {
        batch_size: ctx.cfg.train.batch_size,
        epochs: ctx.cfg.train.epochs,
        focal_gamma: ctx.cfg.train.focal_gamma,
        focal_alpha: match ctx.cfg.train.alpha {
            AlphaMode::Uniform => vec![1.0; 2],
            AlphaMode::InverseFrequency => train_set.inverse_frequency_alpha(2),
        },
        shuffle_seed: derive_seed(run_seed, "fold", fold_idx, SALT_SHUFFLE),
    };
    let history = fine_tune(
        &mut model,
        &train_set,
        &val_set,
        &train_cfg,
        &ctx.cfg.train.adam_hyper(),
    )?;

    let indices: Vec<usize> = (0..test_set.len()).collect();
    let preds = predict(&model, &test_set, &indices)?;
    let mut counts = ConfusionCounts::default();
    for (pred, sample) in preds.iter().zip(&test_set.samples) {
        counts.record(*pred == 1, sample.label == 1);
    }
    let metrics = compute_metrics(&counts)?;
    let result = FoldRunResult {
        run_seed,
        fold: fold_idx,
        counts,
        metrics,
        best_epoch: history.best_epoch,
        best_val_accuracy: history.best_val_accuracy,
    };
    Ok((result, Some(model)))
}

fn summarize(per_run: &[(u64, MetricsReport)]) -> MetricsSummary {
    let n = per_run.len().max(1) as f64;
    let mean = |f: fn(&MetricsReport) -> f64| per_run.iter().map(|(_, m)| f(m)).sum::<f64>() / n;
    let mean_report = MetricsReport {
        se: mean(|m| m.se),
        p_plus: mean(|m| m.p_plus),
        f_score: mean(|m| m.f_score),
        accuracy: mean(|m| m.accuracy),
    };
    let std = |f: fn(&MetricsReport) -> f64, mu: f64| {
        (per_run.iter().map(|(_, m)| (f(m) - mu) * (f(m) - mu)).sum::<f64>() / n).sqrt()
    };
    MetricsSummary {
        mean: mean_report,
        std: MetricsReport {
            se: std(|m| m.se, mean_report.se),
            p_plus: std(|m| m.p_plus, mean_report.p_plus),
            f_score: std(|m| m.f_score, mean_report.f_score),
            accuracy: std(|m| m.accuracy, mean_report.accuracy),
        },
    }
}

/// Run the full experiment described by the config: every run seed crossed
/// with every fold.
pub fn run_crossval(cfg: &ExperimentConfig) -> Result<CrossvalReport, ExperimentError> {
    let variant = cfg.variant()?;
    let (subjects, cycles) = load_target(cfg)?;
    let plan = build_folds(&subjects, cfg.folds, cfg.fold_seed)?;

    let pretrained = match variant.transfer {
        TransferSpec::FineTune { .. } => Some(resolve_pretrained(cfg, variant.padding)?),
        TransferSpec::Scratch => None,
    };
    let ctx = JobContext {
        cfg,
        variant: &variant,
        cycles: &cycles,
        pretrained: pretrained.as_ref(),
    };

    let jobs: Vec<(u64, usize)> = cfg
        .seeds
        .iter()
        .flat_map(|&seed| (0..plan.folds.len()).map(move |f| (seed, f)))
        .collect();
    let results: Vec<Result<FoldRunResult, ExperimentError>> =
        parallel::map_slice(&jobs, |&(run_seed, fold_idx)| {
            run_one(&ctx, &plan.folds[fold_idx], fold_idx, run_seed)
        });
    let mut entries = Vec::with_capacity(results.len());
    for r in results {
        entries.push(r?);
    }

    let mut per_run_micro = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let mut pooled = ConfusionCounts::default();
        for e in entries.iter().filter(|e| e.run_seed == seed) {
            pooled.add(&e.counts);
        }
        per_run_micro.push((seed, compute_metrics(&pooled)?));
    }
    let micro = summarize(&per_run_micro);
    let macro_f_mean =
        entries.iter().map(|e| e.metrics.f_score).sum::<f64>() / entries.len().max(1) as f64;

    Ok(CrossvalReport {
        variant: cfg.variant.clone(),
        config_hash: cfg.config_hash(),
        n_runs: cfg.seeds.len(),
        n_folds: plan.folds.len(),
        entries,
        per_run_micro,
        micro,
        macro_f_mean,
    })
}

/// Machine-readable results: one record per fold-run evaluation.
pub fn render_results_csv(report: &CrossvalReport) -> String {
    let mut out = String::from("variant,run_seed,fold,tp,fp,tn,fn,se,p_plus,f_score\n");
    for e in &report.entries {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{:.6},{:.6},{:.6}\n",
            report.variant,
            e.run_seed,
            e.fold,
            e.counts.tp,
            e.counts.fp,
            e.counts.tn,
            e.counts.fn_,
            e.metrics.se,
            e.metrics.p_plus,
            e.metrics.f_score
        ));
    }
    out
}

/// Human-readable summary mirroring the Se / P+ / F-score table columns.
pub fn render_report_text(report: &CrossvalReport) -> String {
    let mut out = String::new();
    out.push_str("crackle cross-validation report\n");
    out.push_str(&format!("variant:      {}\n", report.variant));
    out.push_str(&format!("config_hash:  {}\n", report.config_hash));
    out.push_str(&format!("runs x folds: {} x {}\n\n", report.n_runs, report.n_folds));
    out.push_str("per-run micro metrics (counts pooled over folds):\n");
    out.push_str("run_seed      Se      P+       F     Acc\n");
    for (seed, m) in &report.per_run_micro {
        out.push_str(&format!(
            "{:>8}  {:.4}  {:.4}  {:.4}  {:.4}\n",
            seed, m.se, m.p_plus, m.f_score, m.accuracy
        ));
    }
    out.push_str(&format!(
        "\nmicro mean  Se {:.4} +- {:.4}   P+ {:.4} +- {:.4}   F {:.4} +- {:.4}   Acc {:.4} +- {:.4}\n",
        report.micro.mean.se,
        report.micro.std.se,
        report.micro.mean.p_plus,
        report.micro.std.p_plus,
        report.micro.mean.f_score,
        report.micro.std.f_score,
        report.micro.mean.accuracy,
        report.micro.std.accuracy,
    ));
    out.push_str(&format!("macro F (mean over fold-runs): {:.4}\n", report.macro_f_mean));
    out
}
