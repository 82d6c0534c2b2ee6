//! `crackle` — command-line interface to the crackle-detection pipeline.
//!
//! Exit codes: 0 success, 1 usage/configuration error, 2 data error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crackle_core::audio::{resample, sample_pad, zero_pad, FIXED_CYCLE_LEN, TARGET_RATE_HZ};
use crackle_core::dataio::{read_wav, write_synth_target_to_dir, DataError, SynthSpec};
use crackle_core::experiment::{
    parse_variant_name, render_report_text, render_results_csv, resolve_pretrained, run_crossval,
    run_single_fold, ExperimentConfig, ExperimentError, PaddingKind,
};
use crackle_core::features::{
    default_filterbank, log_mel, normalize, stft_magnitude, write_feature_dump,
};
use crackle_core::metrics::{compute_metrics, ConfusionCounts};
use crackle_core::nn::{
    grad_check_model, save_checkpoint, uniform_alpha, ArchitectureSpec, ModelGraph, Tensor4,
};

#[derive(Parser)]
#[command(name = "crackle", version, about = "Crackle detection in lung sounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pre-train the single-input source model and save its checkpoint.
    Pretrain(PretrainArgs),
    /// Train one fold of the target domain and report its metrics.
    Finetune(FinetuneArgs),
    /// Full cross-validation: every run seed crossed with every fold.
    Crossval(CrossvalArgs),
    /// Extract full-cycle log-mel features from a wav file.
    Features(FeaturesArgs),
    /// Compute Se / P+ / F-score from confusion counts.
    Metrics(MetricsArgs),
    /// Generate a synthetic target-domain dataset (wavs + manifest).
    SynthData(SynthArgs),
    /// Verify analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct PretrainArgs {
    /// Experiment config (TOML) with a [pretraining] section.
    #[arg(long)]
    config: PathBuf,
    /// Where to write the checkpoint.
    #[arg(long, default_value = "pretrained.ckpt")]
    out: PathBuf,
}

#[derive(Args)]
struct FinetuneArgs {
    #[arg(long)]
    config: PathBuf,
    /// Variant name override (published table convention).
    #[arg(long)]
    variant: Option<String>,
    /// Fold index to train.
    #[arg(long, default_value_t = 0)]
    fold: usize,
    /// Run seed; defaults to the first seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the trained model and report.
    #[arg(long, default_value = "finetune-out")]
    out: PathBuf,
}

#[derive(Args)]
struct CrossvalArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    variant: Option<String>,
    /// Output directory for results.csv and report.txt.
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Args)]
struct FeaturesArgs {
    /// Input wav file (one respiratory cycle).
    #[arg(long)]
    wav: PathBuf,
    /// Output feature-dump file.
    #[arg(long)]
    out: PathBuf,
    /// Use zero padding instead of sample padding.
    #[arg(long, default_value_t = false)]
    zero_pad: bool,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    tp: u64,
    #[arg(long)]
    fp: u64,
    #[arg(long)]
    tn: u64,
    #[arg(long = "fn")]
    fn_: u64,
}

#[derive(Args)]
struct SynthArgs {
    /// Total subjects; split between normal-only and crackle subjects
    /// unless --normal/--crackle are given.
    #[arg(long, default_value_t = 8)]
    subjects: usize,
    #[arg(long)]
    normal: Option<usize>,
    #[arg(long)]
    crackle: Option<usize>,
    #[arg(long, default_value_t = 10)]
    cycles: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output directory (wavs + manifest.tsv).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Finite-difference samples per parameter group.
    #[arg(long, default_value_t = 12)]
    samples: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Pass/fail threshold on the max relative error.
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

/// 1 = usage/config error, 2 = data error.
fn classify(err: &ExperimentError) -> u8 {
    match err {
        ExperimentError::Data(_)
        | ExperimentError::Audio(_)
        | ExperimentError::Feature(_)
        | ExperimentError::Augment(_)
        | ExperimentError::Metrics(_)
        | ExperimentError::Leakage(_) => 2,
        ExperimentError::Nn(crackle_core::nn::NnError::Io(_))
        | ExperimentError::Nn(crackle_core::nn::NnError::IncompatibleCheckpoint(_)) => 2,
        _ => 1,
    }
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn load_config(path: &PathBuf, variant: &Option<String>) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(v) = variant {
        parse_variant_name(v)?;
        cfg.variant = v.clone();
    } else {
        parse_variant_name(&cfg.variant)?;
    }
    Ok(cfg)
}

fn cmd_pretrain(args: &PretrainArgs) -> ExitCode {
    let cfg = match load_config(&args.config, &None) {
        Ok(c) => c,
        Err(e) => return fail(classify(&e), e),
    };
    let padding = cfg.variant().map(|v| v.padding).unwrap_or(PaddingKind::Sample);
    match resolve_pretrained(&cfg, padding) {
        Ok(pm) => match pm.save(&args.out) {
            Ok(()) => {
                println!("checkpoint written to {}", args.out.display());
                ExitCode::SUCCESS
            }
            Err(e) => fail(2, e),
        },
        Err(e) => fail(classify(&e), e),
    }
}

fn cmd_finetune(args: &FinetuneArgs) -> ExitCode {
    let cfg = match load_config(&args.config, &args.variant) {
        Ok(c) => c,
        Err(e) => return fail(classify(&e), e),
    };
    let seed = args.seed.unwrap_or_else(|| cfg.seeds.first().copied().unwrap_or(1));
    match run_single_fold(&cfg, args.fold, seed) {
        Ok((result, model)) => {
            if let Err(e) = std::fs::create_dir_all(&args.out) {
                return fail(2, format!("{}: {e}", args.out.display()));
            }
            let ckpt = args.out.join(format!("{}.fold{}.ckpt", cfg.variant, args.fold));
            let mut file = match std::fs::File::create(&ckpt) {
                Ok(f) => f,
                Err(e) => return fail(2, format!("{}: {e}", ckpt.display())),
            };
            if let Err(e) = save_checkpoint(&mut file, &model) {
                return fail(2, e);
            }
            let m = result.metrics;
            let report = format!(
                "variant: {}\nfold: {}\nrun_seed: {}\nbest_epoch: {:?}\nval_accuracy: {:.4}\n\
                 tp {} fp {} tn {} fn {}\nSe {:.4}  P+ {:.4}  F {:.4}  Acc {:.4}\n",
                cfg.variant,
                result.fold,
                result.run_seed,
                result.best_epoch,
                result.best_val_accuracy,
                result.counts.tp,
                result.counts.fp,
                result.counts.tn,
                result.counts.fn_,
                m.se,
                m.p_plus,
                m.f_score,
                m.accuracy
            );
            let report_path = args.out.join(format!("{}.fold{}.report.txt", cfg.variant, args.fold));
            if let Err(e) = std::fs::write(&report_path, &report) {
                return fail(2, format!("{}: {e}", report_path.display()));
            }
            print!("{report}");
            println!("model: {}", ckpt.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(classify(&e), e),
    }
}

fn cmd_crossval(args: &CrossvalArgs) -> ExitCode {
    let cfg = match load_config(&args.config, &args.variant) {
        Ok(c) => c,
        Err(e) => return fail(classify(&e), e),
    };
    match run_crossval(&cfg) {
        Ok(report) => {
            if let Err(e) = std::fs::create_dir_all(&args.out) {
                return fail(2, format!("{}: {e}", args.out.display()));
            }
            let csv_path = args.out.join(format!("{}.results.csv", report.variant));
            let txt_path = args.out.join(format!("{}.report.txt", report.variant));
            let text = render_report_text(&report);
            if let Err(e) = std::fs::write(&csv_path, render_results_csv(&report)) {
                return fail(2, format!("{}: {e}", csv_path.display()));
            }
            if let Err(e) = std::fs::write(&txt_path, &text) {
                return fail(2, format!("{}: {e}", txt_path.display()));
            }
            print!("{text}");
            println!("results: {}", csv_path.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(classify(&e), e),
    }
}

fn cmd_features(args: &FeaturesArgs) -> ExitCode {
    let run = || -> Result<(), ExperimentError> {
        let audio = read_wav(&args.wav)?;
        let at_16k = resample(&audio, TARGET_RATE_HZ)?;
        let padded = if args.zero_pad {
            zero_pad(&at_16k, FIXED_CYCLE_LEN)?
        } else {
            sample_pad(&at_16k, FIXED_CYCLE_LEN)?
        };
        let spec = stft_magnitude(&padded)?;
        let lm = normalize(&log_mel(&spec, &default_filterbank())?);
        let mut file = std::fs::File::create(&args.out).map_err(|e| {
            ExperimentError::Data(DataError::Io {
                path: args.out.display().to_string(),
                msg: e.to_string(),
            })
        })?;
        write_feature_dump(&mut file, &lm)?;
        println!("{} frames x {} bins -> {}", lm.frames, lm.bins, args.out.display());
        Ok(())
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(classify(&e), e),
    }
}

fn cmd_metrics(args: &MetricsArgs) -> ExitCode {
    let counts = ConfusionCounts { tp: args.tp, fp: args.fp, tn: args.tn, fn_: args.fn_ };
    match compute_metrics(&counts) {
        Ok(m) => {
            println!("Se {:.4}  P+ {:.4}  F {:.4}  Acc {:.4}", m.se, m.p_plus, m.f_score, m.accuracy);
            ExitCode::SUCCESS
        }
        Err(e) => fail(2, e),
    }
}

fn cmd_synth(args: &SynthArgs) -> ExitCode {
    let crackle = args.crackle.unwrap_or(args.subjects / 2);
    let normal = args.normal.unwrap_or(args.subjects - args.subjects / 2);
    let spec = SynthSpec {
        n_normal_subjects: normal,
        n_crackle_subjects: crackle,
        cycles_per_subject: args.cycles,
        seed: args.seed,
    };
    match write_synth_target_to_dir(&args.out, &spec) {
        Ok(manifest) => {
            println!(
                "{} normal + {} crackle subjects, {} cycles each -> {}",
                normal,
                crackle,
                args.cycles,
                manifest.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => fail(2, e),
    }
}

fn cmd_gradcheck(args: &GradcheckArgs) -> ExitCode {
    let mut model = ModelGraph::<f64>::new_glorot(ArchitectureSpec::standard(), 1, 4, args.seed);
    let mut state = args.seed.wrapping_mul(0x9e3779b97f4a7c15) | 1;
    let mut next = move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let input = Tensor4::from_vec(4, 1, 8, 45, (0..4 * 8 * 45).map(|_| next() * 2.0).collect());
    let targets = [0usize, 1, 2, 3];
    let report = match grad_check_model(
        &mut model,
        &[input],
        &targets,
        2.0,
        &uniform_alpha(4),
        args.samples,
        args.seed,
    ) {
        Ok(r) => r,
        Err(e) => return fail(1, e),
    };
    println!("{:<32} {:>12} {:>8}", "parameter group", "max_rel_err", "checked");
    for g in &report.groups {
        if g.skipped {
            println!("{:<32} {:>12} {:>8}", g.name, "skipped", 0);
        } else {
            println!("{:<32} {:>12.3e} {:>8}", g.name, g.max_rel_err, g.checked);
        }
    }
    let max = report.max_rel_err();
    println!("max relative error: {max:.3e} (tolerance {:.1e})", args.tolerance);
    if report.passed(args.tolerance) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match &cli.command {
        Command::Pretrain(args) => cmd_pretrain(args),
        Command::Finetune(args) => cmd_finetune(args),
        Command::Crossval(args) => cmd_crossval(args),
        Command::Features(args) => cmd_features(args),
        Command::Metrics(args) => cmd_metrics(args),
        Command::SynthData(args) => cmd_synth(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
    }
}
