//! Command-line entry point: ingest, synth, train, impute, experiment,
//! grad-check.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dynimp::config::RunConfig;
use dynimp::data::{
    apply_scaling, fit_scaling, generate_synthetic_with, ingest_csv, load_dataset, save_dataset,
    CsvSchema, Dataset, MaskMatrix, ScalingMode, SynthConfig, Window,
};
use dynimp::error::{DynImpError, Result};
use dynimp::eval::{
    run_experiment, write_aggregate_csv, write_results_csv, write_variant_csv,
};
use dynimp::model::{
    self, load_checkpoint, save_checkpoint, CorruptionSpec, DynImpConfig, DynImpModel,
};
use dynimp::nn::grad_check;
use dynimp::tensor::Tensor2;

#[derive(Parser)]
#[command(name = "dynimp", version, about = "Dynamic imputation for wearable time series")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Config file with key=value lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a single config key, e.g. --set epochs=50 (repeatable; wins
    /// over the config file and DYNIMP_* environment variables).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Random seed (wins over `--set seed=`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker cap for the experiment matrix; 1 and N give identical bytes.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Read a sensor CSV into a windowed dataset file.
    Ingest {
        /// Input CSV: header `timestamp,<feature...>,label`; missing cells
        /// empty or `NaN`.
        input: PathBuf,
        /// Output dataset file.
        out: PathBuf,
    },
    /// Generate a synthetic correlated-channel dataset file.
    Synth {
        out: PathBuf,
    },
    /// Train the imputation model on a dataset.
    Train {
        dataset: PathBuf,
        out: PathBuf,
        /// Continue from an existing checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Impute every missing cell of a dataset with a trained model.
    Impute {
        dataset: PathBuf,
        checkpoint: PathBuf,
        out: PathBuf,
    },
    /// Run the (method × level × seed) experiment matrix.
    Experiment {
        dataset: PathBuf,
        /// Output directory for results.csv, aggregate.csv, variants.csv,
        /// manifest.json.
        outdir: PathBuf,
        /// Verify pipeline gradients against finite differences before any
        /// training and fail fast above 1e-4 relative error.
        #[arg(long)]
        grad_check: bool,
    },
    /// Check analytic pipeline gradients against central finite differences.
    GradCheck {
        /// Number of random small instances.
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

fn resolve_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        cfg.load_file(path)?;
    }
    cfg.apply_env()?;
    for kv in &common.sets {
        let (key, value) = kv.split_once('=').ok_or_else(|| {
            DynImpError::InvalidConfig(format!("--set expects key=value, got `{kv}`"))
        })?;
        cfg.set(key.trim(), value.trim())?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = common.jobs {
        cfg.jobs = jobs;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_manifest(
    path: &Path,
    command: &str,
    cfg: &RunConfig,
    extra: serde_json::Value,
    started: Instant,
) -> Result<()> {
    let manifest = serde_json::json!({
        "format": "dynimp-manifest",
        "version": 1,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": cfg.manifest_lines(),
        "seed": cfg.seed,
        "wall_clock_seconds": started.elapsed().as_secs_f64(),
        "extra": extra,
    });
    std::fs::write(path, serde_json::to_string_pretty(&manifest)?)
        .map_err(|e| DynImpError::io(path.display().to_string(), e))
}

fn dataset_summary(dataset: &Dataset) -> String {
    format!(
        "windows={} features={} labels={}",
        dataset.windows.len(),
        dataset.features(),
        dataset.classes()
    )
}

/// Pearson correlation between the first two channels over all window cells.
fn cross_channel_corr(dataset: &Dataset) -> Option<f64> {
    if dataset.features() < 2 {
        return None;
    }
    let (mut n, mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for w in &dataset.windows {
        for t in 0..w.steps() {
            if w.mask.observed(t, 0) && w.mask.observed(t, 1) {
                let a = w.values.get(t, 0);
                let b = w.values.get(t, 1);
                n += 1.0;
                sa += a;
                sb += b;
                saa += a * a;
                sbb += b * b;
                sab += a * b;
            }
        }
    }
    if n < 2.0 {
        return None;
    }
    let cov = sab / n - sa / n * (sb / n);
    let va = saa / n - (sa / n) * (sa / n);
    let vb = sbb / n - (sb / n) * (sb / n);
    (va > 0.0 && vb > 0.0).then(|| cov / (va * vb).sqrt())
}

fn cmd_ingest(input: &Path, out: &Path, cfg: &RunConfig, started: Instant) -> Result<()> {
    let schema = CsvSchema {
        window_len: cfg.t,
        stride: cfg.stride,
        ..CsvSchema::default()
    };
    let dataset = ingest_csv(input, &schema)?;
    save_dataset(&dataset, out)?;
    println!("{}", dataset_summary(&dataset));
    write_manifest(
        &out.with_extension("manifest.json"),
        "ingest",
        cfg,
        serde_json::json!({ "input": input.display().to_string() }),
        started,
    )
}

fn cmd_synth(out: &Path, cfg: &RunConfig, started: Instant) -> Result<()> {
    let dataset = generate_synthetic_with(&SynthConfig {
        users: cfg.users,
        minutes: cfg.minutes,
        features: cfg.features,
        coupling: cfg.coupling,
        seed: cfg.seed,
        classes: cfg.classes,
        window_len: cfg.t,
        stride: cfg.stride,
        ..SynthConfig::default()
    })?;
    save_dataset(&dataset, out)?;
    match cross_channel_corr(&dataset) {
        Some(corr) => println!("{} corr01={corr:.4}", dataset_summary(&dataset)),
        None => println!("{}", dataset_summary(&dataset)),
    }
    write_manifest(
        &out.with_extension("manifest.json"),
        "synth",
        cfg,
        serde_json::json!({}),
        started,
    )
}

/// Scales a raw dataset in place for model consumption; a dataset that
/// already records scaling passes through.
fn ensure_scaled(dataset: Dataset, mode: ScalingMode) -> Result<(Dataset, dynimp::data::ScalingParams)> {
    match dataset.scaling.clone() {
        Some(s) => Ok((dataset, s)),
        None => {
            let s = fit_scaling(&dataset, mode)?;
            Ok((apply_scaling(&dataset, &s), s))
        }
    }
}

fn cmd_train(
    dataset_path: &Path,
    out: &Path,
    resume: Option<&Path>,
    cfg: &RunConfig,
    started: Instant,
) -> Result<()> {
    let raw = load_dataset(dataset_path)?;
    let (scaled, scaling) = ensure_scaled(raw, cfg.scaling)?;
    let (mut net, seed) = match resume {
        Some(path) => {
            let (net, _scaling, seed) = load_checkpoint(path)?;
            (net, seed)
        }
        None => (
            DynImpModel::new(scaled.features(), cfg.model_config(), cfg.seed)?,
            cfg.seed,
        ),
    };
    let log = model::train_for(&mut net, &scaled.windows, seed, cfg.epochs)?;
    for (i, l) in log.iter().enumerate() {
        println!("epoch={} loss={l:.6}", i + 1);
    }
    save_checkpoint(&net, Some(&scaling), seed, out)?;
    let mut losslog = String::from("# format: dynimp-losslog v1\nepoch,loss\n");
    for (i, l) in net.train_log.iter().enumerate() {
        losslog.push_str(&format!("{},{l:.6}\n", i + 1));
    }
    let losslog_path = out.with_extension("losslog.csv");
    std::fs::write(&losslog_path, losslog)
        .map_err(|e| DynImpError::io(losslog_path.display().to_string(), e))?;
    write_manifest(
        &out.with_extension("manifest.json"),
        "train",
        cfg,
        serde_json::json!({ "dataset": dataset_path.display().to_string(), "epochs_run": log.len() }),
        started,
    )
}

fn cmd_impute(
    dataset_path: &Path,
    checkpoint: &Path,
    out: &Path,
    cfg: &RunConfig,
    started: Instant,
) -> Result<()> {
    let raw = load_dataset(dataset_path)?;
    let (net, ckpt_scaling, _seed) = load_checkpoint(checkpoint)?;
    let already_scaled = raw.scaling.is_some();
    let scaling = match (&raw.scaling, ckpt_scaling) {
        (Some(s), _) => s.clone(),
        (None, Some(s)) => s,
        (None, None) => fit_scaling(&raw, cfg.scaling)?,
    };
    let scaled = if already_scaled {
        raw.clone()
    } else {
        apply_scaling(&raw, &scaling)
    };

    let mut windows = Vec::with_capacity(raw.windows.len());
    for (wi, w) in scaled.windows.iter().enumerate() {
        let imputed = model::impute(&net, w)?;
        let mut values = Tensor2::zeros(w.steps(), w.features());
        for t in 0..w.steps() {
            for f in 0..w.features() {
                let v = if w.mask.observed(t, f) {
                    // Observed cells pass through in the original space.
                    raw.windows[wi].values.get(t, f)
                } else if already_scaled {
                    imputed.values.get(t, f)
                } else {
                    scaling.unscale(f, imputed.values.get(t, f))
                };
                values.set(t, f, v);
            }
        }
        windows.push(Window {
            values,
            mask: MaskMatrix::ones(w.steps(), w.features()),
            label_id: w.label_id,
        });
    }
    let imputed_dataset = Dataset {
        windows,
        scaling: raw.scaling.clone(),
        feature_names: raw.feature_names.clone(),
        label_names: raw.label_names.clone(),
    };
    save_dataset(&imputed_dataset, out)?;
    println!("{}", dataset_summary(&imputed_dataset));
    write_manifest(
        &out.with_extension("manifest.json"),
        "impute",
        cfg,
        serde_json::json!({
            "dataset": dataset_path.display().to_string(),
            "checkpoint": checkpoint.display().to_string(),
        }),
        started,
    )
}

/// Random small pipeline instances checked against central differences.
/// Returns the max relative error seen.
fn run_pipeline_grad_check(instances: usize, tolerance: f64, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..instances {
        let steps = rng.gen_range(2..=5);
        let nf = rng.gen_range(2..=3);
        let hidden = rng.gen_range(2..=4);
        let mut values = Tensor2::zeros(steps, nf);
        let mut mask = MaskMatrix::ones(steps, nf);
        for t in 0..steps {
            for f in 0..nf {
                values.set(t, f, rng.gen_range(0.05..0.95));
                if rng.gen::<f64>() < 0.2 {
                    mask.set(t, f, false);
                }
            }
        }
        let window = Window {
            values,
            mask,
            label_id: 0,
        };
        let config = DynImpConfig {
            hidden,
            k: 2,
            ..DynImpConfig::default()
        };
        let net = DynImpModel::new(nf, config, rng.gen())?;
        let spec = CorruptionSpec {
            keep_prob: 0.8,
            seed: rng.gen(),
        };
        let params = net.params_flat();
        let (z, caches) = model::forward(&net, &window, &spec)?;
        let analytic = model::backward(&net, &caches, &z, &window.values, &window.mask)?;
        let indices: Vec<usize> = (0..10).map(|_| rng.gen_range(0..params.len())).collect();
        let mut closure = |p: &[f64]| model::loss_at_params(&net, &window, &spec, p);
        let report = grad_check(&mut closure, &analytic, &params, &indices, 1e-5)?;
        worst = worst.max(report.max_rel_err);
        println!(
            "instance={} T={steps} F={nf} H={hidden} max_rel_err={:.2e}",
            i + 1,
            report.max_rel_err
        );
        if !report.passes(tolerance) {
            return Err(DynImpError::GradCheck(format!(
                "instance {} exceeded tolerance {tolerance}: max relative error {:.3e} at parameter {}",
                i + 1,
                report.max_rel_err,
                report.worst[0].index
            )));
        }
    }
    Ok(worst)
}

fn cmd_experiment(
    dataset_path: &Path,
    outdir: &Path,
    do_grad_check: bool,
    cfg: &RunConfig,
    started: Instant,
) -> Result<bool> {
    let dataset = load_dataset(dataset_path)?;
    if do_grad_check {
        let worst = run_pipeline_grad_check(5, 1e-4, cfg.seed)?;
        println!("grad-check ok (max_rel_err={worst:.2e})");
    }
    std::fs::create_dir_all(outdir)
        .map_err(|e| DynImpError::io(outdir.display().to_string(), e))?;
    let exp_cfg = cfg.experiment_config();
    let (results, aggregates) = run_experiment(&dataset, &exp_cfg)?;
    write_results_csv(&outdir.join("results.csv"), &results)?;
    write_aggregate_csv(
        &outdir.join("aggregate.csv"),
        &aggregates,
        &exp_cfg.methods,
        &exp_cfg.levels,
    )?;
    write_variant_csv(
        &outdir.join("variants.csv"),
        &aggregates,
        &exp_cfg.methods,
        &exp_cfg.levels,
    )?;
    for a in &aggregates {
        println!(
            "method={} level={} ba={:.4}±{:.4} seeds={}",
            a.method, a.level, a.mean_ba, a.ci_half, a.seeds
        );
    }
    let errors: Vec<serde_json::Value> = results
        .iter()
        .filter_map(|r| {
            r.error.as_ref().map(|e| {
                serde_json::json!({
                    "method": r.method, "level": r.level, "seed": r.seed, "error": e,
                })
            })
        })
        .collect();
    let clean = errors.is_empty();
    for e in &errors {
        eprintln!("cell error: {e}");
    }
    write_manifest(
        &outdir.join("manifest.json"),
        "experiment",
        cfg,
        serde_json::json!({
            "dataset": dataset_path.display().to_string(),
            "cells": results.len(),
            "errors": errors,
        }),
        started,
    )?;
    Ok(clean)
}

fn run(cli: &Cli) -> Result<bool> {
    let started = Instant::now();
    let cfg = resolve_config(&cli.common)?;
    match &cli.command {
        Command::Ingest { input, out } => cmd_ingest(input, out, &cfg, started).map(|_| true),
        Command::Synth { out } => cmd_synth(out, &cfg, started).map(|_| true),
        Command::Train { dataset, out, resume } => {
            cmd_train(dataset, out, resume.as_deref(), &cfg, started).map(|_| true)
        }
        Command::Impute { dataset, checkpoint, out } => {
            cmd_impute(dataset, checkpoint, out, &cfg, started).map(|_| true)
        }
        Command::Experiment { dataset, outdir, grad_check } => {
            cmd_experiment(dataset, outdir, *grad_check, &cfg, started)
        }
        Command::GradCheck { instances, tolerance } => {
            let worst = run_pipeline_grad_check(*instances, *tolerance, cfg.seed)?;
            println!("grad-check ok (max_rel_err={worst:.2e})");
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
