//! The (method × missingness level × seed) experiment matrix.
//!
//! Each cell injects missingness, splits train/validation, scales, imputes,
//! trains the shared classifier, and scores balanced accuracy plus
//! imputation RMSE. Cells are independent and may run in parallel; results
//! are folded in fixed cell order so output bytes do not depend on the
//! worker count.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::data::{
    apply_scaling, fit_scaling_windows, inject_missingness, Dataset, GroundTruthStore,
    ScalingMode, Window,
};
use crate::error::{DynImpError, Result};
use crate::imputers::{
    augment_indicator, impute_filled_mean, impute_interpolation, impute_knn, impute_zero,
    ImputedWindow,
};
use crate::model::{self, DynImpConfig, DynImpModel, PaddingStrategy};

use super::{balanced_accuracy, imputation_rmse, pooled_features, predict, train_classifier,
    ClassifierHyper};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Zero,
    Mean,
    Interp,
    Knn,
    Indicator,
    DynImp(PaddingStrategy),
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Zero,
        Method::Mean,
        Method::Interp,
        Method::Knn,
        Method::Indicator,
        Method::DynImp(PaddingStrategy::Zero),
        Method::DynImp(PaddingStrategy::Mean),
        Method::DynImp(PaddingStrategy::Interp),
        Method::DynImp(PaddingStrategy::Knn),
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Zero => "zero",
            Method::Mean => "mean",
            Method::Interp => "interp",
            Method::Knn => "knn",
            Method::Indicator => "indicator",
            Method::DynImp(PaddingStrategy::Zero) => "dynimp-zero",
            Method::DynImp(PaddingStrategy::Mean) => "dynimp-mean",
            Method::DynImp(PaddingStrategy::Interp) => "dynimp-interp",
            Method::DynImp(PaddingStrategy::Knn) => "dynimp-knn",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = DynImpError;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .find(|m| m.name() == s)
            .copied()
            .ok_or_else(|| {
                DynImpError::InvalidConfig(format!(
                    "unknown method `{s}` (expected one of: {})",
                    Method::ALL.map(|m| m.name()).join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    pub levels: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Neighbor count for the kNN imputer and kNN padding.
    pub k: usize,
    pub model: DynImpConfig,
    pub classifier: ClassifierHyper,
    pub train_frac: f64,
    /// Worker cap; 0 = library default.
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            methods: Method::ALL.to_vec(),
            levels: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
            seeds: (0..10).collect(),
            k: 5,
            model: DynImpConfig::default(),
            classifier: ClassifierHyper::default(),
            train_frac: 0.8,
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub method: String,
    pub level: f64,
    pub seed: u64,
    pub ba: Option<f64>,
    pub rmse: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateResult {
    pub method: String,
    pub level: f64,
    pub mean_ba: f64,
    /// Half-width of the normal-approximation 95% interval over seed means.
    pub ci_half: f64,
    pub seeds: usize,
}

fn fnv1a(s: &str) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Stratified 80/20 split of window indices, shuffled per seed. Returns
/// (train, val), each sorted ascending.
fn stratified_split(
    windows: &[Window],
    classes: usize,
    train_frac: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for class in 0..classes {
        let mut idx: Vec<usize> = windows
            .iter()
            .enumerate()
            .filter(|(_, w)| w.label_id == class)
            .map(|(i, _)| i)
            .collect();
        if idx.is_empty() {
            continue;
        }
        idx.shuffle(&mut rng);
        let n = idx.len();
        let n_train = ((n as f64 * train_frac).round() as usize).clamp(1, n.max(2) - 1).max(1);
        let n_train = if n == 1 { 1 } else { n_train };
        train.extend_from_slice(&idx[..n_train]);
        val.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// One cell of the matrix. Pure function of (dataset, method, level, seed,
/// cfg); every stochastic step derives its seed from the cell coordinates.
fn run_cell(
    dataset: &Dataset,
    method: Method,
    level: f64,
    seed: u64,
    cfg: &ExperimentConfig,
) -> Result<(f64, Option<f64>)> {
    let classes = dataset.classes();
    let (injected, store) = inject_missingness(dataset, level, seed)?;
    let (train_idx, val_idx) = stratified_split(&injected.windows, classes, cfg.train_frac, seed);
    if val_idx.is_empty() {
        return Err(DynImpError::EmptyInput("validation split is empty"));
    }

    let train_windows: Vec<Window> = train_idx.iter().map(|&i| injected.windows[i].clone()).collect();
    let scaling = fit_scaling_windows(&train_windows, &injected.feature_names, ScalingMode::MinMax)?;
    let scaled = apply_scaling(&injected, &scaling);

    // Ground truth cells of validation windows, mapped into scaled space.
    let mut val_store = GroundTruthStore::default();
    for &(wi, t, f, v) in &store.cells {
        if val_idx.binary_search(&wi).is_ok() {
            val_store.cells.push((wi, t, f, scaling.scale(f, v)));
        }
    }

    let nf = scaled.features();
    let scaled_train: Vec<&Window> = train_idx.iter().map(|&i| &scaled.windows[i]).collect();

    // Imputed windows aligned with dataset window indices.
    let imputed: Vec<ImputedWindow> = match method {
        Method::Zero | Method::Indicator => scaled.windows.iter().map(impute_zero).collect(),
        Method::Mean => {
            let mut sums = vec![0.0; nf];
            let mut counts = vec![0usize; nf];
            for w in &scaled_train {
                for t in 0..w.steps() {
                    for f in 0..nf {
                        if w.mask.observed(t, f) {
                            sums[f] += w.values.get(t, f);
                            counts[f] += 1;
                        }
                    }
                }
            }
            let means: Vec<f64> = sums
                .iter()
                .zip(&counts)
                .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
                .collect();
            scaled
                .windows
                .iter()
                .map(|w| impute_filled_mean(w, &means))
                .collect()
        }
        Method::Interp => scaled.windows.iter().map(impute_interpolation).collect(),
        Method::Knn => scaled
            .windows
            .iter()
            .map(|w| impute_knn(w, cfg.k))
            .collect::<Result<_>>()?,
        Method::DynImp(strategy) => {
            let mut model_cfg = cfg.model.clone();
            model_cfg.padding_strategy = strategy;
            model_cfg.k = cfg.k;
            let model_seed = seed ^ fnv1a(method.name());
            let mut net = DynImpModel::new(nf, model_cfg, model_seed)?;
            let train_set: Vec<Window> = scaled_train.iter().map(|w| (*w).clone()).collect();
            model::train(&mut net, &train_set, model_seed.wrapping_add(1))?;
            scaled
                .windows
                .iter()
                .map(|w| model::impute(&net, w))
                .collect::<Result<_>>()?
        }
    };

    let features_of = |iw: &ImputedWindow| -> Vec<f64> {
        if method == Method::Indicator {
            pooled_features(&augment_indicator(iw))
        } else {
            pooled_features(&iw.values)
        }
    };
    let train_feats: Vec<Vec<f64>> = train_idx.iter().map(|&i| features_of(&imputed[i])).collect();
    let train_labels: Vec<usize> = train_idx.iter().map(|&i| imputed[i].label_id).collect();
    let clf = train_classifier(&train_feats, &train_labels, classes, &cfg.classifier, seed)?;
    let predictions: Vec<usize> = val_idx
        .iter()
        .map(|&i| predict(&clf, &features_of(&imputed[i])))
        .collect();
    let truth: Vec<usize> = val_idx.iter().map(|&i| imputed[i].label_id).collect();
    let ba = balanced_accuracy(&predictions, &truth, classes)?;

    let rmse = if val_store.is_empty() {
        None
    } else {
        Some(imputation_rmse(&imputed, &val_store)?)
    };
    Ok((ba, rmse))
}

/// Runs the full matrix. Cell errors are recorded in the corresponding
/// result row and the run continues.
pub fn run_experiment(
    dataset: &Dataset,
    cfg: &ExperimentConfig,
) -> Result<(Vec<ExperimentResult>, Vec<AggregateResult>)> {
    if cfg.methods.is_empty() || cfg.levels.is_empty() || cfg.seeds.is_empty() {
        return Err(DynImpError::InvalidConfig(
            "experiment needs at least one method, level, and seed".into(),
        ));
    }
    let mut cells = Vec::new();
    for &level in &cfg.levels {
        for &seed in &cfg.seeds {
            for &method in &cfg.methods {
                cells.push((method, level, seed));
            }
        }
    }

    let eval = |&(method, level, seed): &(Method, f64, u64)| -> ExperimentResult {
        match run_cell(dataset, method, level, seed, cfg) {
            Ok((ba, rmse)) => ExperimentResult {
                method: method.name().into(),
                level,
                seed,
                ba: Some(ba),
                rmse,
                error: None,
            },
            Err(e) => ExperimentResult {
                method: method.name().into(),
                level,
                seed,
                ba: None,
                rmse: None,
                error: Some(e.to_string()),
            },
        }
    };

    let results: Vec<ExperimentResult> = if cfg.jobs == 1 {
        cells.iter().map(eval).collect()
    } else if cfg.jobs == 0 {
        cells.par_iter().map(eval).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| DynImpError::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(|| cells.par_iter().map(eval).collect())
    };

    let mut aggregates = Vec::new();
    for &method in &cfg.methods {
        for &level in &cfg.levels {
            let bas: Vec<f64> = results
                .iter()
                .filter(|r| r.method == method.name() && r.level == level)
                .filter_map(|r| r.ba)
                .collect();
            if bas.is_empty() {
                continue;
            }
            let n = bas.len() as f64;
            let mean = bas.iter().sum::<f64>() / n;
            let std = if bas.len() > 1 {
                (bas.iter().map(|b| (b - mean) * (b - mean)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            aggregates.push(AggregateResult {
                method: method.name().into(),
                level,
                mean_ba: mean,
                ci_half: 1.96 * std / n.sqrt(),
                seeds: bas.len(),
            });
        }
    }
    Ok((results, aggregates))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| DynImpError::io(path.display().to_string(), e))
}

/// Per-cell results: `method,level,seed,ba,rmse`; errored cells leave the
/// score columns empty.
pub fn write_results_csv(path: &Path, results: &[ExperimentResult]) -> Result<()> {
    let mut out = String::from("# format: dynimp-results v1\nmethod,level,seed,ba,rmse\n");
    for r in results {
        let ba = r.ba.map(|v| format!("{v:.6}")).unwrap_or_default();
        let rmse = r.rmse.map(|v| format!("{v:.6}")).unwrap_or_default();
        out.push_str(&format!("{},{},{},{},{}\n", r.method, r.level, r.seed, ba, rmse));
    }
    write_file(path, &out)
}

/// Aggregate table, rows = levels, one column per method, cell = mean±ci.
pub fn write_aggregate_csv(
    path: &Path,
    aggregates: &[AggregateResult],
    methods: &[Method],
    levels: &[f64],
) -> Result<()> {
    let mut out = String::from("# format: dynimp-aggregate v1\nlevel");
    for m in methods {
        out.push(',');
        out.push_str(m.name());
    }
    out.push('\n');
    for &level in levels {
        out.push_str(&format!("{level}"));
        for m in methods {
            out.push(',');
            if let Some(a) = aggregates
                .iter()
                .find(|a| a.method == m.name() && a.level == level)
            {
                out.push_str(&format!("{:.4}±{:.4}", a.mean_ba, a.ci_half));
            }
        }
        out.push('\n');
    }
    write_file(path, &out)
}

/// Ablation table for the model's padding variants, rows = variants,
/// one column per level, cell = mean balanced accuracy.
pub fn write_variant_csv(
    path: &Path,
    aggregates: &[AggregateResult],
    methods: &[Method],
    levels: &[f64],
) -> Result<()> {
    let mut out = String::from("# format: dynimp-variants v1\nvariant");
    for &level in levels {
        out.push_str(&format!(",{level}"));
    }
    out.push('\n');
    for m in methods {
        if !matches!(m, Method::DynImp(_)) {
            continue;
        }
        out.push_str(m.name());
        for &level in levels {
            out.push(',');
            if let Some(a) = aggregates
                .iter()
                .find(|a| a.method == m.name() && a.level == level)
            {
                out.push_str(&format!("{:.4}", a.mean_ba));
            }
        }
        out.push('\n');
    }
    write_file(path, &out)
}
