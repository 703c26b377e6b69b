//! Flat key=value run configuration with environment and CLI overrides.
//!
//! Precedence, lowest to highest: built-in defaults, config file,
//! `DYNIMP_*` environment variables, command-line flags.

use crate::data::ScalingMode;
use crate::error::{DynImpError, Result};
use crate::eval::{ClassifierHyper, ExperimentConfig, Method};
use crate::model::{DynImpConfig, LossMode, PaddingStrategy};
use crate::nn::AdamHyper;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub t: usize,
    pub stride: usize,
    pub scaling: ScalingMode,
    pub k: usize,
    pub hidden: usize,
    pub p: f64,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub loss: LossMode,
    pub padding: PaddingStrategy,
    pub levels: Vec<f64>,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    pub users: usize,
    pub minutes: usize,
    pub features: usize,
    pub coupling: f64,
    pub classes: usize,
    pub clf_lr: f64,
    pub clf_epochs: usize,
    pub train_frac: f64,
    pub jobs: usize,
    pub seed: u64,
    pub clip: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            t: 24,
            stride: 24,
            scaling: ScalingMode::MinMax,
            k: 5,
            hidden: 32,
            p: 0.8,
            epochs: 100,
            batch: 32,
            lr: 1e-3,
            loss: LossMode::Bce,
            padding: PaddingStrategy::Knn,
            levels: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
            seeds: (0..10).collect(),
            methods: Method::ALL.to_vec(),
            users: 1,
            minutes: 480,
            features: 6,
            coupling: 0.9,
            classes: 4,
            clf_lr: 0.5,
            clf_epochs: 300,
            train_frac: 0.8,
            jobs: 0,
            seed: 0,
            clip: 5.0,
        }
    }
}

const KEYS: &[&str] = &[
    "t", "stride", "scaling", "k", "hidden", "p", "epochs", "batch", "lr", "loss", "padding",
    "levels", "seeds", "methods", "users", "minutes", "features", "coupling", "classes",
    "clf_lr", "clf_epochs", "train_frac", "jobs", "seed", "clip",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| {
        DynImpError::InvalidConfig(format!("bad value `{value}` for key `{key}`"))
    })
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s.trim()))
        .collect()
}

impl RunConfig {
    /// Sets one key from its textual value. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "t" => self.t = parse(key, value)?,
            "stride" => self.stride = parse(key, value)?,
            "scaling" => self.scaling = value.parse()?,
            "k" => self.k = parse(key, value)?,
            "hidden" => self.hidden = parse(key, value)?,
            "p" => self.p = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "batch" => self.batch = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "loss" => self.loss = value.parse()?,
            "padding" => self.padding = value.parse()?,
            "levels" => self.levels = parse_list(key, value)?,
            "seeds" => self.seeds = parse_list(key, value)?,
            "methods" => {
                self.methods = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| s.trim().parse())
                    .collect::<Result<_>>()?
            }
            "users" => self.users = parse(key, value)?,
            "minutes" => self.minutes = parse(key, value)?,
            "features" => self.features = parse(key, value)?,
            "coupling" => self.coupling = parse(key, value)?,
            "classes" => self.classes = parse(key, value)?,
            "clf_lr" => self.clf_lr = parse(key, value)?,
            "clf_epochs" => self.clf_epochs = parse(key, value)?,
            "train_frac" => self.train_frac = parse(key, value)?,
            "jobs" => self.jobs = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "clip" => self.clip = parse(key, value)?,
            other => {
                return Err(DynImpError::InvalidConfig(format!(
                    "unknown config key `{other}` (known keys: {})",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Loads `key=value` lines; `#` starts a comment; blank lines ignored.
    pub fn load_str(&mut self, text: &str) -> Result<()> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                DynImpError::InvalidConfig(format!("line {}: expected key=value, got `{line}`", no + 1))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn load_file(&mut self, path: &std::path::Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DynImpError::io(path.display().to_string(), e))?;
        self.load_str(&text)
    }

    /// Applies `DYNIMP_<KEY>` environment overrides.
    pub fn apply_env(&mut self) -> Result<()> {
        for key in KEYS {
            let var = format!("DYNIMP_{}", key.to_uppercase());
            if let Ok(value) = std::env::var(&var) {
                self.set(key, &value)?;
            }
        }
        Ok(())
    }

    /// Checks every module precondition before any work starts.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(DynImpError::InvalidConfig(msg));
        if self.t < 2 {
            return fail(format!("t must be >= 2, got {}", self.t));
        }
        if self.stride == 0 {
            return fail("stride must be >= 1".into());
        }
        if self.features < 2 {
            return fail(format!("features must be >= 2, got {}", self.features));
        }
        if !(0.0..1.0).contains(&self.train_frac) || self.train_frac <= 0.0 {
            return fail(format!("train_frac must be in (0, 1), got {}", self.train_frac));
        }
        if !(0.0..=1.0).contains(&self.coupling) {
            return fail(format!("coupling must be in [0, 1], got {}", self.coupling));
        }
        for &l in &self.levels {
            if !(0.0..1.0).contains(&l) {
                return fail(format!("missingness level must be in [0, 1), got {l}"));
            }
        }
        if self.methods.is_empty() || self.seeds.is_empty() || self.levels.is_empty() {
            return fail("methods, seeds, and levels must be non-empty".into());
        }
        self.model_config().validate()
    }

    pub fn model_config(&self) -> DynImpConfig {
        DynImpConfig {
            padding_strategy: self.padding,
            k: self.k,
            hidden: self.hidden,
            keep_prob: self.p,
            epochs: self.epochs,
            batch_size: self.batch,
            adam: AdamHyper {
                lr: self.lr,
                ..AdamHyper::default()
            },
            loss: self.loss,
            clip_norm: self.clip,
        }
    }

    pub fn experiment_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            methods: self.methods.clone(),
            levels: self.levels.clone(),
            seeds: self.seeds.clone(),
            k: self.k,
            model: self.model_config(),
            classifier: ClassifierHyper {
                lr: self.clf_lr,
                epochs: self.clf_epochs,
            },
            train_frac: self.train_frac,
            jobs: self.jobs,
        }
    }

    /// Resolved configuration as `key=value` lines in fixed key order, for
    /// manifests. A run is replayable from these lines alone.
    pub fn manifest_lines(&self) -> Vec<String> {
        let scaling = match self.scaling {
            ScalingMode::MinMax => "minmax",
            ScalingMode::ZScore => "zscore",
        };
        let loss = match self.loss {
            LossMode::Bce => "bce",
            LossMode::Mse => "mse",
        };
        let padding = match self.padding {
            PaddingStrategy::Zero => "zero",
            PaddingStrategy::Mean => "mean",
            PaddingStrategy::Interp => "interp",
            PaddingStrategy::Knn => "knn",
        };
        let join_f = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let join_u = |v: &[u64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let methods = self
            .methods
            .iter()
            .map(|m| m.name())
            .collect::<Vec<_>>()
            .join(",");
        vec![
            format!("t={}", self.t),
            format!("stride={}", self.stride),
            format!("scaling={scaling}"),
            format!("k={}", self.k),
            format!("hidden={}", self.hidden),
            format!("p={}", self.p),
            format!("epochs={}", self.epochs),
            format!("batch={}", self.batch),
            format!("lr={}", self.lr),
            format!("loss={loss}"),
            format!("padding={padding}"),
            format!("levels={}", join_f(&self.levels)),
            format!("seeds={}", join_u(&self.seeds)),
            format!("methods={methods}"),
            format!("users={}", self.users),
            format!("minutes={}", self.minutes),
            format!("features={}", self.features),
            format!("coupling={}", self.coupling),
            format!("classes={}", self.classes),
            format!("clf_lr={}", self.clf_lr),
            format!("clf_epochs={}", self.clf_epochs),
            format!("train_frac={}", self.train_frac),
            format!("jobs={}", self.jobs),
            format!("seed={}", self.seed),
            format!("clip={}", self.clip),
        ]
    }
}
