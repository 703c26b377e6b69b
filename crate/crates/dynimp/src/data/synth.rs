//! Synthetic correlated-channel dataset generator.
//!
//! Channels are AR(1) processes tied to a shared latent driver. Activity
//! regimes shift the latent mean and volatility, so labels are recoverable
//! from pooled window statistics and the task gets harder as cells go
//! missing.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{DynImpError, Result};

use super::{build_windows, Dataset, SensorFrame};

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub users: usize,
    pub minutes: usize,
    pub features: usize,
    /// Share of each channel driven by the common latent, in [0, 1].
    /// 1 = channels are affine images of one latent path; 0 = independent.
    pub coupling: f64,
    pub seed: u64,
    pub classes: usize,
    pub window_len: usize,
    pub stride: usize,
    /// AR(1) coefficient for latent and channel noise.
    pub phi: f64,
    /// Length of one activity regime in minutes; aligned with windows so
    /// every window has a single label.
    pub regime_minutes: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            users: 1,
            minutes: 480,
            features: 6,
            coupling: 0.9,
            seed: 0,
            classes: 4,
            window_len: 24,
            stride: 24,
            phi: 0.85,
            regime_minutes: 24,
        }
    }
}

/// Regime m shifts the latent mean and scales its volatility. Adjacent
/// regimes share a mean and differ in volatility, so the classifier needs
/// second-moment information, which imputation quality directly affects.
fn regime_params(m: usize) -> (f64, f64) {
    let mean = 1.5 * ((m % 2) as f64) + 0.4 * ((m / 4) as f64);
    let scale = 0.6 + 1.0 * (((m / 2) % 2) as f64);
    (mean, scale)
}

pub fn generate_synthetic(
    users: usize,
    minutes: usize,
    features: usize,
    coupling: f64,
    seed: u64,
) -> Result<Dataset> {
    generate_synthetic_with(&SynthConfig {
        users,
        minutes,
        features,
        coupling,
        seed,
        ..SynthConfig::default()
    })
}

pub fn generate_synthetic_with(cfg: &SynthConfig) -> Result<Dataset> {
    if cfg.features < 2 {
        return Err(DynImpError::InvalidConfig(format!(
            "need at least 2 features, got {}",
            cfg.features
        )));
    }
    if !(0.0..=1.0).contains(&cfg.coupling) {
        return Err(DynImpError::InvalidConfig(format!(
            "coupling must be in [0, 1], got {}",
            cfg.coupling
        )));
    }
    if cfg.classes == 0 || cfg.regime_minutes == 0 {
        return Err(DynImpError::InvalidConfig(
            "classes and regime_minutes must be positive".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let c = cfg.coupling;
    let noise_w = (1.0 - c * c).sqrt();
    let innov = (1.0 - cfg.phi * cfg.phi).sqrt(); // unit stationary variance
    let gains: Vec<f64> = (0..cfg.features).map(|f| 0.8 + 0.1 * f as f64).collect();
    let offsets: Vec<f64> = (0..cfg.features).map(|f| f as f64).collect();

    let mut windows = Vec::new();
    for _user in 0..cfg.users {
        let mut z = 0.0f64;
        let mut etas = vec![0.0f64; cfg.features];
        let mut frames = Vec::with_capacity(cfg.minutes);
        let mut regime = rng.gen_range(0..cfg.classes);
        for minute in 0..cfg.minutes {
            if minute % cfg.regime_minutes == 0 {
                regime = rng.gen_range(0..cfg.classes);
            }
            let (mu, scale) = regime_params(regime);
            let e: f64 = StandardNormal.sample(&mut rng);
            z = cfg.phi * z + innov * e;
            let latent = mu + scale * z;
            let mut features = Vec::with_capacity(cfg.features);
            for f in 0..cfg.features {
                let e: f64 = StandardNormal.sample(&mut rng);
                etas[f] = cfg.phi * etas[f] + innov * e;
                let white: f64 = StandardNormal.sample(&mut rng);
                let noise = (etas[f] + 2.0 * white) / 5.0f64.sqrt();
                let v = offsets[f] + gains[f] * (c * latent + noise_w * noise);
                features.push(Some(v));
            }
            frames.push(SensorFrame {
                timestamp: minute as i64 * 60,
                features,
                label_id: Some(regime),
            });
        }
        windows.extend(build_windows(&frames, cfg.window_len, cfg.stride)?);
    }

    let label_names = (0..cfg.classes)
        .map(|m| match (cfg.classes, m) {
            (4, 0) => "lying_down".to_string(),
            (4, 1) => "sitting".to_string(),
            (4, 2) => "walking".to_string(),
            (4, 3) => "other".to_string(),
            _ => format!("class{m}"),
        })
        .collect();
    Ok(Dataset {
        windows,
        scaling: None,
        feature_names: (0..cfg.features).map(|f| format!("ch{f}")).collect(),
        label_names,
    })
}
