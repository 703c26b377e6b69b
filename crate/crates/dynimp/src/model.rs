//! The dynamic-imputation model: Bernoulli corruption, a padding-strategy
//! switch, an LSTM encoder with a per-step dense decoder, masked
//! reconstruction loss, training, and imputation inference.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{MaskMatrix, Window};
use crate::error::{DynImpError, Result};
use crate::imputers::{impute_interpolation, ImputedWindow};
use crate::nn::{
    clip_global_norm, dense_backward_preact, dense_forward, lstm_backward, lstm_sequence_forward,
    Activation, AdamHyper, AdamState, DenseCache, DenseParams, LstmCache, LstmParams, LstmState,
};
use crate::padding::{build_padding, masked_combine, padding_from_imputed, PaddingMatrix};
use crate::tensor::Tensor2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PaddingStrategy {
    Zero,
    Mean,
    Interp,
    Knn,
}

impl std::str::FromStr for PaddingStrategy {
    type Err = DynImpError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(PaddingStrategy::Zero),
            "mean" => Ok(PaddingStrategy::Mean),
            "interp" => Ok(PaddingStrategy::Interp),
            "knn" => Ok(PaddingStrategy::Knn),
            other => Err(DynImpError::InvalidConfig(format!(
                "unknown padding strategy `{other}` (expected zero | mean | interp | knn)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossMode {
    Bce,
    Mse,
}

impl std::str::FromStr for LossMode {
    type Err = DynImpError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bce" => Ok(LossMode::Bce),
            "mse" => Ok(LossMode::Mse),
            other => Err(DynImpError::InvalidConfig(format!(
                "unknown loss `{other}` (expected bce | mse)"
            ))),
        }
    }
}

/// Stochastic dropout corruption: each cell keeps its value with probability
/// `keep_prob`, else is zeroed and treated as missing for padding purposes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub keep_prob: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynImpConfig {
    pub padding_strategy: PaddingStrategy,
    pub k: usize,
    pub hidden: usize,
    pub keep_prob: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamHyper,
    pub loss: LossMode,
    pub clip_norm: f64,
}

impl Default for DynImpConfig {
    fn default() -> Self {
        DynImpConfig {
            padding_strategy: PaddingStrategy::Knn,
            k: 5,
            hidden: 32,
            keep_prob: 0.8,
            epochs: 100,
            batch_size: 32,
            adam: AdamHyper::default(),
            loss: LossMode::Bce,
            clip_norm: 5.0,
        }
    }
}

impl DynImpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(DynImpError::InvalidConfig("hidden size must be >= 1".into()));
        }
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return Err(DynImpError::InvalidConfig(format!(
                "keep probability must be in (0, 1], got {}",
                self.keep_prob
            )));
        }
        if self.k == 0 {
            return Err(DynImpError::InvalidConfig("k must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(DynImpError::InvalidConfig("batch size must be >= 1".into()));
        }
        Ok(())
    }
}

/// LSTM encoder over time steps plus a per-step dense decoder back to
/// feature space. `feature_means` back the mean padding strategy and are
/// captured from the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynImpModel {
    pub encoder: LstmParams,
    pub decoder: DenseParams,
    pub config: DynImpConfig,
    pub feature_means: Vec<f64>,
    pub train_log: Vec<f64>,
}

impl DynImpModel {
    pub fn new(features: usize, config: DynImpConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = LstmParams::init(features, config.hidden, &mut rng);
        let activation = match config.loss {
            LossMode::Bce => Activation::Sigmoid,
            LossMode::Mse => Activation::Identity,
        };
        let decoder = DenseParams::init(config.hidden, features, activation, &mut rng);
        Ok(DynImpModel {
            encoder,
            decoder,
            config,
            feature_means: vec![0.0; features],
            train_log: Vec::new(),
        })
    }

    pub fn features(&self) -> usize {
        self.encoder.input
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.encoder.flatten_into(&mut out);
        self.decoder.flatten_into(&mut out);
        out
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(DynImpError::ShapeMismatch(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let used = self.encoder.unflatten_from(flat);
        self.decoder.unflatten_from(&flat[used..]);
        Ok(())
    }
}

/// x̃ = r ⊙ x with r ~ Bernoulli(keep_prob) per cell. The effective mask is
/// mask ∧ r, so dropped cells count as missing when padding is built.
pub fn corrupt(x: &Tensor2, mask: &MaskMatrix, spec: &CorruptionSpec) -> (Tensor2, MaskMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut values = x.clone();
    let mut eff = mask.clone();
    for t in 0..x.rows() {
        for f in 0..x.cols() {
            let keep = rng.gen::<f64>() < spec.keep_prob;
            if !keep {
                values.set(t, f, 0.0);
                eff.set(t, f, false);
            }
        }
    }
    (values, eff)
}

/// Everything the backward pass needs from one model forward.
pub struct ForwardCaches {
    pub input: Tensor2,
    pub effective_mask: MaskMatrix,
    pub lstm: Vec<LstmCache>,
    pub dense: Vec<DenseCache>,
}

fn build_strategy_padding(model: &DynImpModel, window: &Window) -> Result<PaddingMatrix> {
    match model.config.padding_strategy {
        PaddingStrategy::Zero => Ok(PaddingMatrix {
            values: Tensor2::zeros(window.steps(), window.features()),
        }),
        PaddingStrategy::Mean => {
            let mut values = Tensor2::zeros(window.steps(), window.features());
            for t in 0..window.steps() {
                for f in 0..window.features() {
                    if !window.mask.observed(t, f) {
                        values.set(t, f, model.feature_means[f]);
                    }
                }
            }
            Ok(PaddingMatrix { values })
        }
        PaddingStrategy::Interp => {
            let imputed = impute_interpolation(window);
            padding_from_imputed(window, &imputed.values)
        }
        PaddingStrategy::Knn => {
            // A window left with zero observed cells after corruption has no
            // neighbor information; fall back to zero padding.
            if window.mask.count_observed() == 0 {
                Ok(PaddingMatrix {
                    values: Tensor2::zeros(window.steps(), window.features()),
                })
            } else {
                build_padding(window, model.config.k)
            }
        }
    }
}

/// corrupt → padding on the effective mask → masked combine → LSTM →
/// per-step dense decode.
pub fn forward(
    model: &DynImpModel,
    window: &Window,
    spec: &CorruptionSpec,
) -> Result<(Tensor2, ForwardCaches)> {
    if window.features() != model.features() {
        return Err(DynImpError::ShapeMismatch(format!(
            "window has {} features, model expects {}",
            window.features(),
            model.features()
        )));
    }
    if model.config.loss == LossMode::Bce {
        for t in 0..window.steps() {
            for f in 0..window.features() {
                if window.mask.observed(t, f) {
                    let v = window.values.get(t, f);
                    if !(-1e-9..=1.0 + 1e-9).contains(&v) {
                        return Err(DynImpError::UnscaledInput { t, f, value: v });
                    }
                }
            }
        }
    }

    let (x_tilde, eff_mask) = corrupt(&window.values, &window.mask, spec);
    let corrupted = Window {
        values: x_tilde,
        mask: eff_mask.clone(),
        label_id: window.label_id,
    };
    // Padding is rebuilt per corruption draw: each draw changes the
    // effective mask and therefore the nearest neighbors.
    let padding = build_strategy_padding(model, &corrupted)?;
    let input = masked_combine(&corrupted, &padding)?;

    let (hs, lstm_caches) = lstm_sequence_forward(
        &model.encoder,
        &input,
        &LstmState::zeros(model.config.hidden),
    )?;
    let steps = window.steps();
    let mut z = Tensor2::zeros(steps, window.features());
    let mut dense_caches = Vec::with_capacity(steps);
    for t in 0..steps {
        let (out, cache) = dense_forward(&model.decoder, hs.row(t))?;
        z.row_mut(t).copy_from_slice(&out);
        dense_caches.push(cache);
    }
    Ok((
        z,
        ForwardCaches {
            input,
            effective_mask: eff_mask,
            lstm: lstm_caches,
            dense: dense_caches,
        },
    ))
}

/// Mean reconstruction loss over cells where `train_mask` = 1.
///
/// bce: −[x log z + (1−x) log(1−z)] with z clamped to [1e-7, 1−1e-7];
/// mse: (z − x)².
pub fn loss(z: &Tensor2, target: &Tensor2, train_mask: &MaskMatrix, mode: LossMode) -> Result<f64> {
    if !z.same_shape(target) || z.rows() != train_mask.rows() || z.cols() != train_mask.cols() {
        return Err(DynImpError::ShapeMismatch(
            "loss: z / target / mask shapes differ".into(),
        ));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for t in 0..z.rows() {
        for f in 0..z.cols() {
            if !train_mask.observed(t, f) {
                continue;
            }
            let x = target.get(t, f);
            let zv = z.get(t, f);
            total += match mode {
                LossMode::Bce => {
                    let zc = zv.clamp(1e-7, 1.0 - 1e-7);
                    -(x * zc.ln() + (1.0 - x) * (1.0 - zc).ln())
                }
                LossMode::Mse => (zv - x) * (zv - x),
            };
            count += 1;
        }
    }
    if count == 0 {
        return Err(DynImpError::EmptyLossSupport);
    }
    Ok(total / count as f64)
}

/// Full backward pass for one window: returns flat gradients matching
/// `params_flat` layout.
pub fn backward(
    model: &DynImpModel,
    caches: &ForwardCaches,
    z: &Tensor2,
    target: &Tensor2,
    train_mask: &MaskMatrix,
) -> Result<Vec<f64>> {
    let steps = z.rows();
    let nf = z.cols();
    let count = (0..steps)
        .flat_map(|t| (0..nf).map(move |f| (t, f)))
        .filter(|&(t, f)| train_mask.observed(t, f))
        .count();
    if count == 0 {
        return Err(DynImpError::EmptyLossSupport);
    }
    let scale = 1.0 / count as f64;

    let mut decoder_grads = DenseParams::zeros(
        model.config.hidden,
        nf,
        model.decoder.activation,
    );
    let mut dhs = Tensor2::zeros(steps, model.config.hidden);
    for t in 0..steps {
        // dL/d(pre-activation) of the decoder at step t. For bce+sigmoid the
        // fused form is (z − x); for mse+identity it is 2(z − x).
        let mut d_pre = vec![0.0; nf];
        for f in 0..nf {
            if !train_mask.observed(t, f) {
                continue;
            }
            let diff = z.get(t, f) - target.get(t, f);
            d_pre[f] = match model.config.loss {
                LossMode::Bce => diff * scale,
                LossMode::Mse => 2.0 * diff * scale,
            };
        }
        let (grads, dh) = dense_backward_preact(&model.decoder, &caches.dense[t], &d_pre)?;
        for (acc, g) in decoder_grads.w.data_mut().iter_mut().zip(grads.w.data()) {
            *acc += g;
        }
        for (acc, g) in decoder_grads.b.iter_mut().zip(&grads.b) {
            *acc += g;
        }
        dhs.row_mut(t).copy_from_slice(&dh);
    }
    let (encoder_grads, _dxs) = lstm_backward(&model.encoder, &caches.lstm, &dhs)?;

    let mut flat = Vec::with_capacity(model.param_count());
    encoder_grads.flatten_into(&mut flat);
    decoder_grads.flatten_into(&mut flat);
    Ok(flat)
}

/// Loss of one window under a frozen corruption seed, as a pure function of
/// the flat parameter vector. Backs gradient checking.
pub fn loss_at_params(
    model: &DynImpModel,
    window: &Window,
    spec: &CorruptionSpec,
    flat: &[f64],
) -> Result<f64> {
    let mut probe = model.clone();
    probe.set_params_flat(flat)?;
    let (z, _caches) = forward(&probe, window, spec)?;
    loss(&z, &window.values, &window.mask, probe.config.loss)
}

/// Per-epoch mean losses from training `model` on `windows` (already scaled).
///
/// Every window sees a fresh corruption draw and fresh padding each epoch.
/// The loss target is the uncorrupted window, restricted to its originally
/// observed cells. Deterministic given (model, windows, seed).
pub fn train(model: &mut DynImpModel, windows: &[Window], seed: u64) -> Result<Vec<f64>> {
    train_for(model, windows, seed, model.config.epochs)
}

/// [`train`] with an explicit epoch count, leaving `model.config` untouched.
/// Used when resuming from a checkpoint.
pub fn train_for(
    model: &mut DynImpModel,
    windows: &[Window],
    seed: u64,
    epochs: usize,
) -> Result<Vec<f64>> {
    model.config.validate()?;
    if windows.is_empty() {
        return Err(DynImpError::EmptyInput("training needs at least one window"));
    }

    // Feature means over observed cells, for the mean padding strategy.
    let nf = model.features();
    let mut sums = vec![0.0; nf];
    let mut counts = vec![0usize; nf];
    for w in windows {
        for t in 0..w.steps() {
            for f in 0..nf {
                if w.mask.observed(t, f) {
                    sums[f] += w.values.get(t, f);
                    counts[f] += 1;
                }
            }
        }
    }
    model.feature_means = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = model.params_flat();
    let mut adam = AdamState::new(params.len());
    let mut log = Vec::with_capacity(epochs);

    let mut order: Vec<usize> = (0..windows.len()).collect();
    for epoch in 0..epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_cells = 0usize;
        for (batch_no, batch) in order.chunks(model.config.batch_size).enumerate() {
            let mut batch_grads = vec![0.0; params.len()];
            let mut batch_loss_ok = true;
            for &wi in batch {
                let window = &windows[wi];
                let spec = CorruptionSpec {
                    keep_prob: model.config.keep_prob,
                    seed: rng.gen(),
                };
                let (z, caches) = forward(model, window, &spec)?;
                let l = loss(&z, &window.values, &window.mask, model.config.loss)?;
                if !l.is_finite() {
                    batch_loss_ok = false;
                }
                epoch_loss += l;
                epoch_cells += 1;
                let grads = backward(model, &caches, &z, &window.values, &window.mask)?;
                for (acc, g) in batch_grads.iter_mut().zip(&grads) {
                    *acc += g;
                }
            }
            if !batch_loss_ok {
                return Err(DynImpError::NonFiniteLoss {
                    epoch,
                    batch: batch_no,
                });
            }
            let inv = 1.0 / batch.len() as f64;
            for g in batch_grads.iter_mut() {
                *g *= inv;
            }
            clip_global_norm(&mut batch_grads, model.config.clip_norm);
            adam.update(&mut params, &batch_grads, &model.config.adam);
            model.set_params_flat(&params)?;
        }
        let mean = epoch_loss / epoch_cells as f64;
        if !mean.is_finite() {
            return Err(DynImpError::NonFiniteLoss { epoch, batch: 0 });
        }
        log.push(mean);
    }
    model.train_log.extend_from_slice(&log);
    Ok(log)
}

/// Inference: forward without corruption; observed cells pass through,
/// missing cells take the decoder output.
pub fn impute(model: &DynImpModel, window: &Window) -> Result<ImputedWindow> {
    let spec = CorruptionSpec {
        keep_prob: 1.0,
        seed: 0,
    };
    let (z, _caches) = forward(model, window, &spec)?;
    let mut values = window.values.clone();
    for t in 0..window.steps() {
        for f in 0..window.features() {
            if !window.mask.observed(t, f) {
                values.set(t, f, z.get(t, f));
            }
        }
    }
    Ok(ImputedWindow {
        values,
        source_mask: window.mask.clone(),
        label_id: window.label_id,
    })
}

const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    seed: u64,
    scaling: Option<crate::data::ScalingParams>,
    model: DynImpModel,
}

/// Versioned checkpoint carrying all shapes, hyperparameters, the training
/// seed, and the scaling used to map raw data into model space. Round-trips
/// bit-exactly.
pub fn save_checkpoint(
    model: &DynImpModel,
    scaling: Option<&crate::data::ScalingParams>,
    seed: u64,
    path: &std::path::Path,
) -> Result<()> {
    let file = CheckpointFile {
        format: "dynimp-checkpoint".into(),
        version: CHECKPOINT_FORMAT_VERSION,
        seed,
        scaling: scaling.cloned(),
        model: model.clone(),
    };
    let text = serde_json::to_string(&file)?;
    std::fs::write(path, text).map_err(|e| DynImpError::io(path.display().to_string(), e))
}

pub fn load_checkpoint(
    path: &std::path::Path,
) -> Result<(DynImpModel, Option<crate::data::ScalingParams>, u64)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| DynImpError::io(path.display().to_string(), e))?;
    let file: CheckpointFile = serde_json::from_str(&text)?;
    if file.format != "dynimp-checkpoint" || file.version != CHECKPOINT_FORMAT_VERSION {
        return Err(DynImpError::FormatVersion(format!(
            "{} v{}",
            file.format, file.version
        )));
    }
    Ok((file.model, file.scaling, file.seed))
}
