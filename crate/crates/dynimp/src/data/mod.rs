//! Dataset model: sensor frames, fixed-length windows with masks, feature
//! scaling, synthetic missingness injection, and dataset persistence.

mod ingest;
mod synth;

pub use ingest::{ingest_csv, CsvSchema};
pub use synth::{generate_synthetic, generate_synthetic_with, SynthConfig};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DynImpError, Result};
use crate::tensor::Tensor2;

/// One 1-minute group of sensor readings. `None` marks a missing feature.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorFrame {
    /// Seconds since epoch; strictly increasing within a stream.
    pub timestamp: i64,
    pub features: Vec<Option<f64>>,
    pub label_id: Option<usize>,
}

/// Binary T×F observation mask: 1 = observed, 0 = missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskMatrix {
    rows: usize,
    cols: usize,
    bits: Vec<u8>,
}

impl MaskMatrix {
    pub fn ones(rows: usize, cols: usize) -> Self {
        MaskMatrix {
            rows,
            cols,
            bits: vec![1; rows * cols],
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        MaskMatrix {
            rows,
            cols,
            bits: vec![0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn observed(&self, r: usize, c: usize) -> bool {
        self.bits[r * self.cols + c] == 1
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, observed: bool) {
        self.bits[r * self.cols + c] = observed as u8;
    }

    pub fn count_observed(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    pub fn count_missing(&self) -> usize {
        self.bits.len() - self.count_observed()
    }

    /// Element-wise AND of two masks.
    pub fn intersect(&self, other: &MaskMatrix) -> Result<MaskMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(DynImpError::ShapeMismatch(format!(
                "mask {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(a, b)| a & b)
            .collect();
        Ok(MaskMatrix {
            rows: self.rows,
            cols: self.cols,
            bits,
        })
    }
}

/// A T×F slice of consecutive time steps with its observation mask and label.
///
/// Values at masked-out positions are unspecified until imputation; callers
/// must consult the mask before reading a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub values: Tensor2,
    pub mask: MaskMatrix,
    pub label_id: usize,
}

impl Window {
    pub fn steps(&self) -> usize {
        self.values.rows()
    }

    pub fn features(&self) -> usize {
        self.values.cols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScalingMode {
    MinMax,
    ZScore,
}

impl std::str::FromStr for ScalingMode {
    type Err = DynImpError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minmax" => Ok(ScalingMode::MinMax),
            "zscore" => Ok(ScalingMode::ZScore),
            other => Err(DynImpError::InvalidConfig(format!(
                "unknown scaling mode `{other}` (expected minmax | zscore)"
            ))),
        }
    }
}

/// Per-feature statistics for scaling, computed from observed cells only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScale {
    /// min (minmax) or mean (zscore).
    pub lo: f64,
    /// max (minmax) or population std (zscore).
    pub hi: f64,
    /// Feature had a single distinct observed value.
    pub constant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub mode: ScalingMode,
    pub per_feature: Vec<FeatureScale>,
}

impl ScalingParams {
    /// Maps one raw value of feature `f` into scaled space.
    pub fn scale(&self, f: usize, v: f64) -> f64 {
        let s = &self.per_feature[f];
        if s.constant {
            // Constant features map to mid-range so bce stays well-defined.
            return match self.mode {
                ScalingMode::MinMax => 0.5,
                ScalingMode::ZScore => 0.0,
            };
        }
        match self.mode {
            // Clamped: statistics fitted on a training split leave held-out
            // values slightly outside [min, max], and downstream bce needs
            // the unit interval.
            ScalingMode::MinMax => ((v - s.lo) / (s.hi - s.lo)).clamp(0.0, 1.0),
            ScalingMode::ZScore => (v - s.lo) / s.hi,
        }
    }

    pub fn unscale(&self, f: usize, v: f64) -> f64 {
        let s = &self.per_feature[f];
        if s.constant {
            return s.lo;
        }
        match self.mode {
            ScalingMode::MinMax => s.lo + v * (s.hi - s.lo),
            ScalingMode::ZScore => s.lo + v * s.hi,
        }
    }
}

/// Windows plus metadata. Immutable after construction; `scaling` records the
/// transform already applied to `windows` (None = raw space).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub windows: Vec<Window>,
    pub scaling: Option<ScalingParams>,
    pub feature_names: Vec<String>,
    pub label_names: Vec<String>,
}

impl Dataset {
    pub fn features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn classes(&self) -> usize {
        self.label_names.len()
    }
}

/// Original values of cells removed by `inject_missingness`, keyed by
/// (window index, time step, feature). Values are in the dataset's space at
/// injection time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthStore {
    pub cells: Vec<(usize, usize, usize, f64)>,
}

impl GroundTruthStore {
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }
}

/// Slices `frames` into windows starting at 0, stride, 2·stride, …;
/// trailing partial windows are dropped. Each window carries the modal label
/// of its frames, ties broken by smallest label id.
pub fn build_windows(frames: &[SensorFrame], t: usize, stride: usize) -> Result<Vec<Window>> {
    if t < 2 {
        return Err(DynImpError::InvalidConfig(format!(
            "window length must be >= 2, got {t}"
        )));
    }
    if stride == 0 {
        return Err(DynImpError::InvalidConfig("stride must be >= 1".into()));
    }
    if frames.len() < t {
        return Ok(Vec::new());
    }
    let f = frames[0].features.len();
    let mut windows = Vec::new();
    let mut start = 0;
    while start + t <= frames.len() {
        let chunk = &frames[start..start + t];
        let mut values = Tensor2::zeros(t, f);
        let mut mask = MaskMatrix::zeros(t, f);
        for (r, frame) in chunk.iter().enumerate() {
            if frame.features.len() != f {
                return Err(DynImpError::ShapeMismatch(format!(
                    "frame at index {} has {} features, expected {}",
                    start + r,
                    frame.features.len(),
                    f
                )));
            }
            for (c, cell) in frame.features.iter().enumerate() {
                if let Some(v) = cell {
                    values.set(r, c, *v);
                    mask.set(r, c, true);
                }
            }
        }
        windows.push(Window {
            values,
            mask,
            label_id: modal_label(chunk),
        });
        start += stride;
    }
    Ok(windows)
}

fn modal_label(frames: &[SensorFrame]) -> usize {
    let mut counts: Vec<(usize, usize)> = Vec::new();
    for frame in frames {
        if let Some(l) = frame.label_id {
            match counts.iter_mut().find(|(id, _)| *id == l) {
                Some((_, n)) => *n += 1,
                None => counts.push((l, 1)),
            }
        }
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(id, _)| id)
        .unwrap_or(0)
}

/// Fits per-feature scaling statistics from the observed cells of `windows`.
pub fn fit_scaling(dataset: &Dataset, mode: ScalingMode) -> Result<ScalingParams> {
    fit_scaling_windows(&dataset.windows, &dataset.feature_names, mode)
}

/// Same as [`fit_scaling`] but over an explicit window slice (e.g. the
/// training split only).
pub fn fit_scaling_windows(
    windows: &[Window],
    feature_names: &[String],
    mode: ScalingMode,
) -> Result<ScalingParams> {
    let f = feature_names.len();
    let mut per_feature = Vec::with_capacity(f);
    for fi in 0..f {
        let mut count = 0usize;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for w in windows {
            for t in 0..w.steps() {
                if w.mask.observed(t, fi) {
                    let v = w.values.get(t, fi);
                    count += 1;
                    min = min.min(v);
                    max = max.max(v);
                    sum += v;
                    sumsq += v * v;
                }
            }
        }
        if count == 0 {
            return Err(DynImpError::NoObservedCells(feature_names[fi].clone()));
        }
        let scale = match mode {
            ScalingMode::MinMax => {
                let constant = max <= min;
                FeatureScale {
                    lo: min,
                    hi: max,
                    constant,
                }
            }
            ScalingMode::ZScore => {
                let mean = sum / count as f64;
                let var = (sumsq / count as f64 - mean * mean).max(0.0);
                let std = var.sqrt();
                FeatureScale {
                    lo: mean,
                    hi: std,
                    constant: std <= 0.0,
                }
            }
        };
        per_feature.push(scale);
    }
    Ok(ScalingParams { mode, per_feature })
}

/// Returns a copy of `dataset` with every observed cell mapped into scaled
/// space and `scaling` recorded. Masked-out cells are zeroed.
pub fn apply_scaling(dataset: &Dataset, scaling: &ScalingParams) -> Dataset {
    let windows = dataset
        .windows
        .iter()
        .map(|w| {
            let mut values = Tensor2::zeros(w.steps(), w.features());
            for t in 0..w.steps() {
                for f in 0..w.features() {
                    if w.mask.observed(t, f) {
                        values.set(t, f, scaling.scale(f, w.values.get(t, f)));
                    }
                }
            }
            Window {
                values,
                mask: w.mask.clone(),
                label_id: w.label_id,
            }
        })
        .collect();
    Dataset {
        windows,
        scaling: Some(scaling.clone()),
        feature_names: dataset.feature_names.clone(),
        label_names: dataset.label_names.clone(),
    }
}

/// Independently removes each observed cell with probability `level`,
/// recording removed originals for later RMSE scoring. Already-missing cells
/// stay missing; observed values are never altered, only mask bits flip.
pub fn inject_missingness(
    dataset: &Dataset,
    level: f64,
    seed: u64,
) -> Result<(Dataset, GroundTruthStore)> {
    if !(0.0..1.0).contains(&level) {
        return Err(DynImpError::InvalidConfig(format!(
            "missingness level must be in [0, 1), got {level}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = dataset.clone();
    let mut store = GroundTruthStore::default();
    for (wi, w) in out.windows.iter_mut().enumerate() {
        for t in 0..w.values.rows() {
            for f in 0..w.values.cols() {
                if w.mask.observed(t, f) && rng.gen::<f64>() < level {
                    store.cells.push((wi, t, f, w.values.get(t, f)));
                    w.mask.set(t, f, false);
                }
            }
        }
    }
    Ok((out, store))
}

const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    format: String,
    version: u32,
    dataset: Dataset,
}

/// Writes a dataset as a versioned JSON container. Round-trips bit-exactly.
pub fn save_dataset(dataset: &Dataset, path: &std::path::Path) -> Result<()> {
    let file = DatasetFile {
        format: "dynimp-dataset".into(),
        version: DATASET_FORMAT_VERSION,
        dataset: dataset.clone(),
    };
    let text = serde_json::to_string(&file)?;
    std::fs::write(path, text).map_err(|e| DynImpError::io(path.display().to_string(), e))
}

pub fn load_dataset(path: &std::path::Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| DynImpError::io(path.display().to_string(), e))?;
    let file: DatasetFile = serde_json::from_str(&text)?;
    if file.format != "dynimp-dataset" || file.version != DATASET_FORMAT_VERSION {
        return Err(DynImpError::FormatVersion(format!(
            "{} v{}",
            file.format, file.version
        )));
    }
    Ok(file.dataset)
}

#[cfg(test)]
pub(crate) mod tests;
