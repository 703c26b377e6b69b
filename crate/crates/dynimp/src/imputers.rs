//! Baseline imputation strategies and the indicator-variable augmentation.
//!
//! Every imputer maps a masked window to a fully-observed one and never
//! alters an observed cell.

use serde::{Deserialize, Serialize};

use crate::data::{MaskMatrix, Window};
use crate::error::{DynImpError, Result};
use crate::tensor::Tensor2;

/// A window with every cell filled. `source_mask` is the pre-imputation mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputedWindow {
    pub values: Tensor2,
    pub source_mask: MaskMatrix,
    pub label_id: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ImputerKind {
    Zero,
    Mean,
    Interp,
    Knn,
}

impl std::str::FromStr for ImputerKind {
    type Err = DynImpError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(ImputerKind::Zero),
            "mean" => Ok(ImputerKind::Mean),
            "interp" => Ok(ImputerKind::Interp),
            "knn" => Ok(ImputerKind::Knn),
            other => Err(DynImpError::InvalidConfig(format!(
                "unknown imputer `{other}` (expected zero | mean | interp | knn)"
            ))),
        }
    }
}

fn base(window: &Window) -> ImputedWindow {
    let mut values = window.values.clone();
    // Masked-out content is unspecified; clear it before filling.
    for t in 0..window.steps() {
        for f in 0..window.features() {
            if !window.mask.observed(t, f) {
                values.set(t, f, 0.0);
            }
        }
    }
    ImputedWindow {
        values,
        source_mask: window.mask.clone(),
        label_id: window.label_id,
    }
}

/// Missing cells become 0 (scaled space).
pub fn impute_zero(window: &Window) -> ImputedWindow {
    base(window)
}

/// Missing cell (t, f) becomes `means[f]`, a dataset-level feature mean.
pub fn impute_filled_mean(window: &Window, means: &[f64]) -> ImputedWindow {
    assert_eq!(means.len(), window.features(), "means must cover all features");
    let mut out = base(window);
    for t in 0..window.steps() {
        for f in 0..window.features() {
            if !window.mask.observed(t, f) {
                out.values.set(t, f, means[f]);
            }
        }
    }
    out
}

/// Per feature, linearly interpolates each missing run between its nearest
/// observed neighbors in time; leading/trailing runs extend the nearest
/// observed value; a fully-missing column falls back to 0.
pub fn impute_interpolation(window: &Window) -> ImputedWindow {
    let steps = window.steps();
    let mut out = base(window);
    for f in 0..window.features() {
        let observed: Vec<usize> = (0..steps).filter(|&t| window.mask.observed(t, f)).collect();
        if observed.is_empty() {
            continue; // stays 0
        }
        for t in 0..steps {
            if window.mask.observed(t, f) {
                continue;
            }
            let next = observed.iter().find(|&&o| o > t);
            let prev = observed.iter().rev().find(|&&o| o < t);
            let v = match (prev, next) {
                (Some(&a), Some(&b)) => {
                    let va = window.values.get(a, f);
                    let vb = window.values.get(b, f);
                    va + (vb - va) * (t - a) as f64 / (b - a) as f64
                }
                (Some(&a), None) => window.values.get(a, f),
                (None, Some(&b)) => window.values.get(b, f),
                (None, None) => unreachable!(),
            };
            out.values.set(t, f, v);
        }
    }
    out
}

/// kNN fill value for every missing cell of `window`, as (t, f, value)
/// triples in row-major order. Shared by [`impute_knn`] and the padding
/// matrix builder so the two agree bit-exactly.
///
/// Neighbor candidates for cell (t, f) are the other time rows that observe
/// feature f, ranked by partial Euclidean distance over features observed in
/// both rows, rescaled by sqrt(F / co-observed-count); rows sharing no
/// observed feature sort last (infinite distance); ties break on smaller row
/// index. The fill is the mean of the k nearest candidates; with no
/// candidates it falls back to the window-level feature mean, or 0 if the
/// feature is entirely missing.
pub fn knn_fill_cells(window: &Window, k: usize) -> Result<Vec<(usize, usize, f64)>> {
    assert!(k >= 1, "k must be >= 1");
    let steps = window.steps();
    let nf = window.features();
    if window.mask.count_observed() == 0 {
        return Err(DynImpError::EmptyWindow);
    }

    let distance = |a: usize, b: usize| -> f64 {
        let mut sum = 0.0;
        let mut co = 0usize;
        for f in 0..nf {
            if window.mask.observed(a, f) && window.mask.observed(b, f) {
                let d = window.values.get(a, f) - window.values.get(b, f);
                sum += d * d;
                co += 1;
            }
        }
        if co == 0 {
            f64::INFINITY
        } else {
            (sum * nf as f64 / co as f64).sqrt()
        }
    };

    let mut fills = Vec::new();
    for t in 0..steps {
        for f in 0..nf {
            if window.mask.observed(t, f) {
                continue;
            }
            let mut candidates: Vec<(f64, usize)> = (0..steps)
                .filter(|&j| j != t && window.mask.observed(j, f))
                .map(|j| (distance(t, j), j))
                .collect();
            candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let v = if candidates.is_empty() {
                // Feature unobserved in this window: fall back to the
                // window-level feature mean, which does not exist either,
                // so 0 (scaled space).
                0.0
            } else {
                let take = k.min(candidates.len());
                let sum: f64 = candidates[..take]
                    .iter()
                    .map(|&(_, j)| window.values.get(j, f))
                    .sum();
                sum / take as f64
            };
            fills.push((t, f, v));
        }
    }
    Ok(fills)
}

/// Fills each missing cell from its k nearest time rows (see
/// [`knn_fill_cells`] for the distance and tie rules).
pub fn impute_knn(window: &Window, k: usize) -> Result<ImputedWindow> {
    let mut out = base(window);
    for (t, f, v) in knn_fill_cells(window, k)? {
        out.values.set(t, f, v);
    }
    Ok(out)
}

/// Appends a was-missing flag per feature: output columns [0, F) are the
/// imputed values, columns [F, 2F) are 1 − mask (1 = was missing).
pub fn augment_indicator(window: &ImputedWindow) -> Tensor2 {
    let steps = window.values.rows();
    let nf = window.values.cols();
    let mut out = Tensor2::zeros(steps, 2 * nf);
    for t in 0..steps {
        for f in 0..nf {
            out.set(t, f, window.values.get(t, f));
            out.set(t, nf + f, if window.source_mask.observed(t, f) { 0.0 } else { 1.0 });
        }
    }
    out
}
