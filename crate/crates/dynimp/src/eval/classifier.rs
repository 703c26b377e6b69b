//! Softmax regression over pooled window features.
//!
//! The classifier is deliberately simple and identical across imputation
//! methods so that score differences isolate imputation quality.

use serde::{Deserialize, Serialize};

use crate::error::{DynImpError, Result};
use crate::tensor::Tensor2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierHyper {
    pub lr: f64,
    pub epochs: usize,
}

impl Default for ClassifierHyper {
    fn default() -> Self {
        ClassifierHyper {
            lr: 0.5,
            epochs: 300,
        }
    }
}

/// Multinomial logistic regression with per-feature standardization fitted
/// on the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    /// L×(dim+1); last column is the bias.
    pub weights: Tensor2,
    pub feat_mean: Vec<f64>,
    pub feat_std: Vec<f64>,
    pub classes: usize,
}

/// Per-column mean and population standard deviation over time steps,
/// giving 2×cols pooled features per window.
pub fn pooled_features(values: &Tensor2) -> Vec<f64> {
    let steps = values.rows() as f64;
    let cols = values.cols();
    let mut out = Vec::with_capacity(2 * cols);
    for c in 0..cols {
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for t in 0..values.rows() {
            let v = values.get(t, c);
            sum += v;
            sumsq += v * v;
        }
        let mean = sum / steps;
        let var = (sumsq / steps - mean * mean).max(0.0);
        out.push(mean);
        out.push(var.sqrt());
    }
    out
}

fn standardize(model: &ClassifierModel, features: &[f64]) -> Vec<f64> {
    features
        .iter()
        .enumerate()
        .map(|(i, v)| (v - model.feat_mean[i]) / model.feat_std[i])
        .collect()
}

fn scores(model: &ClassifierModel, std_features: &[f64]) -> Vec<f64> {
    (0..model.classes)
        .map(|k| {
            let row = model.weights.row(k);
            let mut acc = row[std_features.len()]; // bias
            for (w, x) in row.iter().zip(std_features) {
                acc += w * x;
            }
            acc
        })
        .collect()
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Full-batch gradient-descent fit of a multinomial logistic model.
/// Deterministic given its inputs; `_seed` is accepted for interface
/// symmetry with the other trainers but unused (no stochastic steps).
pub fn train_classifier(
    features: &[Vec<f64>],
    labels: &[usize],
    classes: usize,
    hyper: &ClassifierHyper,
    _seed: u64,
) -> Result<ClassifierModel> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(DynImpError::EmptyInput(
            "classifier needs non-empty, aligned features and labels",
        ));
    }
    for k in 0..classes {
        if !labels.contains(&k) {
            return Err(DynImpError::MissingClass(format!("{k}")));
        }
    }
    let dim = features[0].len();
    let n = features.len();

    let mut feat_mean = vec![0.0; dim];
    let mut feat_std = vec![0.0; dim];
    for f in features {
        for (i, v) in f.iter().enumerate() {
            feat_mean[i] += v;
        }
    }
    for m in feat_mean.iter_mut() {
        *m /= n as f64;
    }
    for f in features {
        for (i, v) in f.iter().enumerate() {
            let d = v - feat_mean[i];
            feat_std[i] += d * d;
        }
    }
    for s in feat_std.iter_mut() {
        *s = (*s / n as f64).sqrt();
        if *s <= 0.0 {
            *s = 1.0;
        }
    }

    let mut model = ClassifierModel {
        weights: Tensor2::zeros(classes, dim + 1),
        feat_mean,
        feat_std,
        classes,
    };
    let std_feats: Vec<Vec<f64>> = features.iter().map(|f| standardize(&model, f)).collect();

    for _ in 0..hyper.epochs {
        let mut grad = Tensor2::zeros(classes, dim + 1);
        for (f, &y) in std_feats.iter().zip(labels) {
            let p = softmax(&scores(&model, f));
            for k in 0..classes {
                let d = p[k] - if k == y { 1.0 } else { 0.0 };
                let g = grad.row_mut(k);
                for (i, x) in f.iter().enumerate() {
                    g[i] += d * x;
                }
                g[dim] += d;
            }
        }
        let step = hyper.lr / n as f64;
        for (w, g) in model.weights.data_mut().iter_mut().zip(grad.data()) {
            *w -= step * g;
        }
    }
    Ok(model)
}

/// Predicted class id; ties break on the smaller id.
pub fn predict(model: &ClassifierModel, features: &[f64]) -> usize {
    let s = scores(model, &standardize(model, features));
    let mut best = 0;
    for (k, v) in s.iter().enumerate() {
        if *v > s[best] {
            best = k;
        }
    }
    best
}
