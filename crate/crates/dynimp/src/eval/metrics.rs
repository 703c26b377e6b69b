//! Balanced accuracy and imputation RMSE.

use crate::data::GroundTruthStore;
use crate::error::{DynImpError, Result};
use crate::imputers::ImputedWindow;

/// Mean per-class recall over the classes present in `truth`.
pub fn balanced_accuracy(predictions: &[usize], truth: &[usize], classes: usize) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != truth.len() {
        return Err(DynImpError::EmptyInput(
            "balanced accuracy needs non-empty, aligned predictions and truth",
        ));
    }
    if let Some(&bad) = truth.iter().find(|&&t| t >= classes) {
        return Err(DynImpError::InvalidConfig(format!(
            "truth label {bad} out of range (classes = {classes})"
        )));
    }
    let mut correct = vec![0usize; classes];
    let mut total = vec![0usize; classes];
    for (&p, &t) in predictions.iter().zip(truth) {
        total[t] += 1;
        if p == t {
            correct[t] += 1;
        }
    }
    let mut sum = 0.0;
    let mut present = 0usize;
    for k in 0..classes {
        if total[k] > 0 {
            sum += correct[k] as f64 / total[k] as f64;
            present += 1;
        }
    }
    Ok(sum / present as f64)
}

/// Root mean squared error over the store's cells. `imputed` must be aligned
/// with the window indices the store was built against, and the store's
/// values must be in the same space as the imputed values.
pub fn imputation_rmse(imputed: &[ImputedWindow], ground: &GroundTruthStore) -> Result<f64> {
    if ground.is_empty() {
        return Err(DynImpError::EmptyInput("ground truth store is empty"));
    }
    let mut sum = 0.0;
    for &(wi, t, f, truth) in &ground.cells {
        let v = imputed[wi].values.get(t, f);
        let d = v - truth;
        sum += d * d;
    }
    Ok((sum / ground.len() as f64).sqrt())
}
