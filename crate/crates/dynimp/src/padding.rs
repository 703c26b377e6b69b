//! Padding matrix construction and the masked-combine step.
//!
//! The padding matrix holds neighbor-based estimates at missing positions and
//! zeros elsewhere; combining it with the masked input yields the network
//! input regardless of what garbage sits at masked-out cells.

use serde::{Deserialize, Serialize};

use crate::data::Window;
use crate::error::{DynImpError, Result};
use crate::imputers::knn_fill_cells;
use crate::tensor::Tensor2;

/// T×F matrix, zero at observed positions, fill estimate at missing ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaddingMatrix {
    pub values: Tensor2,
}

/// kNN padding: estimates at missing cells come from the same neighbor
/// search as `imputers::impute_knn`, bit-exactly.
pub fn build_padding(window: &Window, k: usize) -> Result<PaddingMatrix> {
    let mut values = Tensor2::zeros(window.steps(), window.features());
    for (t, f, v) in knn_fill_cells(window, k)? {
        values.set(t, f, v);
    }
    Ok(PaddingMatrix { values })
}

/// Padding from any fully-imputed matrix: keeps the imputed value at missing
/// cells, zero at observed ones. Used for the zero / mean / interpolation
/// padding variants.
pub fn padding_from_imputed(window: &Window, imputed: &Tensor2) -> Result<PaddingMatrix> {
    if !window.values.same_shape(imputed) {
        return Err(DynImpError::ShapeMismatch(format!(
            "window {}x{} vs imputed {}x{}",
            window.steps(),
            window.features(),
            imputed.rows(),
            imputed.cols()
        )));
    }
    let mut values = Tensor2::zeros(window.steps(), window.features());
    for t in 0..window.steps() {
        for f in 0..window.features() {
            if !window.mask.observed(t, f) {
                values.set(t, f, imputed.get(t, f));
            }
        }
    }
    Ok(PaddingMatrix { values })
}

/// out = M ⊙ x + P. Missing positions of x contribute nothing regardless of
/// their stored content.
pub fn masked_combine(window: &Window, padding: &PaddingMatrix) -> Result<Tensor2> {
    if !window.values.same_shape(&padding.values) {
        return Err(DynImpError::ShapeMismatch(format!(
            "window {}x{} vs padding {}x{}",
            window.steps(),
            window.features(),
            padding.values.rows(),
            padding.values.cols()
        )));
    }
    let mut out = Tensor2::zeros(window.steps(), window.features());
    for t in 0..window.steps() {
        for f in 0..window.features() {
            let masked = if window.mask.observed(t, f) {
                window.values.get(t, f)
            } else {
                0.0
            };
            out.set(t, f, masked + padding.values.get(t, f));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
