//! Minimal dense/LSTM kernel with exact hand-derived gradients.
//!
//! 64-bit floats throughout so finite-difference checks are meaningful.

mod adam;
mod dense;
mod gradcheck;
mod lstm;

pub use adam::{AdamHyper, AdamState};
pub use dense::{
    dense_backward, dense_backward_preact, dense_forward, Activation, DenseCache, DenseGrads,
    DenseParams,
};
pub use gradcheck::{grad_check, GradCheckEntry, GradCheckReport};
pub use lstm::{
    lstm_backward, lstm_cell_forward, lstm_sequence_forward, LstmCache, LstmGrads, LstmParams,
    LstmState,
};

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Scales `grads` in place so the global L2 norm does not exceed `max_norm`.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            *g *= scale;
        }
    }
    norm
}

#[cfg(test)]
mod tests;
