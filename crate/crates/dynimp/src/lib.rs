//! Dynamic imputation for multi-channel wearable time series.
//!
//! Missing cells of a T×F sensor window are first padded with nearest-
//! neighbor estimates along the feature axis, then an LSTM-based denoising
//! autoencoder reconstructs the signal along the time axis. The crate also
//! ships classic baseline imputers (zero, filled mean, interpolation, kNN),
//! an indicator-variable augmentation, synthetic missingness injection, a
//! downstream activity classifier, and a seeded multi-method experiment
//! harness scored by balanced accuracy and imputation RMSE.

pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod imputers;
pub mod model;
pub mod nn;
pub mod padding;
pub mod tensor;

pub use error::{DynImpError, Result};
