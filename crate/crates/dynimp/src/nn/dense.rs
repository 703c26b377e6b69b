//! Affine layer with a choice of output activation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DynImpError, Result};
use crate::tensor::Tensor2;

use super::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseParams {
    pub w: Tensor2,
    pub b: Vec<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct DenseCache {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

pub type DenseGrads = DenseParams;

impl DenseParams {
    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        DenseParams {
            w: Tensor2::zeros(output, input),
            b: vec![0.0; output],
            activation,
        }
    }

    pub fn init(input: usize, output: usize, activation: Activation, rng: &mut ChaCha8Rng) -> Self {
        let mut p = Self::zeros(input, output, activation);
        let bound = 1.0 / (input as f64).sqrt();
        for v in p.w.data_mut() {
            *v = rng.gen_range(-bound..bound);
        }
        p
    }

    pub fn param_count(&self) -> usize {
        self.w.data().len() + self.b.len()
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.w.data());
        out.extend_from_slice(&self.b);
    }

    pub fn unflatten_from(&mut self, flat: &[f64]) -> usize {
        let nw = self.w.data().len();
        self.w.data_mut().copy_from_slice(&flat[..nw]);
        let nb = self.b.len();
        self.b.copy_from_slice(&flat[nw..nw + nb]);
        nw + nb
    }
}

pub fn dense_forward(params: &DenseParams, x: &[f64]) -> Result<(Vec<f64>, DenseCache)> {
    if x.len() != params.w.cols() {
        return Err(DynImpError::ShapeMismatch(format!(
            "dense: input len {} (want {})",
            x.len(),
            params.w.cols()
        )));
    }
    let mut y = Vec::with_capacity(params.b.len());
    for r in 0..params.w.rows() {
        let mut acc = params.b[r];
        for (wv, xv) in params.w.row(r).iter().zip(x) {
            acc += wv * xv;
        }
        y.push(match params.activation {
            Activation::Identity => acc,
            Activation::Sigmoid => sigmoid(acc),
        });
    }
    let cache = DenseCache {
        x: x.to_vec(),
        y: y.clone(),
    };
    Ok((y, cache))
}

/// Gradients given dL/d(pre-activation). Returns (parameter grads, dL/dx).
/// Used where the loss/activation pair has a fused, numerically stable
/// pre-activation gradient (sigmoid + cross-entropy).
pub fn dense_backward_preact(
    params: &DenseParams,
    cache: &DenseCache,
    d_pre: &[f64],
) -> Result<(DenseGrads, Vec<f64>)> {
    if d_pre.len() != params.b.len() || cache.x.len() != params.w.cols() {
        return Err(DynImpError::ShapeMismatch(format!(
            "dense backward: d_pre len {} (want {}), cache x len {} (want {})",
            d_pre.len(),
            params.b.len(),
            cache.x.len(),
            params.w.cols()
        )));
    }
    let mut grads = DenseGrads::zeros(params.w.cols(), params.w.rows(), params.activation);
    let mut dx = vec![0.0; params.w.cols()];
    for r in 0..params.w.rows() {
        let da = d_pre[r];
        grads.b[r] = da;
        let gw = grads.w.row_mut(r);
        for (k, xv) in cache.x.iter().enumerate() {
            gw[k] = da * xv;
        }
        for (k, wv) in params.w.row(r).iter().enumerate() {
            dx[k] += da * wv;
        }
    }
    Ok((grads, dx))
}

/// Gradients given dL/dy. Returns (parameter grads, dL/dx).
pub fn dense_backward(
    params: &DenseParams,
    cache: &DenseCache,
    dy: &[f64],
) -> Result<(DenseGrads, Vec<f64>)> {
    if dy.len() != params.b.len() || cache.x.len() != params.w.cols() {
        return Err(DynImpError::ShapeMismatch(format!(
            "dense backward: dy len {} (want {}), cache x len {} (want {})",
            dy.len(),
            params.b.len(),
            cache.x.len(),
            params.w.cols()
        )));
    }
    let mut grads = DenseGrads::zeros(params.w.cols(), params.w.rows(), params.activation);
    let mut dx = vec![0.0; params.w.cols()];
    for r in 0..params.w.rows() {
        let da = match params.activation {
            Activation::Identity => dy[r],
            Activation::Sigmoid => dy[r] * cache.y[r] * (1.0 - cache.y[r]),
        };
        grads.b[r] = da;
        let gw = grads.w.row_mut(r);
        for (k, xv) in cache.x.iter().enumerate() {
            gw[k] = da * xv;
        }
        for (k, wv) in params.w.row(r).iter().enumerate() {
            dx[k] += da * wv;
        }
    }
    Ok((grads, dx))
}
