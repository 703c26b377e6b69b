//! Single LSTM cell and its unrolled sequence form, with full BPTT.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DynImpError, Result};
use crate::tensor::Tensor2;

use super::sigmoid;

/// All trainable weights of one LSTM cell.
///
/// Gates: `i` input, `g` forget, `c` candidate, `o` output. Per gate:
/// input weights (H×D), recurrent weights (H×H), bias (H).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub input: usize,
    pub hidden: usize,
    pub w_i: Tensor2,
    pub u_i: Tensor2,
    pub b_i: Vec<f64>,
    pub w_g: Tensor2,
    pub u_g: Tensor2,
    pub b_g: Vec<f64>,
    pub w_c: Tensor2,
    pub u_c: Tensor2,
    pub b_c: Vec<f64>,
    pub w_o: Tensor2,
    pub u_o: Tensor2,
    pub b_o: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Everything the backward pass needs from one forward step.
#[derive(Debug, Clone)]
pub struct LstmCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub gate_i: Vec<f64>,
    pub gate_f: Vec<f64>,
    pub cand: Vec<f64>,
    pub gate_o: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let w = || Tensor2::zeros(hidden, input);
        let u = || Tensor2::zeros(hidden, hidden);
        let b = || vec![0.0; hidden];
        LstmParams {
            input,
            hidden,
            w_i: w(),
            u_i: u(),
            b_i: b(),
            w_g: w(),
            u_g: u(),
            b_g: b(),
            w_c: w(),
            u_c: u(),
            b_c: b(),
            w_o: w(),
            u_o: u(),
            b_o: b(),
        }
    }

    /// Uniform(−1/√fan_in, +1/√fan_in) init; forget-gate bias set to 1.
    pub fn init(input: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut p = Self::zeros(input, hidden);
        let bound_x = 1.0 / (input as f64).sqrt();
        let bound_h = 1.0 / (hidden as f64).sqrt();
        for (w, u) in [
            (&mut p.w_i, &mut p.u_i),
            (&mut p.w_g, &mut p.u_g),
            (&mut p.w_c, &mut p.u_c),
            (&mut p.w_o, &mut p.u_o),
        ] {
            for v in w.data_mut() {
                *v = rng.gen_range(-bound_x..bound_x);
            }
            for v in u.data_mut() {
                *v = rng.gen_range(-bound_h..bound_h);
            }
        }
        p.b_g.iter_mut().for_each(|b| *b = 1.0);
        p
    }

    pub fn param_count(&self) -> usize {
        4 * (self.hidden * self.input + self.hidden * self.hidden + self.hidden)
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for (w, u, b) in self.gate_refs() {
            out.extend_from_slice(w.data());
            out.extend_from_slice(u.data());
            out.extend_from_slice(b);
        }
    }

    /// Reads parameters back from a flat slice; returns values consumed.
    pub fn unflatten_from(&mut self, flat: &[f64]) -> usize {
        let mut pos = 0;
        for (w, u, b) in self.gate_refs_mut() {
            let n = w.data().len();
            w.data_mut().copy_from_slice(&flat[pos..pos + n]);
            pos += n;
            let n = u.data().len();
            u.data_mut().copy_from_slice(&flat[pos..pos + n]);
            pos += n;
            let n = b.len();
            b.copy_from_slice(&flat[pos..pos + n]);
            pos += n;
        }
        pos
    }

    fn gate_refs(&self) -> [(&Tensor2, &Tensor2, &Vec<f64>); 4] {
        [
            (&self.w_i, &self.u_i, &self.b_i),
            (&self.w_g, &self.u_g, &self.b_g),
            (&self.w_c, &self.u_c, &self.b_c),
            (&self.w_o, &self.u_o, &self.b_o),
        ]
    }

    fn gate_refs_mut(&mut self) -> [(&mut Tensor2, &mut Tensor2, &mut Vec<f64>); 4] {
        [
            (&mut self.w_i, &mut self.u_i, &mut self.b_i),
            (&mut self.w_g, &mut self.u_g, &mut self.b_g),
            (&mut self.w_c, &mut self.u_c, &mut self.b_c),
            (&mut self.w_o, &mut self.u_o, &mut self.b_o),
        ]
    }
}

/// Gradients w.r.t. every LSTM parameter, same layout as [`LstmParams`].
pub type LstmGrads = LstmParams;

fn gate_preact(w: &Tensor2, u: &Tensor2, b: &[f64], x: &[f64], h: &[f64]) -> Vec<f64> {
    let hidden = b.len();
    let mut out = Vec::with_capacity(hidden);
    for r in 0..hidden {
        let mut acc = b[r];
        let wr = w.row(r);
        for (wv, xv) in wr.iter().zip(x) {
            acc += wv * xv;
        }
        let ur = u.row(r);
        for (uv, hv) in ur.iter().zip(h) {
            acc += uv * hv;
        }
        out.push(acc);
    }
    out
}

/// One LSTM step:
/// i = σ(w_i x + u_i h + b_i), f = σ(w_g x + u_g h + b_g),
/// c̃ = tanh(w_c x + u_c h + b_c), c = c_prev·f + c̃·i,
/// o = σ(w_o x + u_o h + b_o), h = o·tanh(c).
pub fn lstm_cell_forward(
    params: &LstmParams,
    x: &[f64],
    prev: &LstmState,
) -> Result<(LstmState, LstmCache)> {
    if x.len() != params.input || prev.h.len() != params.hidden || prev.c.len() != params.hidden {
        return Err(DynImpError::ShapeMismatch(format!(
            "lstm cell: x len {} (want {}), h len {} / c len {} (want {})",
            x.len(),
            params.input,
            prev.h.len(),
            prev.c.len(),
            params.hidden
        )));
    }
    let gate_i: Vec<f64> = gate_preact(&params.w_i, &params.u_i, &params.b_i, x, &prev.h)
        .into_iter()
        .map(sigmoid)
        .collect();
    let gate_f: Vec<f64> = gate_preact(&params.w_g, &params.u_g, &params.b_g, x, &prev.h)
        .into_iter()
        .map(sigmoid)
        .collect();
    let cand: Vec<f64> = gate_preact(&params.w_c, &params.u_c, &params.b_c, x, &prev.h)
        .into_iter()
        .map(f64::tanh)
        .collect();
    let gate_o: Vec<f64> = gate_preact(&params.w_o, &params.u_o, &params.b_o, x, &prev.h)
        .into_iter()
        .map(sigmoid)
        .collect();
    let c: Vec<f64> = (0..params.hidden)
        .map(|j| prev.c[j] * gate_f[j] + cand[j] * gate_i[j])
        .collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = (0..params.hidden).map(|j| gate_o[j] * tanh_c[j]).collect();
    let cache = LstmCache {
        x: x.to_vec(),
        h_prev: prev.h.clone(),
        c_prev: prev.c.clone(),
        gate_i,
        gate_f,
        cand,
        gate_o,
        c: c.clone(),
        tanh_c,
    };
    Ok((LstmState { h, c }, cache))
}

/// Chains the cell over t = 0..T−1 from `init`. Returns the T×H hidden
/// matrix and per-step caches.
pub fn lstm_sequence_forward(
    params: &LstmParams,
    xs: &Tensor2,
    init: &LstmState,
) -> Result<(Tensor2, Vec<LstmCache>)> {
    if xs.rows() == 0 {
        return Err(DynImpError::EmptyInput("lstm sequence needs T >= 1"));
    }
    if xs.cols() != params.input {
        return Err(DynImpError::ShapeMismatch(format!(
            "lstm sequence: input dim {} (want {})",
            xs.cols(),
            params.input
        )));
    }
    let steps = xs.rows();
    let mut hs = Tensor2::zeros(steps, params.hidden);
    let mut caches = Vec::with_capacity(steps);
    let mut state = init.clone();
    for t in 0..steps {
        let (next, cache) = lstm_cell_forward(params, xs.row(t), &state)?;
        hs.row_mut(t).copy_from_slice(&next.h);
        caches.push(cache);
        state = next;
    }
    Ok((hs, caches))
}

/// Reverse-mode gradients through the unrolled recurrence.
///
/// `dhs` holds dL/dh_t for every step. Returns parameter gradients and
/// dL/dx_t for every step.
pub fn lstm_backward(
    params: &LstmParams,
    caches: &[LstmCache],
    dhs: &Tensor2,
) -> Result<(LstmGrads, Tensor2)> {
    let steps = caches.len();
    if dhs.rows() != steps || dhs.cols() != params.hidden {
        return Err(DynImpError::ShapeMismatch(format!(
            "lstm backward: dhs {}x{} vs {} steps, hidden {}",
            dhs.rows(),
            dhs.cols(),
            steps,
            params.hidden
        )));
    }
    let hidden = params.hidden;
    let mut grads = LstmGrads::zeros(params.input, hidden);
    let mut dxs = Tensor2::zeros(steps, params.input);
    let mut dh_next = vec![0.0; hidden];
    let mut dc_next = vec![0.0; hidden];

    for t in (0..steps).rev() {
        let cache = &caches[t];
        if cache.x.len() != params.input {
            return Err(DynImpError::ShapeMismatch(
                "cache input dim does not match params".into(),
            ));
        }
        let mut dh = vec![0.0; hidden];
        for j in 0..hidden {
            dh[j] = dhs.get(t, j) + dh_next[j];
        }
        // Through h = o · tanh(c).
        let mut dc = vec![0.0; hidden];
        let mut d_pre_o = vec![0.0; hidden];
        for j in 0..hidden {
            dc[j] = dc_next[j] + dh[j] * cache.gate_o[j] * (1.0 - cache.tanh_c[j] * cache.tanh_c[j]);
            d_pre_o[j] = dh[j] * cache.tanh_c[j] * cache.gate_o[j] * (1.0 - cache.gate_o[j]);
        }
        // Through c = c_prev·f + c̃·i.
        let mut d_pre_i = vec![0.0; hidden];
        let mut d_pre_f = vec![0.0; hidden];
        let mut d_pre_c = vec![0.0; hidden];
        for j in 0..hidden {
            d_pre_i[j] = dc[j] * cache.cand[j] * cache.gate_i[j] * (1.0 - cache.gate_i[j]);
            d_pre_f[j] = dc[j] * cache.c_prev[j] * cache.gate_f[j] * (1.0 - cache.gate_f[j]);
            d_pre_c[j] = dc[j] * cache.gate_i[j] * (1.0 - cache.cand[j] * cache.cand[j]);
            dc_next[j] = dc[j] * cache.gate_f[j];
        }
        // Accumulate parameter grads and propagate into x and h_prev.
        let mut dx = vec![0.0; params.input];
        dh_next = vec![0.0; hidden];
        for (d_pre, (gw, gu, gb), (w, u)) in [
            (&d_pre_i, (&mut grads.w_i, &mut grads.u_i, &mut grads.b_i), (&params.w_i, &params.u_i)),
            (&d_pre_f, (&mut grads.w_g, &mut grads.u_g, &mut grads.b_g), (&params.w_g, &params.u_g)),
            (&d_pre_c, (&mut grads.w_c, &mut grads.u_c, &mut grads.b_c), (&params.w_c, &params.u_c)),
            (&d_pre_o, (&mut grads.w_o, &mut grads.u_o, &mut grads.b_o), (&params.w_o, &params.u_o)),
        ] {
            for j in 0..hidden {
                let d = d_pre[j];
                gb[j] += d;
                let gw_row = gw.row_mut(j);
                for (k, xv) in cache.x.iter().enumerate() {
                    gw_row[k] += d * xv;
                }
                let gu_row = gu.row_mut(j);
                for (k, hv) in cache.h_prev.iter().enumerate() {
                    gu_row[k] += d * hv;
                }
                let w_row = w.row(j);
                for (k, wv) in w_row.iter().enumerate() {
                    dx[k] += d * wv;
                }
                let u_row = u.row(j);
                for (k, uv) in u_row.iter().enumerate() {
                    dh_next[k] += d * uv;
                }
            }
        }
        dxs.row_mut(t).copy_from_slice(&dx);
    }
    Ok((grads, dxs))
}
