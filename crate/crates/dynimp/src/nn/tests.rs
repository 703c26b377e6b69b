use super::*;
use crate::tensor::Tensor2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn sigmoid_at_zero_is_half() {
    assert_eq!(sigmoid(0.0), 0.5);
    assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
}

#[test]
fn zero_param_cell_hand_trace() {
    // All-zero weights: every gate preactivation is 0, so i = f = o = 0.5 and
    // c̃ = 0. With c_prev = 1: c = 0.5, h = 0.5 · tanh(0.5) ≈ 0.2311.
    let params = LstmParams::zeros(3, 2);
    let prev = LstmState {
        h: vec![0.0; 2],
        c: vec![1.0; 2],
    };
    let (state, cache) = lstm_cell_forward(&params, &[0.3, -0.7, 2.0], &prev).unwrap();
    for j in 0..2 {
        assert_eq!(cache.gate_i[j], 0.5);
        assert_eq!(cache.gate_f[j], 0.5);
        assert_eq!(cache.gate_o[j], 0.5);
        assert_eq!(cache.cand[j], 0.0);
        assert_eq!(state.c[j], 0.5);
        assert!((state.h[j] - 0.2311).abs() < 1e-4);
        assert_eq!(state.h[j], 0.5 * 0.5f64.tanh());
    }
}

#[test]
fn sequence_forward_matches_manual_chaining() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let params = LstmParams::init(3, 4, &mut rng);
    let mut xs = Tensor2::zeros(5, 3);
    for v in xs.data_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    let init = LstmState::zeros(4);
    let (hs, caches) = lstm_sequence_forward(&params, &xs, &init).unwrap();
    assert_eq!(caches.len(), 5);

    let mut state = init;
    for t in 0..5 {
        let (next, _) = lstm_cell_forward(&params, xs.row(t), &state).unwrap();
        assert_eq!(hs.row(t), next.h.as_slice());
        state = next;
    }
}

#[test]
fn sequence_rejects_empty_and_bad_width() {
    let params = LstmParams::zeros(3, 2);
    let init = LstmState::zeros(2);
    assert!(lstm_sequence_forward(&params, &Tensor2::zeros(0, 3), &init).is_err());
    assert!(lstm_sequence_forward(&params, &Tensor2::zeros(2, 4), &init).is_err());
}

#[test]
fn lstm_flatten_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let params = LstmParams::init(3, 4, &mut rng);
    let mut flat = Vec::new();
    params.flatten_into(&mut flat);
    assert_eq!(flat.len(), params.param_count());
    let mut back = LstmParams::zeros(3, 4);
    assert_eq!(back.unflatten_from(&flat), flat.len());
    assert_eq!(back, params);
}

// Loss for the FD checks below: Σ_t Σ_j weight[t][j] · h_t[j].
fn weighted_h_loss(
    input: usize,
    hidden: usize,
    xs: &Tensor2,
    weights: &Tensor2,
    flat: &[f64],
) -> f64 {
    let mut params = LstmParams::zeros(input, hidden);
    params.unflatten_from(flat);
    let (hs, _) = lstm_sequence_forward(&params, xs, &LstmState::zeros(hidden)).unwrap();
    hs.data()
        .iter()
        .zip(weights.data())
        .map(|(h, w)| h * w)
        .sum()
}

#[test]
fn lstm_backward_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let (input, hidden, steps) = (3, 3, 4);
    let params = LstmParams::init(input, hidden, &mut rng);
    let mut xs = Tensor2::zeros(steps, input);
    for v in xs.data_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    let mut weights = Tensor2::zeros(steps, hidden);
    for v in weights.data_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }

    let (_, caches) = lstm_sequence_forward(&params, &xs, &LstmState::zeros(hidden)).unwrap();
    let (grads, _) = lstm_backward(&params, &caches, &weights).unwrap();
    let mut analytic = Vec::new();
    grads.flatten_into(&mut analytic);
    let mut flat = Vec::new();
    params.flatten_into(&mut flat);

    let mut loss =
        |p: &[f64]| -> crate::error::Result<f64> { Ok(weighted_h_loss(input, hidden, &xs, &weights, p)) };
    let report = grad_check(&mut loss, &analytic, &flat, &[], 1e-5).unwrap();
    assert!(
        report.passes(1e-6),
        "max rel err {}",
        report.max_rel_err
    );
}

#[test]
fn lstm_backward_input_grads_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (input, hidden, steps) = (2, 3, 3);
    let params = LstmParams::init(input, hidden, &mut rng);
    let mut xs = Tensor2::zeros(steps, input);
    for v in xs.data_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    let mut weights = Tensor2::zeros(steps, hidden);
    for v in weights.data_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    let (_, caches) = lstm_sequence_forward(&params, &xs, &LstmState::zeros(hidden)).unwrap();
    let (_, dxs) = lstm_backward(&params, &caches, &weights).unwrap();

    let eps = 1e-6;
    for t in 0..steps {
        for f in 0..input {
            let orig = xs.get(t, f);
            let mut xp = xs.clone();
            xp.set(t, f, orig + eps);
            let (hp, _) = lstm_sequence_forward(&params, &xp, &LstmState::zeros(hidden)).unwrap();
            let mut xm = xs.clone();
            xm.set(t, f, orig - eps);
            let (hm, _) = lstm_sequence_forward(&params, &xm, &LstmState::zeros(hidden)).unwrap();
            let lp: f64 = hp.data().iter().zip(weights.data()).map(|(h, w)| h * w).sum();
            let lm: f64 = hm.data().iter().zip(weights.data()).map(|(h, w)| h * w).sum();
            let numeric = (lp - lm) / (2.0 * eps);
            assert!(
                (dxs.get(t, f) - numeric).abs() < 1e-6,
                "dx[{t}][{f}]: analytic {} numeric {}",
                dxs.get(t, f),
                numeric
            );
        }
    }
}

#[test]
fn dense_backward_matches_finite_differences() {
    for activation in [Activation::Identity, Activation::Sigmoid] {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = DenseParams::init(4, 3, activation, &mut rng);
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dy: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let (_, cache) = dense_forward(&params, &x).unwrap();
        let (grads, dx) = dense_backward(&params, &cache, &dy).unwrap();
        let mut analytic = Vec::new();
        grads.flatten_into(&mut analytic);
        let mut flat = Vec::new();
        params.flatten_into(&mut flat);

        let dy_c = dy.clone();
        let x_c = x.clone();
        let mut loss = |p: &[f64]| -> crate::error::Result<f64> {
            let mut pp = DenseParams::zeros(4, 3, activation);
            pp.unflatten_from(p);
            let (y, _) = dense_forward(&pp, &x_c)?;
            Ok(y.iter().zip(&dy_c).map(|(a, b)| a * b).sum())
        };
        let report = grad_check(&mut loss, &analytic, &flat, &[], 1e-6).unwrap();
        assert!(report.passes(1e-7), "max rel err {}", report.max_rel_err);

        // dL/dx by central differences.
        let eps = 1e-6;
        for k in 0..4 {
            let mut xp = x.clone();
            xp[k] += eps;
            let (yp, _) = dense_forward(&params, &xp).unwrap();
            let mut xm = x.clone();
            xm[k] -= eps;
            let (ym, _) = dense_forward(&params, &xm).unwrap();
            let lp: f64 = yp.iter().zip(&dy).map(|(a, b)| a * b).sum();
            let lm: f64 = ym.iter().zip(&dy).map(|(a, b)| a * b).sum();
            assert!((dx[k] - (lp - lm) / (2.0 * eps)).abs() < 1e-7);
        }
    }
}

#[test]
fn dense_backward_preact_agrees_on_identity() {
    // With identity activation, dL/d(pre) = dL/dy, so both paths must agree.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let params = DenseParams::init(3, 2, Activation::Identity, &mut rng);
    let x = [0.2, -0.4, 0.9];
    let dy = [0.7, -1.2];
    let (_, cache) = dense_forward(&params, &x).unwrap();
    let (g1, dx1) = dense_backward(&params, &cache, &dy).unwrap();
    let (g2, dx2) = dense_backward_preact(&params, &cache, &dy).unwrap();
    assert_eq!(g1.w, g2.w);
    assert_eq!(g1.b, g2.b);
    assert_eq!(dx1, dx2);
}

#[test]
fn dense_backward_preact_equals_chain_rule_for_sigmoid() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let params = DenseParams::init(3, 2, Activation::Sigmoid, &mut rng);
    let x = [0.5, -0.1, 0.3];
    let dy = [1.0, -0.5];
    let (_, cache) = dense_forward(&params, &x).unwrap();
    let (g1, dx1) = dense_backward(&params, &cache, &dy).unwrap();
    let d_pre: Vec<f64> = (0..2).map(|r| dy[r] * cache.y[r] * (1.0 - cache.y[r])).collect();
    let (g2, dx2) = dense_backward_preact(&params, &cache, &d_pre).unwrap();
    for (a, b) in g1.w.data().iter().zip(g2.w.data()) {
        assert!((a - b).abs() < 1e-15);
    }
    for (a, b) in dx1.iter().zip(&dx2) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn adam_zero_gradient_leaves_params_unchanged() {
    let mut params = vec![1.0, -2.0, 0.5];
    let mut state = AdamState::new(3);
    state.update(&mut params, &[0.0; 3], &AdamHyper::default());
    assert_eq!(params, vec![1.0, -2.0, 0.5]);
}

#[test]
fn adam_first_step_size_is_about_lr() {
    // With bias correction, the first update moves by lr · g/(|g| + ~0).
    let hyper = AdamHyper::default();
    let mut params = vec![0.0];
    let mut state = AdamState::new(1);
    state.update(&mut params, &[3.7], &hyper);
    assert!((params[0] + hyper.lr).abs() < 1e-6);
    let mut params2 = vec![0.0];
    let mut state2 = AdamState::new(1);
    state2.update(&mut params2, &[-0.01], &hyper);
    assert!((params2[0] - hyper.lr).abs() < 1e-6);
}

#[test]
fn adam_descends_on_quadratic() {
    // Minimize f(x) = (x − 3)², gradient 2(x − 3).
    let hyper = AdamHyper {
        lr: 0.1,
        ..AdamHyper::default()
    };
    let mut params = vec![0.0];
    let mut state = AdamState::new(1);
    for _ in 0..500 {
        let g = 2.0 * (params[0] - 3.0);
        state.update(&mut params, &[g], &hyper);
    }
    assert!((params[0] - 3.0).abs() < 0.05, "got {}", params[0]);
}

#[test]
fn adam_is_deterministic() {
    let run = || {
        let mut params = vec![0.3, -0.8];
        let mut state = AdamState::new(2);
        for i in 0..50 {
            let g = [params[0] + i as f64 * 0.01, params[1] * 0.5];
            state.update(&mut params, &g, &AdamHyper::default());
        }
        params
    };
    let a = run();
    let b = run();
    assert_eq!(a[0].to_bits(), b[0].to_bits());
    assert_eq!(a[1].to_bits(), b[1].to_bits());
}

#[test]
fn clip_leaves_small_gradients_alone() {
    let mut g = vec![0.3, -0.4];
    let norm = clip_global_norm(&mut g, 5.0);
    assert!((norm - 0.5).abs() < 1e-15);
    assert_eq!(g, vec![0.3, -0.4]);
}

#[test]
fn clip_scales_large_gradients_to_max_norm() {
    let mut g = vec![3.0, 4.0]; // norm 5
    let norm = clip_global_norm(&mut g, 1.0);
    assert!((norm - 5.0).abs() < 1e-15);
    let new_norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
    assert!((new_norm - 1.0).abs() < 1e-12);
    assert!((g[0] / g[1] - 0.75).abs() < 1e-12); // direction preserved
}

#[test]
fn grad_check_accepts_exact_quadratic_gradient() {
    let params = vec![0.7, -1.3, 2.0];
    let analytic: Vec<f64> = params.iter().map(|x| 2.0 * x).collect();
    let mut loss =
        |p: &[f64]| -> crate::error::Result<f64> { Ok(p.iter().map(|x| x * x).sum()) };
    let report = grad_check(&mut loss, &analytic, &params, &[], 1e-5).unwrap();
    assert_eq!(report.checked, 3);
    assert!(report.max_rel_err < 1e-9, "got {}", report.max_rel_err);
}

#[test]
fn grad_check_flags_wrong_gradient() {
    let params = vec![1.0];
    let mut loss = |p: &[f64]| -> crate::error::Result<f64> { Ok(p[0] * p[0]) };
    let report = grad_check(&mut loss, &[3.0], &params, &[], 1e-5).unwrap();
    assert!(report.max_rel_err > 0.3);
    assert_eq!(report.worst[0].index, 0);
}

#[test]
fn grad_check_rejects_zero_epsilon() {
    let mut loss = |_: &[f64]| -> crate::error::Result<f64> { Ok(0.0) };
    assert!(grad_check(&mut loss, &[0.0], &[0.0], &[], 0.0).is_err());
}

#[test]
fn grad_check_rejects_nondeterministic_closure() {
    let mut calls = 0u32;
    let mut loss = |_: &[f64]| -> crate::error::Result<f64> {
        calls += 1;
        Ok(calls as f64)
    };
    assert!(grad_check(&mut loss, &[0.0], &[0.0], &[], 1e-5).is_err());
}

#[test]
fn grad_check_honors_index_subset() {
    let params = vec![1.0, 2.0, 3.0];
    let analytic = vec![2.0, 999.0, 6.0]; // wrong at index 1, but it is skipped
    let mut loss =
        |p: &[f64]| -> crate::error::Result<f64> { Ok(p.iter().map(|x| x * x).sum()) };
    let report = grad_check(&mut loss, &analytic, &params, &[0, 2], 1e-5).unwrap();
    assert_eq!(report.checked, 2);
    assert!(report.max_rel_err < 1e-9);
}
