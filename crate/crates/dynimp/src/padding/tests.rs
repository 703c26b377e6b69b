use super::*;
use crate::data::tests::window_from;
use crate::imputers::tests::arb_window;
use crate::imputers::{impute_interpolation, impute_knn};
use proptest::prelude::*;

#[test]
fn fully_observed_window_gives_zero_padding() {
    let w = window_from(vec![vec![1.0, 2.0], vec![3.0, 4.0]], &[]);
    let p = build_padding(&w, 3).unwrap();
    assert!(p.values.data().iter().all(|&v| v == 0.0));
    assert_eq!(masked_combine(&w, &p).unwrap(), w.values);
}

#[test]
fn padding_is_zero_at_observed_positions() {
    let w = window_from(
        vec![vec![1.0, 2.0], vec![1.1, 0.0], vec![0.9, 5.0]],
        &[(1, 1)],
    );
    let p = build_padding(&w, 2).unwrap();
    for t in 0..3 {
        for f in 0..2 {
            if w.mask.observed(t, f) {
                assert_eq!(p.values.get(t, f), 0.0);
            }
        }
    }
    assert!(p.values.get(1, 1) != 0.0);
}

#[test]
fn masked_combine_ignores_garbage_at_missing_cells() {
    let mut w = window_from(vec![vec![1.0, 2.0], vec![7.7, 4.0]], &[(1, 0)]);
    let p = build_padding(&w, 1).unwrap();
    let a = masked_combine(&w, &p).unwrap();
    // Overwrite the masked-out cell with different garbage; output must not move.
    w.values.set(1, 0, -123.0);
    let b = masked_combine(&w, &p).unwrap();
    assert_eq!(a, b);
}

#[test]
fn masked_combine_rejects_shape_mismatch() {
    let w = window_from(vec![vec![1.0, 2.0], vec![3.0, 4.0]], &[]);
    let p = PaddingMatrix {
        values: Tensor2::zeros(3, 2),
    };
    assert!(matches!(
        masked_combine(&w, &p),
        Err(DynImpError::ShapeMismatch(_))
    ));
}

#[test]
fn padding_from_imputed_matches_interpolation() {
    let w = window_from(vec![vec![1.0, 0.0], vec![0.0, 0.0], vec![3.0, 0.0]], &[(1, 0)]);
    let imputed = impute_interpolation(&w);
    let p = padding_from_imputed(&w, &imputed.values).unwrap();
    assert_eq!(p.values.get(1, 0), 2.0);
    assert_eq!(p.values.get(0, 0), 0.0);
    let combined = masked_combine(&w, &p).unwrap();
    assert_eq!(combined, imputed.values);
}

proptest! {
    // masked_combine(build_padding(w)) must equal impute_knn(w) bit for bit.
    #[test]
    fn knn_padding_equals_knn_imputer(w in arb_window(6, 4), k in 1usize..4) {
        let p = build_padding(&w, k).unwrap();
        let combined = masked_combine(&w, &p).unwrap();
        let imputed = impute_knn(&w, k).unwrap();
        for (a, b) in combined.data().iter().zip(imputed.values.data()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    // M ⊙ x + P is linear in the padding matrix.
    #[test]
    fn masked_combine_is_additive_in_padding(w in arb_window(5, 3)) {
        let p1 = build_padding(&w, 1).unwrap();
        let p2 = build_padding(&w, 2).unwrap();
        let zero = PaddingMatrix { values: Tensor2::zeros(w.steps(), w.features()) };
        let base = masked_combine(&w, &zero).unwrap();
        let c1 = masked_combine(&w, &p1).unwrap();
        let c2 = masked_combine(&w, &p2).unwrap();
        for t in 0..w.steps() {
            for f in 0..w.features() {
                let lhs = c1.get(t, f) + c2.get(t, f) - base.get(t, f);
                let rhs = base.get(t, f) + p1.values.get(t, f) + p2.values.get(t, f);
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
            }
        }
    }
}
