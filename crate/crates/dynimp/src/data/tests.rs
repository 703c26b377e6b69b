use super::*;
use proptest::prelude::*;
use std::io::Write;

fn frame(ts: i64, features: Vec<Option<f64>>, label: Option<usize>) -> SensorFrame {
    SensorFrame {
        timestamp: ts,
        features,
        label_id: label,
    }
}

fn frames_n(n: usize) -> Vec<SensorFrame> {
    (0..n)
        .map(|i| frame(i as i64 * 60, vec![Some(i as f64), Some(1.0)], Some(0)))
        .collect()
}

pub(crate) fn window_from(values: Vec<Vec<f64>>, missing: &[(usize, usize)]) -> Window {
    let values = Tensor2::from_rows(&values);
    let mut mask = MaskMatrix::ones(values.rows(), values.cols());
    for &(t, f) in missing {
        mask.set(t, f, false);
    }
    Window {
        values,
        mask,
        label_id: 0,
    }
}

fn dataset_from(windows: Vec<Window>) -> Dataset {
    let nf = windows[0].features();
    Dataset {
        windows,
        scaling: None,
        feature_names: (0..nf).map(|f| format!("f{f}")).collect(),
        label_names: vec!["a".into()],
    }
}

#[test]
fn build_windows_exact_division() {
    let w = build_windows(&frames_n(24), 24, 24).unwrap();
    assert_eq!(w.len(), 1);
}

#[test]
fn build_windows_stride_one() {
    let w = build_windows(&frames_n(25), 24, 1).unwrap();
    assert_eq!(w.len(), 2);
}

#[test]
fn build_windows_drops_trailing_partial() {
    // floor((100 - 24) / 24) + 1 = 4; frames 96..100 dropped.
    let w = build_windows(&frames_n(100), 24, 24).unwrap();
    assert_eq!(w.len(), 4);
}

#[test]
fn build_windows_too_few_frames_is_empty() {
    assert!(build_windows(&frames_n(10), 24, 24).unwrap().is_empty());
}

#[test]
fn build_windows_rejects_tiny_t() {
    assert!(build_windows(&frames_n(10), 1, 1).is_err());
}

#[test]
fn modal_label_ties_break_to_smallest_id() {
    let frames = vec![
        frame(0, vec![Some(0.0), Some(0.0)], Some(2)),
        frame(60, vec![Some(0.0), Some(0.0)], Some(1)),
    ];
    let w = build_windows(&frames, 2, 2).unwrap();
    assert_eq!(w[0].label_id, 1);
}

proptest! {
    #[test]
    fn window_count_formula(n in 0usize..200, t in 2usize..30, stride in 1usize..30) {
        let w = build_windows(&frames_n(n), t, stride).unwrap();
        let expected = if n >= t { (n - t) / stride + 1 } else { 0 };
        prop_assert_eq!(w.len(), expected);
    }
}

#[test]
fn fit_scaling_minmax() {
    let w = window_from(vec![vec![0.0, 1.0], vec![10.0, 2.0]], &[]);
    let ds = dataset_from(vec![w]);
    let s = fit_scaling(&ds, ScalingMode::MinMax).unwrap();
    assert_eq!(s.per_feature[0].lo, 0.0);
    assert_eq!(s.per_feature[0].hi, 10.0);
    assert_eq!(s.scale(0, 5.0), 0.5);
}

#[test]
fn fit_scaling_constant_feature_maps_to_half() {
    let w = window_from(vec![vec![3.0, 1.0], vec![3.0, 2.0], vec![3.0, 3.0]], &[]);
    let ds = dataset_from(vec![w]);
    let s = fit_scaling(&ds, ScalingMode::MinMax).unwrap();
    assert!(s.per_feature[0].constant);
    assert_eq!(s.scale(0, 3.0), 0.5);
    assert_eq!(s.unscale(0, 0.5), 3.0);
}

#[test]
fn fit_scaling_zscore_population() {
    let w = window_from(vec![vec![1.0, 0.0], vec![2.0, 0.5], vec![3.0, 1.0]], &[]);
    let ds = dataset_from(vec![w]);
    let s = fit_scaling(&ds, ScalingMode::ZScore).unwrap();
    assert!((s.per_feature[0].lo - 2.0).abs() < 1e-12);
    assert!((s.per_feature[0].hi - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
}

#[test]
fn fit_scaling_names_feature_without_observations() {
    let w = window_from(vec![vec![1.0, 9.0], vec![2.0, 9.0]], &[(0, 1), (1, 1)]);
    let ds = dataset_from(vec![w]);
    let err = fit_scaling(&ds, ScalingMode::MinMax).unwrap_err();
    assert!(err.to_string().contains("f1"), "{err}");
}

proptest! {
    #[test]
    fn scale_unscale_round_trip(frac in 0.0f64..=1.0, lo in -100.0f64..100.0, span in 0.1f64..1000.0) {
        let s = ScalingParams {
            mode: ScalingMode::MinMax,
            per_feature: vec![FeatureScale { lo, hi: lo + span, constant: false }],
        };
        // Inside the fitted range the mapping round-trips; outside it clamps
        // to the nearest edge.
        let v = lo + frac * span;
        let back = s.unscale(0, s.scale(0, v));
        let denom = v.abs().max(1.0);
        prop_assert!((back - v).abs() / denom < 1e-9);
        prop_assert_eq!(s.unscale(0, s.scale(0, lo - 1.0)), lo);
        prop_assert!((s.unscale(0, s.scale(0, lo + span + 1.0)) - (lo + span)).abs() / (lo + span).abs().max(1.0) < 1e-9);
    }
}

#[test]
fn inject_level_zero_is_identity() {
    let ds = dataset_from(vec![window_from(vec![vec![1.0, 2.0], vec![3.0, 4.0]], &[])]);
    let (out, store) = inject_missingness(&ds, 0.0, 7).unwrap();
    assert_eq!(out, ds);
    assert!(store.is_empty());
}

#[test]
fn inject_binomial_concentration() {
    // 10_000 observed cells at level 0.5: removed count within ±4σ.
    let windows: Vec<Window> = (0..100)
        .map(|_| window_from(vec![vec![0.5; 10]; 10], &[]))
        .collect();
    let ds = dataset_from(windows);
    let (_, store) = inject_missingness(&ds, 0.5, 42).unwrap();
    assert!((4800..=5200).contains(&store.len()), "removed {}", store.len());
}

#[test]
fn inject_is_deterministic() {
    let ds = dataset_from(vec![window_from(vec![vec![1.0, 2.0]; 24], &[])]);
    let a = inject_missingness(&ds, 0.3, 5).unwrap();
    let b = inject_missingness(&ds, 0.3, 5).unwrap();
    assert_eq!(a, b);
}

#[test]
fn inject_only_flips_mask_bits() {
    let ds = dataset_from(vec![window_from(
        vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]],
        &[(1, 0)],
    )]);
    let (out, store) = inject_missingness(&ds, 0.7, 9).unwrap();
    let w0 = &ds.windows[0];
    let w1 = &out.windows[0];
    for t in 0..w0.steps() {
        for f in 0..w0.features() {
            assert_eq!(w0.values.get(t, f), w1.values.get(t, f));
            if !w0.mask.observed(t, f) {
                assert!(!w1.mask.observed(t, f), "resurrected cell ({t},{f})");
            }
        }
    }
    for &(wi, t, f, v) in &store.cells {
        assert_eq!(wi, 0);
        assert!(w0.mask.observed(t, f));
        assert!(!w1.mask.observed(t, f));
        assert_eq!(v, w0.values.get(t, f));
    }
}

fn corr_first_two(ds: &Dataset) -> f64 {
    let (mut n, mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for w in &ds.windows {
        for t in 0..w.steps() {
            let a = w.values.get(t, 0);
            let b = w.values.get(t, 1);
            n += 1.0;
            sa += a;
            sb += b;
            saa += a * a;
            sbb += b * b;
            sab += a * b;
        }
    }
    let cov = sab / n - sa / n * (sb / n);
    let va = saa / n - (sa / n) * (sa / n);
    let vb = sbb / n - (sb / n) * (sb / n);
    cov / (va * vb).sqrt()
}

#[test]
fn synthetic_full_coupling_correlates_channels() {
    let ds = generate_synthetic(1, 10_000, 2, 1.0, 3).unwrap();
    assert!(corr_first_two(&ds) >= 0.99, "corr {}", corr_first_two(&ds));
}

#[test]
fn synthetic_zero_coupling_decorrelates_channels() {
    let ds = generate_synthetic(1, 10_000, 2, 0.0, 3).unwrap();
    assert!(corr_first_two(&ds).abs() <= 0.05, "corr {}", corr_first_two(&ds));
}

#[test]
fn synthetic_is_deterministic() {
    let a = generate_synthetic(2, 240, 4, 0.7, 11).unwrap();
    let b = generate_synthetic(2, 240, 4, 0.7, 11).unwrap();
    assert_eq!(a, b);
}

#[test]
fn synthetic_window_cardinality() {
    let ds = generate_synthetic(2, 480, 3, 0.5, 1).unwrap();
    assert_eq!(ds.windows.len(), 2 * (480 / 24));
}

#[test]
fn dataset_file_round_trips_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ds.json");
    let ds = generate_synthetic(1, 120, 3, 0.9, 2).unwrap();
    save_dataset(&ds, &path).unwrap();
    let loaded = load_dataset(&path).unwrap();
    assert_eq!(ds, loaded);
    let path2 = dir.path().join("ds2.json");
    save_dataset(&loaded, &path2).unwrap();
    assert_eq!(
        std::fs::read(&path).unwrap(),
        std::fs::read(&path2).unwrap()
    );
}

fn write_csv(text: &str) -> (tempfile::TempDir, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("in.csv");
    let mut f = std::fs::File::create(&path).unwrap();
    f.write_all(text.as_bytes()).unwrap();
    (dir, path)
}

#[test]
fn ingest_48_minutes_two_windows() {
    let mut text = String::from("timestamp,ax,ay,label\n");
    for i in 0..48 {
        text.push_str(&format!("{},{},{},walk\n", i * 60, i, i * 2));
    }
    let (_dir, path) = write_csv(&text);
    let ds = ingest_csv(&path, &CsvSchema::default()).unwrap();
    assert_eq!(ds.windows.len(), 2);
    assert_eq!(ds.feature_names, vec!["ax", "ay"]);
    assert_eq!(ds.label_names, vec!["walk"]);
}

#[test]
fn ingest_empty_cell_clears_mask_bit() {
    let mut text = String::from("timestamp,ax,ay,label\n");
    for i in 0..3 {
        if i == 1 {
            text.push_str(&format!("{},,{},walk\n", i * 60, i));
        } else {
            text.push_str(&format!("{},{},{},walk\n", i * 60, i, i));
        }
    }
    let (_dir, path) = write_csv(&text);
    let schema = CsvSchema {
        window_len: 3,
        stride: 3,
        ..CsvSchema::default()
    };
    let ds = ingest_csv(&path, &schema).unwrap();
    assert!(!ds.windows[0].mask.observed(1, 0));
    assert!(ds.windows[0].mask.observed(1, 1));
}

#[test]
fn ingest_minute_binning_hand_trace() {
    // Three frames at 0 s, 60 s, 120 s with values 1, 2, 3: one window with
    // that column and an all-ones mask.
    let text = "timestamp,ax,ay,label\n0,1,0,walk\n60,2,0,walk\n120,3,0,walk\n";
    let (_dir, path) = write_csv(text);
    let schema = CsvSchema {
        window_len: 3,
        stride: 3,
        ..CsvSchema::default()
    };
    let ds = ingest_csv(&path, &schema).unwrap();
    assert_eq!(ds.windows.len(), 1);
    let w = &ds.windows[0];
    assert_eq!(
        (w.values.get(0, 0), w.values.get(1, 0), w.values.get(2, 0)),
        (1.0, 2.0, 3.0)
    );
    assert_eq!(w.mask.count_missing(), 0);
}

#[test]
fn ingest_bins_subminute_samples_by_mean() {
    let text = "timestamp,ax,ay,label\n0,1,0,walk\n20,3,0,walk\n60,5,0,walk\n120,7,0,walk\n";
    let (_dir, path) = write_csv(text);
    let schema = CsvSchema {
        window_len: 3,
        stride: 3,
        ..CsvSchema::default()
    };
    let ds = ingest_csv(&path, &schema).unwrap();
    assert_eq!(ds.windows[0].values.get(0, 0), 2.0); // mean of 1 and 3
}

#[test]
fn ingest_malformed_row_reports_line() {
    let text = "timestamp,ax,ay,label\n0,1,0,walk\n60,bogus,0,walk\n";
    let (_dir, path) = write_csv(text);
    let err = ingest_csv(&path, &CsvSchema::default()).unwrap_err();
    assert!(err.to_string().contains("line 3"), "{err}");
}

#[test]
fn ingest_unknown_label_lists_known() {
    let text = "timestamp,ax,ay,label\n0,1,0,run\n";
    let (_dir, path) = write_csv(text);
    let schema = CsvSchema {
        label_names: vec!["walk".into(), "sit".into()],
        ..CsvSchema::default()
    };
    let err = ingest_csv(&path, &schema).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("run") && msg.contains("walk") && msg.contains("sit"), "{msg}");
}

#[test]
fn ingest_too_few_frames_is_error() {
    let text = "timestamp,ax,ay,label\n0,1,0,walk\n60,2,0,walk\n";
    let (_dir, path) = write_csv(text);
    let err = ingest_csv(&path, &CsvSchema::default()).unwrap_err();
    assert!(matches!(err, DynImpError::EmptyDataset { .. }), "{err}");
}

#[test]
fn ingest_gap_minute_becomes_missing_frame() {
    // Minutes 0, 2 present; minute 1 absent: its cells are missing.
    let text = "timestamp,ax,ay,label\n0,1,1,walk\n120,3,3,walk\n";
    let (_dir, path) = write_csv(text);
    let schema = CsvSchema {
        window_len: 3,
        stride: 3,
        ..CsvSchema::default()
    };
    let ds = ingest_csv(&path, &schema).unwrap();
    let w = &ds.windows[0];
    assert!(!w.mask.observed(1, 0));
    assert!(!w.mask.observed(1, 1));
    assert!(w.mask.observed(0, 0) && w.mask.observed(2, 0));
}
