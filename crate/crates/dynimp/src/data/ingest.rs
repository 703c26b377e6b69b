//! CSV ingestion: raw sensor rows to 1-minute frames to windows.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{DynImpError, Result};

use super::{build_windows, Dataset, SensorFrame};

/// Column mapping for a sensor CSV.
///
/// Expected layout: a header row, one timestamp column, F feature columns,
/// one label column. Missing cells are empty or the literal `NaN`.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub timestamp_col: String,
    /// Feature columns in dataset order. Empty = every column that is neither
    /// timestamp nor label, in header order.
    pub feature_cols: Vec<String>,
    pub label_col: String,
    /// Known label strings. Empty = discover labels in order of first
    /// appearance; non-empty = any other label string is an error.
    pub label_names: Vec<String>,
    /// Window length in frames.
    pub window_len: usize,
    /// Window stride in frames.
    pub stride: usize,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            timestamp_col: "timestamp".into(),
            feature_cols: Vec::new(),
            label_col: "label".into(),
            label_names: Vec::new(),
            window_len: 24,
            stride: 24,
        }
    }
}

/// Reads a sensor CSV, bins rows into non-overlapping 1-minute frames (mean
/// of observed samples per bin per feature, modal label per bin), and windows
/// the frames. A minute with no samples becomes a frame of all-missing cells.
pub fn ingest_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => {
                DynImpError::io(path.display().to_string(), std::io::Error::other(e.to_string()))
            }
            _ => DynImpError::Csv(e),
        })?;

    let headers = reader.headers()?.clone();
    let col_index = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DynImpError::InvalidConfig(format!("missing column `{name}`")))
    };
    let ts_idx = col_index(&schema.timestamp_col)?;
    let label_idx = col_index(&schema.label_col)?;
    let feature_cols: Vec<String> = if schema.feature_cols.is_empty() {
        headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != ts_idx && *i != label_idx)
            .map(|(_, h)| h.to_string())
            .collect()
    } else {
        schema.feature_cols.clone()
    };
    let feature_idx: Vec<usize> = feature_cols
        .iter()
        .map(|n| col_index(n))
        .collect::<Result<_>>()?;
    let nf = feature_idx.len();

    let mut label_names: Vec<String> = schema.label_names.clone();
    let labels_fixed = !label_names.is_empty();

    // Per minute bin: per-feature (sum, count) and label counts.
    struct Bin {
        sums: Vec<f64>,
        counts: Vec<usize>,
        labels: Vec<(usize, usize)>,
    }
    let mut bins: BTreeMap<i64, Bin> = BTreeMap::new();
    let mut last_ts: Option<i64> = None;

    for (rec_no, record) in reader.records().enumerate() {
        let line = rec_no + 2; // 1-based, after the header
        let record = record?;
        let ts_raw = record.get(ts_idx).unwrap_or("");
        let ts: i64 = ts_raw.trim().parse().map_err(|_| DynImpError::MalformedRow {
            line,
            msg: format!("bad timestamp `{ts_raw}`"),
        })?;
        if let Some(prev) = last_ts {
            if ts <= prev {
                return Err(DynImpError::MalformedRow {
                    line,
                    msg: format!("timestamp {ts} not strictly increasing (previous {prev})"),
                });
            }
        }
        last_ts = Some(ts);

        let label_raw = record.get(label_idx).unwrap_or("").trim();
        let label_id = if label_raw.is_empty() {
            None
        } else {
            match label_names.iter().position(|l| l == label_raw) {
                Some(id) => Some(id),
                None if labels_fixed => {
                    return Err(DynImpError::UnknownLabel {
                        label: label_raw.to_string(),
                        known: label_names.join(", "),
                    });
                }
                None => {
                    label_names.push(label_raw.to_string());
                    Some(label_names.len() - 1)
                }
            }
        };

        let minute = ts.div_euclid(60);
        let bin = bins.entry(minute).or_insert_with(|| Bin {
            sums: vec![0.0; nf],
            counts: vec![0; nf],
            labels: Vec::new(),
        });
        for (fi, &ci) in feature_idx.iter().enumerate() {
            let raw = record.get(ci).unwrap_or("").trim();
            if raw.is_empty() || raw == "NaN" {
                continue;
            }
            let v: f64 = raw.parse().map_err(|_| DynImpError::MalformedRow {
                line,
                msg: format!("bad value `{raw}` in column `{}`", feature_cols[fi]),
            })?;
            bin.sums[fi] += v;
            bin.counts[fi] += 1;
        }
        if let Some(l) = label_id {
            match bin.labels.iter_mut().find(|(id, _)| *id == l) {
                Some((_, n)) => *n += 1,
                None => bin.labels.push((l, 1)),
            }
        }
    }

    if bins.is_empty() {
        return Err(DynImpError::EmptyDataset {
            needed: schema.window_len,
            got: 0,
        });
    }

    // Every minute between first and last yields a frame; empty minutes are
    // all-missing frames.
    let first = *bins.keys().next().unwrap();
    let last = *bins.keys().last().unwrap();
    let mut frames = Vec::with_capacity((last - first + 1) as usize);
    for minute in first..=last {
        let frame = match bins.get(&minute) {
            Some(bin) => SensorFrame {
                timestamp: minute * 60,
                features: (0..nf)
                    .map(|fi| {
                        (bin.counts[fi] > 0).then(|| bin.sums[fi] / bin.counts[fi] as f64)
                    })
                    .collect(),
                label_id: bin
                    .labels
                    .iter()
                    .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
                    .map(|(id, _)| *id),
            },
            None => SensorFrame {
                timestamp: minute * 60,
                features: vec![None; nf],
                label_id: None,
            },
        };
        frames.push(frame);
    }

    if frames.len() < schema.window_len {
        return Err(DynImpError::EmptyDataset {
            needed: schema.window_len,
            got: frames.len(),
        });
    }

    let windows = build_windows(&frames, schema.window_len, schema.stride)?;
    Ok(Dataset {
        windows,
        scaling: None,
        feature_names: feature_cols,
        label_names,
    })
}
