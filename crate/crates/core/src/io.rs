//! File formats for every pipeline artifact.
//!
//! Trajectories and rates are written with 12 significant digits; dataset,
//! predictions and losses use the shortest representation that round-trips.
//! Re-exporting anything read from these files reproduces it byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::dataset::{WindowDataset, WindowSample};
use crate::dynamics::{Trajectory, TrajectoryMeta};
use crate::memory_metric::RevivalReport;
use crate::mlp::MlpParams;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("missing input {0}")]
    Missing(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
}

fn malformed(path: &Path, reason: impl Into<String>) -> IoError {
    IoError::Malformed { path: path.to_path_buf(), reason: reason.into() }
}

/// `%.12g`-style formatting.
pub fn format_sig12(x: f64) -> String {
    const SIG: i32 = 12;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", (SIG - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..SIG).contains(&exp) {
        trim_zeros(&format!("{:.*}", (SIG - 1 - exp) as usize, x))
    } else {
        format!("{}e{}", trim_zeros(mantissa), exp)
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn open_reader(path: &Path) -> Result<csv::Reader<fs::File>, IoError> {
    if !path.exists() {
        return Err(IoError::Missing(path.to_path_buf()));
    }
    let file = fs::File::open(path).map_err(|source| IoError::Io { path: path.into(), source })?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

/// Header plus every record as strings.
pub fn read_csv_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), IoError> {
    let mut rdr = open_reader(path)?;
    let headers: Vec<String> =
        rdr.headers().map_err(|e| malformed(path, e.to_string()))?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| malformed(path, e.to_string()))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok((headers, rows))
}

pub fn write_csv_table(path: &Path, headers: &[&str], rows: &[Vec<String>]) -> Result<(), IoError> {
    let io_err = |e: csv::Error| malformed(path, e.to_string());
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(io_err)?;
    w.write_record(headers).map_err(io_err)?;
    for r in rows {
        w.write_record(r).map_err(io_err)?;
    }
    w.flush().map_err(|source| IoError::Io { path: path.into(), source })
}

fn ensure_parent(path: &Path) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| IoError::Io { path: dir.into(), source })?;
    }
    Ok(())
}

fn parse_f64(path: &Path, row: usize, s: &str) -> Result<f64, IoError> {
    s.trim().parse().map_err(|_| malformed(path, format!("row {row}: bad number {s:?}")))
}

fn parse_usize(path: &Path, row: usize, s: &str) -> Result<usize, IoError> {
    s.trim().parse().map_err(|_| malformed(path, format!("row {row}: bad index {s:?}")))
}

fn expect_headers(path: &Path, got: &[String], want: &[&str]) -> Result<(), IoError> {
    if got.len() != want.len() || got.iter().zip(want).any(|(a, b)| a != b) {
        return Err(malformed(path, format!("expected header {}, got {}", want.join(","), got.join(","))));
    }
    Ok(())
}

fn numeric_columns(path: &Path, rows: &[Vec<String>]) -> Result<Vec<Vec<f64>>, IoError> {
    rows.iter().enumerate().map(|(i, r)| r.iter().map(|s| parse_f64(path, i + 1, s)).collect()).collect()
}

/// Pretty JSON with a trailing newline, as written to every JSON artifact.
pub fn json_string<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    ensure_parent(path)?;
    let text = json_string(value).map_err(|e| malformed(path, e.to_string()))?;
    fs::write(path, text).map_err(|source| IoError::Io { path: path.into(), source })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    if !path.exists() {
        return Err(IoError::Missing(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|source| IoError::Io { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|e| malformed(path, e.to_string()))
}

pub const TRAJECTORY_HEADER: [&str; 3] = ["t", "z_s", "z_a"];

/// Writes `t,z_s,z_a` to `csv_path` and the metadata record to `meta_path`.
pub fn write_trajectory(csv_path: &Path, meta_path: &Path, traj: &Trajectory) -> Result<(), IoError> {
    let rows: Vec<Vec<String>> = (0..traj.len())
        .map(|k| vec![format_sig12(traj.times[k]), format_sig12(traj.z_s[k]), format_sig12(traj.z_a[k])])
        .collect();
    write_csv_table(csv_path, &TRAJECTORY_HEADER, &rows)?;
    write_json(meta_path, &traj.meta)
}

pub fn read_trajectory(csv_path: &Path, meta_path: &Path) -> Result<Trajectory, IoError> {
    let (headers, rows) = read_csv_table(csv_path)?;
    expect_headers(csv_path, &headers, &TRAJECTORY_HEADER)?;
    let meta: TrajectoryMeta = read_json(meta_path)?;
    let cols = numeric_columns(csv_path, &rows)?;
    if cols.len() != meta.n_steps + 1 {
        return Err(malformed(
            csv_path,
            format!("{} rows but metadata expects {}", cols.len(), meta.n_steps + 1),
        ));
    }
    if cols.windows(2).any(|w| w[1][0] <= w[0][0]) {
        return Err(malformed(csv_path, "times must increase"));
    }
    Ok(Trajectory {
        times: cols.iter().map(|r| r[0]).collect(),
        z_s: cols.iter().map(|r| r[1]).collect(),
        z_a: cols.iter().map(|r| r[2]).collect(),
        meta,
    })
}

/// Rate diagnostics: one header per channel, one row per time.
pub fn write_rates(path: &Path, headers: &[&str], columns: &[Vec<f64>]) -> Result<(), IoError> {
    let n = columns.first().map_or(0, Vec::len);
    let rows: Vec<Vec<String>> =
        (0..n).map(|k| columns.iter().map(|c| format_sig12(c[k])).collect()).collect();
    write_csv_table(path, headers, &rows)
}

pub fn write_dataset(path: &Path, ds: &WindowDataset) -> Result<(), IoError> {
    let w = ds.window_len();
    let mut headers: Vec<String> = (1..=w).map(|i| format!("x{i}")).collect();
    headers.extend(["y", "t_index", "split"].map(String::from));
    let headers: Vec<&str> = headers.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = ds
        .samples()
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let mut r: Vec<String> = s.x.iter().map(|v| v.to_string()).collect();
            r.push(s.y.to_string());
            r.push(s.t_index.to_string());
            r.push(if k < ds.split_index() { "train" } else { "test" }.into());
            r
        })
        .collect();
    write_csv_table(path, &headers, &rows)
}

pub fn read_dataset(path: &Path) -> Result<WindowDataset, IoError> {
    let (headers, rows) = read_csv_table(path)?;
    if headers.len() < 4 {
        return Err(malformed(path, "too few columns"));
    }
    let w = headers.len() - 3;
    let mut want: Vec<String> = (1..=w).map(|i| format!("x{i}")).collect();
    want.extend(["y", "t_index", "split"].map(String::from));
    let want: Vec<&str> = want.iter().map(String::as_str).collect();
    expect_headers(path, &headers, &want)?;

    let mut samples = Vec::with_capacity(rows.len());
    let mut n_train = 0;
    let mut seen_test = false;
    for (i, r) in rows.iter().enumerate() {
        let x = r[..w].iter().map(|s| parse_f64(path, i + 1, s)).collect::<Result<Vec<_>, _>>()?;
        let y = parse_f64(path, i + 1, &r[w])?;
        let t_index = parse_usize(path, i + 1, &r[w + 1])?;
        match r[w + 2].as_str() {
            "train" if !seen_test => n_train += 1,
            "test" => seen_test = true,
            other => return Err(malformed(path, format!("row {}: bad split {other:?}", i + 1))),
        }
        samples.push(WindowSample { x, y, t_index });
    }
    if samples.is_empty() {
        return Err(malformed(path, "no samples"));
    }
    if !seen_test {
        return Err(malformed(path, "empty test split"));
    }
    WindowDataset::from_samples(samples, n_train).map_err(|e| malformed(path, e.to_string()))
}

pub fn write_params(path: &Path, p: &MlpParams) -> Result<(), IoError> {
    write_json(path, p)
}

pub fn read_params(path: &Path) -> Result<MlpParams, IoError> {
    let p: MlpParams = read_json(path)?;
    p.validate().map_err(|e| malformed(path, e.to_string()))?;
    Ok(p)
}

pub fn write_loss_curve(path: &Path, losses: &[f64]) -> Result<(), IoError> {
    let rows: Vec<Vec<String>> =
        losses.iter().enumerate().map(|(k, l)| vec![(k + 1).to_string(), l.to_string()]).collect();
    write_csv_table(path, &["epoch", "mse"], &rows)
}

pub fn read_loss_curve(path: &Path) -> Result<Vec<f64>, IoError> {
    let (headers, rows) = read_csv_table(path)?;
    expect_headers(path, &headers, &["epoch", "mse"])?;
    Ok(numeric_columns(path, &rows)?.into_iter().map(|r| r[1]).collect())
}

/// One row per test sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub t_index: usize,
    pub y_true: f64,
    pub y_pred: f64,
}

pub const PREDICTION_HEADER: [&str; 3] = ["t_index", "y_true", "y_pred"];

pub fn write_predictions(path: &Path, rows: &[PredictionRow]) -> Result<(), IoError> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.t_index.to_string(), r.y_true.to_string(), r.y_pred.to_string()])
        .collect();
    write_csv_table(path, &PREDICTION_HEADER, &rows)
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>, IoError> {
    let (headers, rows) = read_csv_table(path)?;
    expect_headers(path, &headers, &PREDICTION_HEADER)?;
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            Ok(PredictionRow {
                t_index: parse_usize(path, i + 1, &r[0])?,
                y_true: parse_f64(path, i + 1, &r[1])?,
                y_pred: parse_f64(path, i + 1, &r[2])?,
            })
        })
        .collect()
}

/// Reads one named numeric column from any CSV with a header row.
pub fn read_column(path: &Path, column: &str) -> Result<Vec<f64>, IoError> {
    let (headers, rows) = read_csv_table(path)?;
    let idx = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| malformed(path, format!("no column {column:?}")))?;
    rows.iter().enumerate().map(|(i, r)| parse_f64(path, i + 1, &r[idx])).collect()
}

pub fn write_report(json_path: &Path, segments_path: &Path, report: &RevivalReport) -> Result<(), IoError> {
    write_json(json_path, report)?;
    let rows: Vec<Vec<String>> =
        report.segments.iter().map(|(a, b)| vec![a.to_string(), b.to_string()]).collect();
    write_csv_table(segments_path, &["t1", "t2"], &rows)
}

pub fn read_report(path: &Path) -> Result<RevivalReport, IoError> {
    read_json(path)
}
