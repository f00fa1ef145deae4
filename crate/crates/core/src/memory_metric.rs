//! Revival counting on a predicted `⟨Z_S⟩` series.
//!
//! A revival-like move is a forward step `y[i] − y[i−1]` strictly above a
//! threshold `ε`. The normalized score divides the count by the number of
//! evaluated samples, so runs of different length stay comparable.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_EPSILON: f64 = 0.015;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("series needs at least 2 points, got {0}")]
    TooShort(usize),
    #[error("n_eval must be >= 1")]
    ZeroEvaluated,
    #[error("threshold must be finite and > 0, got {0}")]
    BadThreshold(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RevivalReport {
    pub n_rev: usize,
    pub n_eval: usize,
    pub score: f64,
    pub epsilon: f64,
    /// `(t1, t2)`: index of the first step above `ε` and index of the peak.
    pub segments: Vec<(usize, usize)>,
}

/// Strict Heaviside step: `Θ(0) = 0`.
pub fn heaviside(x: f64) -> u8 {
    u8::from(x > 0.0)
}

fn check(series: &[f64], epsilon: f64) -> Result<(), MetricError> {
    if series.len() < 2 {
        return Err(MetricError::TooShort(series.len()));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(MetricError::BadThreshold(epsilon));
    }
    Ok(())
}

/// `Θ(Δy_i − ε)` for `i = 1..len`.
pub fn revival_indicators(series: &[f64], epsilon: f64) -> Result<Vec<u8>, MetricError> {
    check(series, epsilon)?;
    Ok(series.windows(2).map(|w| heaviside(w[1] - w[0] - epsilon)).collect())
}

pub fn revival_count(series: &[f64], epsilon: f64) -> Result<usize, MetricError> {
    Ok(revival_indicators(series, epsilon)?.iter().map(|&b| b as usize).sum())
}

pub fn normalized_score(series: &[f64], epsilon: f64, n_eval: usize) -> Result<f64, MetricError> {
    if n_eval == 0 {
        return Err(MetricError::ZeroEvaluated);
    }
    Ok(revival_count(series, epsilon)? as f64 / n_eval as f64)
}

/// Rising runs that contain at least one step above `ε`.
///
/// A run opens at the first index whose step exceeds `ε` and extends while
/// steps stay strictly positive; its peak is the last index of the run.
pub fn detect_segments(series: &[f64], epsilon: f64) -> Result<Vec<(usize, usize)>, MetricError> {
    check(series, epsilon)?;
    let mut segments = Vec::new();
    let mut i = 1;
    while i < series.len() {
        if series[i] - series[i - 1] > epsilon {
            let start = i;
            let mut peak = i;
            while peak + 1 < series.len() && series[peak + 1] - series[peak] > 0.0 {
                peak += 1;
            }
            segments.push((start, peak));
            i = peak + 1;
        } else {
            i += 1;
        }
    }
    Ok(segments)
}

/// Scores a prediction series with `n_eval = preds.len()`.
pub fn score_pipeline(preds: &[f64], epsilon: f64) -> Result<RevivalReport, MetricError> {
    let n_rev = revival_count(preds, epsilon)?;
    let n_eval = preds.len();
    Ok(RevivalReport {
        n_rev,
        n_eval,
        score: n_rev as f64 / n_eval as f64,
        epsilon,
        segments: detect_segments(preds, epsilon)?,
    })
}
