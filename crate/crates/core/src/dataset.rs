//! Sliding-window supervised dataset built from a trajectory.
//!
//! Sample `i` pairs the ancilla window `[z_a(t_{i−w}), …, z_a(t_{i−1})]` with
//! the label `z_s(t_i)`. The split is chronological: the first
//! `floor(n/2)` samples train, the rest test.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::Trajectory;

pub const DEFAULT_WINDOW: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("trajectory has {len} points; window {window} needs at least {}", window + 1)]
    TooShort { len: usize, window: usize },
    #[error("window length must be >= 1")]
    ZeroWindow,
    #[error("split needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("inconsistent dataset: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSample {
    pub x: Vec<f64>,
    pub y: f64,
    pub t_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowDataset {
    samples: Vec<WindowSample>,
    split_index: usize,
    window_len: usize,
}

/// Builds windows from raw series. `z_a` and `z_s` must share a length.
pub fn build_windows_from_series(
    z_a: &[f64],
    z_s: &[f64],
    window_len: usize,
) -> Result<WindowDataset, DatasetError> {
    if window_len == 0 {
        return Err(DatasetError::ZeroWindow);
    }
    if z_a.len() != z_s.len() {
        return Err(DatasetError::Inconsistent(format!(
            "z_a has {} points, z_s has {}",
            z_a.len(),
            z_s.len()
        )));
    }
    if z_a.len() <= window_len {
        return Err(DatasetError::TooShort { len: z_a.len(), window: window_len });
    }
    let samples: Vec<WindowSample> = (window_len..z_a.len())
        .map(|i| WindowSample { x: z_a[i - window_len..i].to_vec(), y: z_s[i], t_index: i })
        .collect();
    Ok(WindowDataset { split_index: samples.len() / 2, samples, window_len })
}

pub fn build_windows(traj: &Trajectory, window_len: usize) -> Result<WindowDataset, DatasetError> {
    build_windows_from_series(&traj.z_a, &traj.z_s, window_len)
}

impl WindowDataset {
    /// Reassembles a dataset from stored samples, re-checking ordering and
    /// the split rule.
    pub fn from_samples(samples: Vec<WindowSample>, split_index: usize) -> Result<Self, DatasetError> {
        let window_len = samples.first().map(|s| s.x.len()).unwrap_or(DEFAULT_WINDOW);
        if window_len == 0 {
            return Err(DatasetError::ZeroWindow);
        }
        for (k, s) in samples.iter().enumerate() {
            if s.x.len() != window_len {
                return Err(DatasetError::Inconsistent(format!("sample {k} has window {}", s.x.len())));
            }
            if s.t_index < window_len {
                return Err(DatasetError::Inconsistent(format!("sample {k} has t_index {}", s.t_index)));
            }
        }
        if samples.windows(2).any(|w| w[1].t_index != w[0].t_index + 1) {
            return Err(DatasetError::Inconsistent("t_index must increase with unit stride".into()));
        }
        if split_index != samples.len() / 2 {
            return Err(DatasetError::Inconsistent(format!(
                "split at {split_index}, expected {}",
                samples.len() / 2
            )));
        }
        Ok(Self { samples, split_index, window_len })
    }

    pub fn samples(&self) -> &[WindowSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn split_index(&self) -> usize {
        self.split_index
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn train(&self) -> &[WindowSample] {
        &self.samples[..self.split_index]
    }

    pub fn test(&self) -> &[WindowSample] {
        &self.samples[self.split_index..]
    }
}

/// `(train, test)` views; train holds `floor(n/2)` samples.
pub fn chronological_split(ds: &WindowDataset) -> Result<(&[WindowSample], &[WindowSample]), DatasetError> {
    if ds.len() < 2 {
        return Err(DatasetError::TooFewSamples(ds.len()));
    }
    Ok((ds.train(), ds.test()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(n: usize) -> (Vec<f64>, Vec<f64>) {
        let z_a = (0..n).map(|i| i as f64 / n as f64).collect();
        let z_s = (0..n).map(|i| -(i as f64) / n as f64).collect();
        (z_a, z_s)
    }

    #[test]
    fn seven_points_give_two_samples() {
        let (z_a, z_s) = ramp(7);
        let ds = build_windows_from_series(&z_a, &z_s, 5).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.samples()[0].x, z_a[0..5].to_vec());
        assert_eq!(ds.samples()[0].y, z_s[5]);
        assert_eq!(ds.samples()[0].t_index, 5);
        assert_eq!(ds.samples()[1].x, z_a[1..6].to_vec());
        assert_eq!(ds.samples()[1].y, z_s[6]);
    }

    #[test]
    fn six_points_give_one_sample() {
        let (z_a, z_s) = ramp(6);
        assert_eq!(build_windows_from_series(&z_a, &z_s, 5).unwrap().len(), 1);
        let (z_a, z_s) = ramp(5);
        assert_eq!(
            build_windows_from_series(&z_a, &z_s, 5).unwrap_err(),
            DatasetError::TooShort { len: 5, window: 5 }
        );
    }

    #[test]
    fn constant_trajectory() {
        let ds = build_windows_from_series(&[0.3; 12], &[-0.7; 12], 5).unwrap();
        assert!(ds.samples().iter().all(|s| s.x == vec![0.3; 5] && s.y == -0.7));
    }

    #[test]
    fn split_sizes() {
        let (z_a, z_s) = ramp(15);
        let ds = build_windows_from_series(&z_a, &z_s, 5).unwrap();
        let (train, test) = chronological_split(&ds).unwrap();
        assert_eq!(train.iter().map(|s| s.t_index - 5).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
        assert_eq!(test.iter().map(|s| s.t_index - 5).collect::<Vec<_>>(), vec![5, 6, 7, 8, 9]);

        let (z_a, z_s) = ramp(1010);
        let ds = build_windows_from_series(&z_a, &z_s, 5).unwrap();
        assert_eq!(ds.len(), 1005);
        assert_eq!(ds.train().len(), 502);
        assert_eq!(ds.test().len(), 503);

        let (z_a, z_s) = ramp(1005);
        let ds = build_windows_from_series(&z_a, &z_s, 5).unwrap();
        assert_eq!(ds.test().len(), 500);
    }

    #[test]
    fn split_rejects_single_sample() {
        let (z_a, z_s) = ramp(6);
        let ds = build_windows_from_series(&z_a, &z_s, 5).unwrap();
        assert_eq!(chronological_split(&ds).unwrap_err(), DatasetError::TooFewSamples(1));
    }

    #[test]
    fn from_samples_validates() {
        let (z_a, z_s) = ramp(20);
        let ds = build_windows_from_series(&z_a, &z_s, 5).unwrap();
        let again = WindowDataset::from_samples(ds.samples().to_vec(), ds.split_index()).unwrap();
        assert_eq!(again, ds);
        assert!(WindowDataset::from_samples(ds.samples().to_vec(), 3).is_err());
        let mut gap = ds.samples().to_vec();
        gap.remove(4);
        assert!(WindowDataset::from_samples(gap, 7).is_err());
    }

    proptest! {
        #[test]
        fn sliding_and_leakage(z in prop::collection::vec(-1.0f64..1.0, 8..120), w in 1usize..7) {
            let z_s: Vec<f64> = z.iter().map(|x| -x).collect();
            prop_assume!(z.len() > w + 1);
            let ds = build_windows_from_series(&z, &z_s, w).unwrap();
            prop_assert_eq!(ds.len(), z.len() - w);
            for (k, s) in ds.samples().iter().enumerate() {
                prop_assert_eq!(s.x[w - 1], z[s.t_index - 1]);
                if k > 0 {
                    prop_assert_eq!(&s.x[..w - 1], &ds.samples()[k - 1].x[1..]);
                }
            }
            let (train, test) = chronological_split(&ds).unwrap();
            prop_assert_eq!(train.len() + test.len(), ds.len());
            if let (Some(a), Some(b)) = (train.last(), test.first()) {
                prop_assert!(a.t_index < b.t_index);
            }
            let again = build_windows_from_series(&z, &z_s, w).unwrap();
            prop_assert_eq!(again, ds);
        }
    }
}
