//! Small feedforward regressor `w → 32 → 16 → 1` (ReLU, ReLU, tanh) with
//! hand-written backpropagation and an Adam optimizer.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{WindowDataset, WindowSample};

pub const HIDDEN1: usize = 32;
pub const HIDDEN2: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MlpError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("malformed parameters: {0}")]
    Malformed(String),
    #[error("non-finite parameter after update {0}")]
    NonFinite(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpParams {
    /// `HIDDEN1 × input`
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    /// `HIDDEN2 × HIDDEN1`
    pub w2: Vec<Vec<f64>>,
    pub b2: Vec<f64>,
    pub w3: Vec<f64>,
    pub b3: f64,
}

/// Activations kept by [`forward`] for [`backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    pub z1: Vec<f64>,
    pub h1: Vec<f64>,
    pub z2: Vec<f64>,
    pub h2: Vec<f64>,
    pub z3: f64,
    pub y_hat: f64,
}

impl MlpParams {
    pub fn zeros(input: usize) -> Self {
        Self {
            w1: vec![vec![0.0; input]; HIDDEN1],
            b1: vec![0.0; HIDDEN1],
            w2: vec![vec![0.0; HIDDEN1]; HIDDEN2],
            b2: vec![0.0; HIDDEN2],
            w3: vec![0.0; HIDDEN2],
            b3: 0.0,
        }
    }

    /// Uniform in `±√(1/fan_in)` per layer, weights and biases alike.
    pub fn init(input: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(input);
        let mut fill = |xs: &mut [f64], fan_in: usize| {
            let a = (1.0 / fan_in as f64).sqrt();
            for x in xs {
                *x = rng.gen_range(-a..=a);
            }
        };
        for row in &mut p.w1 {
            fill(row, input);
        }
        fill(&mut p.b1, input);
        for row in &mut p.w2 {
            fill(row, HIDDEN1);
        }
        fill(&mut p.b2, HIDDEN1);
        fill(&mut p.w3, HIDDEN2);
        let mut b3 = [0.0];
        fill(&mut b3, HIDDEN2);
        p.b3 = b3[0];
        p
    }

    pub fn seeded(input: usize, seed: u64) -> Self {
        Self::init(input, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn input_len(&self) -> usize {
        self.w1.first().map_or(0, Vec::len)
    }

    pub fn n_params(&self) -> usize {
        HIDDEN1 * self.input_len() + HIDDEN1 + HIDDEN2 * HIDDEN1 + HIDDEN2 + HIDDEN2 + 1
    }

    pub fn validate(&self) -> Result<(), MlpError> {
        let input = self.input_len();
        let bad = |what: &str| Err(MlpError::Malformed(what.to_string()));
        if input == 0 {
            return bad("w1 has no columns");
        }
        if self.w1.len() != HIDDEN1 || self.w1.iter().any(|r| r.len() != input) {
            return bad("w1 shape");
        }
        if self.b1.len() != HIDDEN1 {
            return bad("b1 length");
        }
        if self.w2.len() != HIDDEN2 || self.w2.iter().any(|r| r.len() != HIDDEN1) {
            return bad("w2 shape");
        }
        if self.b2.len() != HIDDEN2 || self.w3.len() != HIDDEN2 {
            return bad("b2/w3 length");
        }
        if !self.is_finite() {
            return bad("non-finite entry");
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|x| x.is_finite())
    }

    /// Flat view in the order w1 (row-major), b1, w2, b2, w3, b3.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        self.w1.iter().for_each(|r| out.extend_from_slice(r));
        out.extend_from_slice(&self.b1);
        self.w2.iter().for_each(|r| out.extend_from_slice(r));
        out.extend_from_slice(&self.b2);
        out.extend_from_slice(&self.w3);
        out.push(self.b3);
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<(), MlpError> {
        if flat.len() != self.n_params() {
            return Err(MlpError::LengthMismatch(flat.len(), self.n_params()));
        }
        let mut it = flat.iter().copied();
        let mut take = |xs: &mut [f64]| xs.iter_mut().for_each(|x| *x = it.next().unwrap_or(0.0));
        self.w1.iter_mut().for_each(|r| take(r));
        take(&mut self.b1);
        self.w2.iter_mut().for_each(|r| take(r));
        take(&mut self.b2);
        take(&mut self.w3);
        let mut b3 = [0.0];
        take(&mut b3);
        self.b3 = b3[0];
        Ok(())
    }
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn forward(p: &MlpParams, x: &[f64]) -> ForwardCache {
    debug_assert_eq!(x.len(), p.input_len());
    let z1: Vec<f64> = p.w1.iter().zip(&p.b1).map(|(w, b)| dot(w, x) + b).collect();
    let h1: Vec<f64> = z1.iter().map(|&z| relu(z)).collect();
    let z2: Vec<f64> = p.w2.iter().zip(&p.b2).map(|(w, b)| dot(w, &h1) + b).collect();
    let h2: Vec<f64> = z2.iter().map(|&z| relu(z)).collect();
    let z3 = dot(&p.w3, &h2) + p.b3;
    ForwardCache { z1, h1, z2, h2, z3, y_hat: z3.tanh() }
}

pub fn predict(p: &MlpParams, x: &[f64]) -> f64 {
    forward(p, x).y_hat
}

/// Gradient of `(ŷ − y)²` with respect to every parameter.
pub fn backward(p: &MlpParams, cache: &ForwardCache, x: &[f64], y: f64) -> MlpParams {
    let mut g = MlpParams::zeros(p.input_len());
    accumulate_gradient(p, cache, x, y, 1.0, &mut g);
    g
}

#[allow(clippy::needless_range_loop)]
fn accumulate_gradient(
    p: &MlpParams,
    cache: &ForwardCache,
    x: &[f64],
    y: f64,
    weight: f64,
    g: &mut MlpParams,
) {
    let d3 = weight * 2.0 * (cache.y_hat - y) * (1.0 - cache.y_hat * cache.y_hat);
    g.b3 += d3;
    let mut d2 = [0.0; HIDDEN2];
    for k in 0..HIDDEN2 {
        g.w3[k] += d3 * cache.h2[k];
        d2[k] = if cache.z2[k] > 0.0 { d3 * p.w3[k] } else { 0.0 };
    }
    let mut d1 = [0.0; HIDDEN1];
    for k in 0..HIDDEN2 {
        if d2[k] == 0.0 {
            continue;
        }
        g.b2[k] += d2[k];
        for j in 0..HIDDEN1 {
            g.w2[k][j] += d2[k] * cache.h1[j];
            d1[j] += d2[k] * p.w2[k][j];
        }
    }
    for j in 0..HIDDEN1 {
        if cache.z1[j] <= 0.0 {
            continue;
        }
        g.b1[j] += d1[j];
        for (w, xi) in g.w1[j].iter_mut().zip(x) {
            *w += d1[j] * xi;
        }
    }
}

/// Central finite-difference gradient of `(ŷ − y)²`, flattened like
/// [`MlpParams::to_flat`].
pub fn numerical_gradient(p: &MlpParams, x: &[f64], y: f64, h: f64) -> Vec<f64> {
    let base = p.to_flat();
    let mut probe = p.clone();
    let mut out = Vec::with_capacity(base.len());
    let mut flat = base.clone();
    for i in 0..base.len() {
        flat[i] = base[i] + h;
        probe.set_flat(&flat).expect("same shape");
        let up = (predict(&probe, x) - y).powi(2);
        flat[i] = base[i] - h;
        probe.set_flat(&flat).expect("same shape");
        let down = (predict(&probe, x) - y).powi(2);
        flat[i] = base[i];
        out.push((up - down) / (2.0 * h));
    }
    out
}

/// Largest `|a − n| / max(|a|, |n|, floor)` over all entries.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

pub fn mse(preds: &[f64], labels: &[f64]) -> Result<f64, MlpError> {
    if preds.len() != labels.len() {
        return Err(MlpError::LengthMismatch(preds.len(), labels.len()));
    }
    if preds.is_empty() {
        return Err(MlpError::Empty);
    }
    Ok(preds.iter().zip(labels).map(|(p, l)| (p - l).powi(2)).sum::<f64>() / preds.len() as f64)
}

pub const ADAM_LR: f64 = 1e-3;
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: MlpParams,
    pub v: MlpParams,
    pub step_count: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(input: usize, lr: f64) -> Self {
        Self {
            m: MlpParams::zeros(input),
            v: MlpParams::zeros(input),
            step_count: 0,
            lr,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
        }
    }
}

pub fn adam_step(p: &mut MlpParams, grad: &MlpParams, st: &mut AdamState) {
    st.step_count += 1;
    let t = st.step_count as i32;
    let (b1, b2) = (st.beta1, st.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let (lr, eps) = (st.lr, st.eps);
    let upd = |w: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
    };
    for k in 0..p.w1.len() {
        for j in 0..p.w1[k].len() {
            upd(&mut p.w1[k][j], grad.w1[k][j], &mut st.m.w1[k][j], &mut st.v.w1[k][j]);
        }
        upd(&mut p.b1[k], grad.b1[k], &mut st.m.b1[k], &mut st.v.b1[k]);
    }
    for k in 0..p.w2.len() {
        for j in 0..p.w2[k].len() {
            upd(&mut p.w2[k][j], grad.w2[k][j], &mut st.m.w2[k][j], &mut st.v.w2[k][j]);
        }
        upd(&mut p.b2[k], grad.b2[k], &mut st.m.b2[k], &mut st.v.b2[k]);
        upd(&mut p.w3[k], grad.w3[k], &mut st.m.w3[k], &mut st.v.w3[k]);
    }
    upd(&mut p.b3, grad.b3, &mut st.m.b3, &mut st.v.b3);
}

fn default_epochs() -> usize {
    500
}
fn default_batch() -> usize {
    32
}
fn default_lr() -> f64 {
    ADAM_LR
}
fn default_shuffle() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_shuffle")]
    pub shuffle_within_train: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: default_epochs(),
            batch_size: default_batch(),
            lr: ADAM_LR,
            seed: 0,
            shuffle_within_train: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), MlpError> {
        if self.epochs == 0 {
            return Err(MlpError::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(MlpError::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(MlpError::InvalidConfig(format!("lr must be finite and > 0, got {}", self.lr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: MlpParams,
    /// Mean train-split MSE after each epoch.
    pub loss_curve: Vec<f64>,
    pub updates: u64,
}

/// Trains on the train split only.
pub fn train(ds: &WindowDataset, cfg: &TrainConfig) -> Result<TrainOutcome, MlpError> {
    train_samples(ds.train(), cfg)
}

pub fn train_samples(samples: &[WindowSample], cfg: &TrainConfig) -> Result<TrainOutcome, MlpError> {
    cfg.validate()?;
    let first = samples.first().ok_or(MlpError::Empty)?;
    let input = first.x.len();
    if let Some(bad) = samples.iter().find(|s| s.x.len() != input) {
        return Err(MlpError::LengthMismatch(bad.x.len(), input));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = MlpParams::init(input, &mut rng);
    let mut adam = AdamState::new(input, cfg.lr);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    let labels: Vec<f64> = samples.iter().map(|s| s.y).collect();

    for _ in 0..cfg.epochs {
        if cfg.shuffle_within_train {
            order.shuffle(&mut rng);
        }
        for batch in order.chunks(cfg.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            let mut grad = MlpParams::zeros(input);
            for &i in batch {
                let s = &samples[i];
                let cache = forward(&params, &s.x);
                accumulate_gradient(&params, &cache, &s.x, s.y, scale, &mut grad);
            }
            adam_step(&mut params, &grad, &mut adam);
            if !params.is_finite() {
                return Err(MlpError::NonFinite(adam.step_count));
            }
        }
        let preds: Vec<f64> = samples.iter().map(|s| predict(&params, &s.x)).collect();
        loss_curve.push(mse(&preds, &labels)?);
    }
    Ok(TrainOutcome { params, loss_curve, updates: adam.step_count })
}

/// One forward pass per sample, order preserved.
pub fn predict_series(p: &MlpParams, samples: &[WindowSample]) -> Vec<f64> {
    samples.iter().map(|s| predict(p, &s.x)).collect()
}
