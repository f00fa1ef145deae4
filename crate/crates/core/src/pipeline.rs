//! End-to-end stages: simulate → dataset → train → predict → score.
//!
//! Every stage reads its inputs from and writes its outputs to a run
//! directory, so chaining the stages by hand and calling [`run_pipeline`]
//! produce identical files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{build_windows, DatasetError, DEFAULT_WINDOW};
use crate::dynamics::{
    damping_probability, evolve, initial_state, rtn_lambda, ChannelSpec, DynamicsError, InitialState,
    NoiseKind, Regime, TimeGrid, Trajectory, DEFAULT_COUPLING,
};
use crate::io::{self, IoError, PredictionRow};
use crate::memory_metric::{score_pipeline, MetricError, RevivalReport, DEFAULT_EPSILON};
use crate::mlp::{mse, predict_series, train, MlpError, TrainConfig};
use crate::svg::{LinePlot, Markers, Series};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("integration failed: {0}")]
    Integration(DynamicsError),
    #[error("{0}")]
    Missing(String),
    #[error("{0}")]
    Malformed(String),
    #[error("config mismatch: {0}")]
    Mismatch(String),
    #[error("{0}")]
    Other(String),
}

impl PipelineError {
    /// Process exit status for this failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Integration(_) => 3,
            PipelineError::Missing(_) => 4,
            PipelineError::Malformed(_) => 5,
            PipelineError::Mismatch(_) => 6,
            PipelineError::Other(_) => 1,
        }
    }
}

impl From<IoError> for PipelineError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Missing(_) => PipelineError::Missing(e.to_string()),
            IoError::Malformed { .. } => PipelineError::Malformed(e.to_string()),
            IoError::Io { .. } => PipelineError::Other(e.to_string()),
        }
    }
}

impl From<DynamicsError> for PipelineError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::Unphysical { .. } => PipelineError::Integration(e),
            other => PipelineError::Config(other.to_string()),
        }
    }
}

impl From<DatasetError> for PipelineError {
    fn from(e: DatasetError) -> Self {
        PipelineError::Config(e.to_string())
    }
}

impl From<MlpError> for PipelineError {
    fn from(e: MlpError) -> Self {
        match e {
            MlpError::InvalidConfig(_) => PipelineError::Config(e.to_string()),
            MlpError::Malformed(_) | MlpError::LengthMismatch(..) | MlpError::Empty => {
                PipelineError::Malformed(e.to_string())
            }
            MlpError::NonFinite(_) => PipelineError::Other(e.to_string()),
        }
    }
}

impl From<MetricError> for PipelineError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::BadThreshold(_) => PipelineError::Config(e.to_string()),
            _ => PipelineError::Malformed(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

fn default_g() -> f64 {
    DEFAULT_COUPLING
}
fn default_window() -> usize {
    DEFAULT_WINDOW
}
fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// One full pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub channel: ChannelSpec,
    #[serde(default = "default_g")]
    pub g: f64,
    pub grid: TimeGrid,
    pub initial_state: InitialState,
    #[serde(default = "default_window")]
    pub window_len: usize,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub emit_plots: bool,
}

/// Shared horizon: 1005 grid points leave 500 test samples at window 5.
pub const PRESET_T_END: f64 = 10.0;
pub const PRESET_N_STEPS: usize = 1004;

impl RunConfig {
    pub fn new(channel: ChannelSpec, initial_state: InitialState) -> Self {
        Self {
            channel,
            g: DEFAULT_COUPLING,
            grid: TimeGrid::new(PRESET_T_END, PRESET_N_STEPS),
            initial_state,
            window_len: DEFAULT_WINDOW,
            train: TrainConfig::default(),
            epsilon: DEFAULT_EPSILON,
            output_dir: default_output(),
            emit_plots: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PipelineError::Config(m));
        self.channel.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.grid.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        if !self.g.is_finite() {
            return bad(format!("g must be finite, got {}", self.g));
        }
        if self.initial_state == InitialState::Custom {
            return bad("initial_state must name a preparation".into());
        }
        if self.window_len == 0 {
            return bad("window_len must be >= 1".into());
        }
        if self.grid.n_steps + 1 < self.window_len + 2 {
            return bad(format!(
                "grid of {} points is too short for window {}",
                self.grid.n_steps + 1,
                self.window_len
            ));
        }
        self.train.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad(format!("epsilon must be finite and > 0, got {}", self.epsilon));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = read_config(path)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    io::read_json(path).map_err(|e| match e {
        IoError::Missing(_) => PipelineError::Missing(e.to_string()),
        other => PipelineError::Config(other.to_string()),
    })
}

/// File names inside a run directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunPaths {
    pub dir: PathBuf,
}

impl RunPaths {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }
    pub fn config(&self) -> PathBuf {
        self.dir.join("config.json")
    }
    pub fn trajectory(&self) -> PathBuf {
        self.dir.join("trajectory.csv")
    }
    pub fn trajectory_meta(&self) -> PathBuf {
        self.dir.join("trajectory.meta.json")
    }
    pub fn rates(&self) -> PathBuf {
        self.dir.join("rates.csv")
    }
    pub fn dataset(&self) -> PathBuf {
        self.dir.join("dataset.csv")
    }
    pub fn params(&self) -> PathBuf {
        self.dir.join("params.json")
    }
    pub fn loss(&self) -> PathBuf {
        self.dir.join("loss.csv")
    }
    pub fn predictions(&self) -> PathBuf {
        self.dir.join("predictions.csv")
    }
    pub fn report(&self) -> PathBuf {
        self.dir.join("report.json")
    }
    pub fn segments(&self) -> PathBuf {
        self.dir.join("segments.csv")
    }
    pub fn summary(&self) -> PathBuf {
        self.dir.join("summary.json")
    }
    pub fn plot(&self) -> PathBuf {
        self.dir.join("prediction.svg")
    }
}

/// Evolves the configured state and writes trajectory, metadata and rates.
pub fn simulate_stage(cfg: &RunConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let paths = RunPaths::new(&cfg.output_dir);
    let rho0 = initial_state(cfg.initial_state)?;
    let traj = evolve(&rho0, &cfg.grid, cfg.g, &cfg.channel, cfg.initial_state)?;
    io::write_json(&paths.config(), cfg)?;
    io::write_trajectory(&paths.trajectory(), &paths.trajectory_meta(), &traj)?;
    write_rates(&paths.rates(), &cfg.channel, &traj.times)?;
    Ok(traj)
}

fn write_rates(path: &Path, channel: &ChannelSpec, times: &[f64]) -> Result<()> {
    let gamma: Vec<f64> = times.iter().map(|&t| channel.rate(t).value).collect();
    match &channel.kind {
        NoiseKind::AmplitudeDamping(p) => {
            let diag: Vec<f64> = times.iter().map(|&t| damping_probability(t, p)).collect();
            io::write_rates(path, &["t", "gamma", "one_minus_abs_g_sq"], &[times.to_vec(), gamma, diag])?
        }
        NoiseKind::RtnDephasing(p) => {
            let lam: Vec<f64> = times.iter().map(|&t| rtn_lambda(t, p)).collect();
            io::write_rates(path, &["t", "gamma", "lambda"], &[times.to_vec(), gamma, lam])?
        }
        NoiseKind::NoiseFree => io::write_rates(path, &["t", "gamma"], &[times.to_vec(), gamma])?,
    }
    Ok(())
}

/// Reads the stored trajectory and writes the windowed dataset.
pub fn dataset_stage(dir: &Path, window_len: usize) -> Result<usize> {
    let paths = RunPaths::new(dir);
    let traj = io::read_trajectory(&paths.trajectory(), &paths.trajectory_meta())?;
    let ds = build_windows(&traj, window_len)?;
    io::write_dataset(&paths.dataset(), &ds)?;
    Ok(ds.len())
}

/// Trains on the stored train split; writes parameters and the loss curve.
pub fn train_stage(dir: &Path, cfg: &TrainConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let paths = RunPaths::new(dir);
    let ds = io::read_dataset(&paths.dataset())?;
    let out = train(&ds, cfg)?;
    io::write_params(&paths.params(), &out.params)?;
    io::write_loss_curve(&paths.loss(), &out.loss_curve)?;
    Ok(out.loss_curve)
}

/// Predicts every stored test sample; returns the test MSE.
pub fn predict_stage(dir: &Path) -> Result<f64> {
    let paths = RunPaths::new(dir);
    let ds = io::read_dataset(&paths.dataset())?;
    let params = io::read_params(&paths.params())?;
    if ds.test().is_empty() {
        return Err(PipelineError::Malformed("empty test split".into()));
    }
    if params.input_len() != ds.window_len() {
        return Err(PipelineError::Malformed(format!(
            "network expects {} inputs, dataset has window {}",
            params.input_len(),
            ds.window_len()
        )));
    }
    let preds = predict_series(&params, ds.test());
    let rows: Vec<PredictionRow> = ds
        .test()
        .iter()
        .zip(&preds)
        .map(|(s, &y_pred)| PredictionRow { t_index: s.t_index, y_true: s.y, y_pred })
        .collect();
    io::write_predictions(&paths.predictions(), &rows)?;
    let labels: Vec<f64> = ds.test().iter().map(|s| s.y).collect();
    Ok(mse(&preds, &labels)?)
}

/// Scores a column of a CSV (`y_pred`, or `y_true` when `on_truth`).
pub fn score_file(input: &Path, epsilon: f64, on_truth: bool) -> Result<RevivalReport> {
    let column = if on_truth { "y_true" } else { "y_pred" };
    let series = io::read_column(input, column)?;
    Ok(score_pipeline(&series, epsilon)?)
}

/// Scores the run's predictions and writes report and segments.
pub fn score_stage(dir: &Path, epsilon: f64) -> Result<RevivalReport> {
    let paths = RunPaths::new(dir);
    let report = score_file(&paths.predictions(), epsilon, false)?;
    io::write_report(&paths.report(), &paths.segments(), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSummary {
    pub channel: String,
    pub regime: Regime,
    pub clamp_events: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub final_train_mse: f64,
    pub test_mse: f64,
    pub n_rev: usize,
    pub n_eval: usize,
    pub score: f64,
    /// Same metric applied to the simulated labels, for comparison only.
    pub truth_n_rev: usize,
    pub truth_score: f64,
    pub min_eigenvalue: f64,
}

/// All five stages, chained through the run directory.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunSummary> {
    let traj = simulate_stage(cfg)?;
    let dir = cfg.output_dir.as_path();
    let n = dataset_stage(dir, cfg.window_len)?;
    let losses = train_stage(dir, &cfg.train)?;
    let test_mse = predict_stage(dir)?;
    let report = score_stage(dir, cfg.epsilon)?;
    let paths = RunPaths::new(dir);
    let truth = score_file(&paths.predictions(), cfg.epsilon, true)?;
    if cfg.emit_plots {
        write_prediction_plot(&paths, cfg, &report)?;
    }
    let summary = RunSummary {
        channel: cfg.channel.kind.name().into(),
        regime: cfg.channel.regime(),
        clamp_events: traj.meta.clamp_events,
        n_train: n / 2,
        n_test: n - n / 2,
        final_train_mse: *losses.last().expect("epochs >= 1"),
        test_mse,
        n_rev: report.n_rev,
        n_eval: report.n_eval,
        score: report.score,
        truth_n_rev: truth.n_rev,
        truth_score: truth.score,
        min_eigenvalue: traj.meta.physicality.min_eigenvalue,
    };
    io::write_json(&paths.summary(), &summary)?;
    Ok(summary)
}

fn write_prediction_plot(paths: &RunPaths, cfg: &RunConfig, report: &RevivalReport) -> Result<()> {
    let rows = io::read_predictions(&paths.predictions())?;
    let dt = cfg.grid.record_dt();
    let ts: Vec<f64> = rows.iter().map(|r| r.t_index as f64 * dt).collect();
    let title = format!(
        "{} ({}), test half: {} revivals / {}",
        cfg.channel.kind.name(),
        cfg.channel.regime().as_str(),
        report.n_rev,
        report.n_eval
    );
    let mut plot = LinePlot::new(&title, "t", "<Z_S>");
    plot.series.push(Series {
        label: "simulated".into(),
        xs: ts.clone(),
        ys: rows.iter().map(|r| r.y_true).collect(),
        color: "#d62728".into(),
        dashed: true,
    });
    plot.series.push(Series {
        label: "predicted".into(),
        xs: ts.clone(),
        ys: rows.iter().map(|r| r.y_pred).collect(),
        color: "#1f77b4".into(),
        dashed: false,
    });
    plot.markers.push(Markers {
        label: "revival peaks".into(),
        xs: report.segments.iter().map(|&(_, p)| ts[p]).collect(),
        ys: report.segments.iter().map(|&(_, p)| rows[p].y_pred).collect(),
        color: "#2ca02c".into(),
    });
    std::fs::write(paths.plot(), plot.render())
        .map_err(|e| PipelineError::Other(format!("{}: {e}", paths.plot().display())))
}

/// The two scored runs plus optional Markovian references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    pub ad: RunConfig,
    pub rtn: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ad_markovian: Option<RunConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtn_markovian: Option<RunConfig>,
}

impl PairConfig {
    /// Amplitude damping `(b, λ) = (0.05, 10)` and `(5, 1)` from the doubly
    /// excited state; RTN `(v, κ) = (1, 1/7)` and `(1, 4)` from `|+⟩|0⟩`.
    pub fn preset() -> Self {
        Self {
            ad: RunConfig::new(ChannelSpec::amplitude_damping(0.05, 10.0), InitialState::ExcitedExcited),
            rtn: RunConfig::new(ChannelSpec::rtn_dephasing(1.0, 1.0 / 7.0), InitialState::PlusExcited),
            ad_markovian: Some(RunConfig::new(
                ChannelSpec::amplitude_damping(5.0, 1.0),
                InitialState::ExcitedExcited,
            )),
            rtn_markovian: Some(RunConfig::new(
                ChannelSpec::rtn_dephasing(1.0, 4.0),
                InitialState::PlusExcited,
            )),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let pair: Self = read_config(path)?;
        pair.validate()?;
        Ok(pair)
    }

    pub fn runs(&self) -> Vec<(&'static str, &RunConfig)> {
        let mut out = vec![("ad", &self.ad), ("rtn", &self.rtn)];
        if let Some(c) = &self.ad_markovian {
            out.push(("ad_markovian", c));
        }
        if let Some(c) = &self.rtn_markovian {
            out.push(("rtn_markovian", c));
        }
        out
    }

    fn runs_mut(&mut self) -> Vec<&mut RunConfig> {
        let mut out = vec![&mut self.ad, &mut self.rtn];
        out.extend(self.ad_markovian.as_mut());
        out.extend(self.rtn_markovian.as_mut());
        out
    }

    /// Validates each run, then requires a shared grid, window and `ε`.
    pub fn validate(&self) -> Result<()> {
        for (_, c) in self.runs() {
            c.validate()?;
        }
        let base = &self.ad;
        for (name, c) in self.runs() {
            if c.grid != base.grid {
                return Err(PipelineError::Mismatch(format!("{name} grid differs from ad")));
            }
            if c.epsilon != base.epsilon {
                return Err(PipelineError::Mismatch(format!("{name} epsilon differs from ad")));
            }
            if c.window_len != base.window_len {
                return Err(PipelineError::Mismatch(format!("{name} window differs from ad")));
            }
        }
        Ok(())
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.runs_mut().into_iter().for_each(|c| c.train.seed = seed);
    }

    pub fn set_epsilon(&mut self, epsilon: f64) {
        self.runs_mut().into_iter().for_each(|c| c.epsilon = epsilon);
    }

    pub fn set_plots(&mut self, on: bool) {
        self.runs_mut().into_iter().for_each(|c| c.emit_plots = on);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Comparison {
    pub epsilon: f64,
    pub n_eval: usize,
    pub ad_score: f64,
    pub rtn_score: f64,
    /// `rtn_score / ad_score`; absent when the AD score is zero.
    pub ratio: Option<f64>,
    pub ad_n_rev: usize,
    pub rtn_n_rev: usize,
    pub ad_markovian_score: Option<f64>,
    pub rtn_markovian_score: Option<f64>,
    pub runs: Vec<(String, RunSummary)>,
}

/// Runs every pipeline of the pair under `out/<name>` and writes
/// `out/comparison.json`. Pipelines run concurrently.
pub fn run_all(pair: &PairConfig, out: &Path) -> Result<Comparison> {
    pair.validate()?;
    let jobs: Vec<(&'static str, RunConfig)> = pair
        .runs()
        .into_iter()
        .map(|(name, c)| (name, RunConfig { output_dir: out.join(name), ..c.clone() }))
        .collect();
    let results: Vec<(&'static str, Result<RunSummary>)> = std::thread::scope(|s| {
        let handles: Vec<_> =
            jobs.iter().map(|(name, c)| (*name, s.spawn(move || run_pipeline(c)))).collect();
        handles
            .into_iter()
            .map(|(name, h)| {
                let r = h
                    .join()
                    .unwrap_or_else(|_| Err(PipelineError::Other(format!("{name} pipeline panicked"))));
                (name, r)
            })
            .collect()
    });
    let mut runs = Vec::with_capacity(results.len());
    for (name, r) in results {
        runs.push((name.to_string(), r?));
    }
    let find = |n: &str| runs.iter().find(|(k, _)| k == n).map(|(_, s)| s.clone());
    let ad = find("ad").expect("ad run present");
    let rtn = find("rtn").expect("rtn run present");
    let cmp = Comparison {
        epsilon: pair.ad.epsilon,
        n_eval: ad.n_eval,
        ad_score: ad.score,
        rtn_score: rtn.score,
        ratio: (ad.score > 0.0).then(|| rtn.score / ad.score),
        ad_n_rev: ad.n_rev,
        rtn_n_rev: rtn.n_rev,
        ad_markovian_score: find("ad_markovian").map(|s| s.score),
        rtn_markovian_score: find("rtn_markovian").map(|s| s.score),
        runs,
    };
    io::write_json(&out.join("comparison.json"), &cmp)?;
    Ok(cmp)
}
