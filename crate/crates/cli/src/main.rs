use std::path::{Path, PathBuf};
use std::process::ExitCode;

use backflow::dataset::DEFAULT_WINDOW;
use backflow::io;
use backflow::memory_metric::DEFAULT_EPSILON;
use backflow::mlp::TrainConfig;
use backflow::pipeline::{
    dataset_stage, predict_stage, run_all, score_file, simulate_stage, train_stage, PairConfig,
    PipelineError, RunConfig, RunPaths,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "backflow", version, about = "Simulate, learn and score system-ancilla memory effects")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory; overrides the configured output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides train.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the revival threshold.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Emit SVG figures.
    #[arg(long)]
    plots: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the configured state; write trajectory, metadata and rates.
    Simulate(Common),
    /// Window a stored trajectory into a supervised dataset.
    Dataset(Common),
    /// Train the network on the stored train split.
    Train(Common),
    /// Predict the stored test split.
    Predict(Common),
    /// Count revivals in a prediction series.
    Score {
        #[command(flatten)]
        common: Common,
        /// CSV to score (default: the run's predictions.csv).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Score the `y_true` column instead of `y_pred`.
        #[arg(long)]
        on_truth: bool,
    },
    /// Run every pipeline of a configuration pair and compare scores.
    RunAll {
        #[command(flatten)]
        common: Common,
        /// Use the built-in four-regime parameter sets instead of --config.
        #[arg(long)]
        preset: bool,
    },
}

fn load_run_config(c: &Common) -> Result<Option<RunConfig>, PipelineError> {
    let Some(path) = &c.config else { return Ok(None) };
    let mut cfg = RunConfig::load(path)?;
    if let Some(out) = &c.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = c.seed {
        cfg.train.seed = seed;
    }
    if let Some(eps) = c.epsilon {
        cfg.epsilon = eps;
    }
    cfg.emit_plots |= c.plots;
    cfg.validate()?;
    Ok(Some(cfg))
}

fn run_dir(c: &Common, cfg: Option<&RunConfig>) -> Result<PathBuf, PipelineError> {
    c.out
        .clone()
        .or_else(|| cfg.map(|c| c.output_dir.clone()))
        .ok_or_else(|| PipelineError::Config("need --out or --config".into()))
}

fn epsilon(c: &Common, cfg: Option<&RunConfig>) -> Result<f64, PipelineError> {
    let eps = c.epsilon.or(cfg.map(|c| c.epsilon)).unwrap_or(DEFAULT_EPSILON);
    if !(eps.is_finite() && eps > 0.0) {
        return Err(PipelineError::Config(format!("epsilon must be finite and > 0, got {eps}")));
    }
    Ok(eps)
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Simulate(c) => {
            let cfg = load_run_config(&c)?
                .ok_or_else(|| PipelineError::Config("simulate needs --config".into()))?;
            let traj = simulate_stage(&cfg)?;
            println!(
                "{} regime={} points={} clamp_events={} -> {}",
                cfg.channel.kind.name(),
                traj.meta.regime.as_str(),
                traj.len(),
                traj.meta.clamp_events,
                RunPaths::new(&cfg.output_dir).trajectory().display()
            );
        }
        Command::Dataset(c) => {
            let cfg = load_run_config(&c)?;
            let dir = run_dir(&c, cfg.as_ref())?;
            let window = cfg.as_ref().map_or(DEFAULT_WINDOW, |c| c.window_len);
            let n = dataset_stage(&dir, window)?;
            println!("{n} samples ({} train, {} test)", n / 2, n - n / 2);
        }
        Command::Train(c) => {
            let cfg = load_run_config(&c)?;
            let dir = run_dir(&c, cfg.as_ref())?;
            let mut tc = cfg.map_or_else(TrainConfig::default, |c| c.train);
            if let Some(seed) = c.seed {
                tc.seed = seed;
            }
            let losses = train_stage(&dir, &tc)?;
            println!("epochs={} final_train_mse={}", losses.len(), losses.last().unwrap_or(&f64::NAN));
        }
        Command::Predict(c) => {
            let cfg = load_run_config(&c)?;
            let dir = run_dir(&c, cfg.as_ref())?;
            let test_mse = predict_stage(&dir)?;
            println!("test_mse={test_mse}");
        }
        Command::Score { common: c, input, on_truth } => {
            let cfg = load_run_config(&c)?;
            let eps = epsilon(&c, cfg.as_ref())?;
            let dir = c.out.clone().or_else(|| cfg.as_ref().map(|c| c.output_dir.clone()));
            let input = match (&input, &dir) {
                (Some(p), _) => p.clone(),
                (None, Some(d)) => RunPaths::new(d).predictions(),
                (None, None) => return Err(PipelineError::Config("need --input or --out".into())),
            };
            let report = score_file(&input, eps, on_truth)?;
            if let Some(d) = dir {
                let paths = RunPaths::new(d);
                io::write_report(&paths.report(), &paths.segments(), &report)?;
            }
            print!("{}", io::json_string(&report).map_err(|e| PipelineError::Other(e.to_string()))?);
        }
        Command::RunAll { common: c, preset } => {
            let mut pair = match (&c.config, preset) {
                (Some(p), false) => PairConfig::load(p)?,
                (None, true) => PairConfig::preset(),
                _ => return Err(PipelineError::Config("give exactly one of --config or --preset".into())),
            };
            if let Some(seed) = c.seed {
                pair.set_seed(seed);
            }
            if let Some(eps) = c.epsilon {
                pair.set_epsilon(eps);
            }
            if c.plots {
                pair.set_plots(true);
            }
            let out = c.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            let cmp = run_all(&pair, &out)?;
            for (name, s) in &cmp.runs {
                println!(
                    "{name:<14} {:<13} n_rev={:<3} score={:.4} test_mse={:.3e} truth_n_rev={}",
                    s.regime.as_str(),
                    s.n_rev,
                    s.score,
                    s.test_mse,
                    s.truth_n_rev
                );
            }
            match cmp.ratio {
                Some(r) => println!("rtn/ad ratio = {r:.3}"),
                None => println!("rtn/ad ratio undefined (ad score is zero)"),
            }
            println!("-> {}", Path::new(&out).join("comparison.json").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
