//! Command-line front end. Exit codes: 0 success, 2 configuration error,
//! 3 numerical or pipeline error.

pub mod config;
pub mod pipeline;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::features::CANONICAL_ORDERING;
use crate::io::{read_model, write_json, write_model, write_trajectory_csv};
use crate::types::LearnedOperator;
pub use config::{derived_seed, ExperimentConfig, Stage};
use pipeline::{relative, timed, Datasets, Layout};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "nldm", version, about = "Learn, predict and score time-delayed polynomial maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment config (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Model file to read (predict, evaluate, basin) instead of <out>/model.txt.
    #[arg(long, global = true, value_name = "PATH")]
    pub model: Option<PathBuf>,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Overrides `global_seed` in the config.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true, value_name = "N", env = "NLDM_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Integrate every train/test entry and write clean and noisy CSVs.
    Simulate,
    /// Fit the operator and write the model file and training metrics.
    Train,
    /// Write predicted trajectories for every test entry.
    Predict,
    /// Predict and score every test entry.
    Evaluate,
    /// Label a phase-space grid by the true flow and, with a model, by the operator.
    Basin,
    /// simulate, train, evaluate and basin in one go.
    Run,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Train => "train",
            Command::Predict => "predict",
            Command::Evaluate => "evaluate",
            Command::Basin => "basin",
            Command::Run => "run",
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_config() {
        EXIT_CONFIG
    } else {
        EXIT_NUMERICAL
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::config("--config", "a config file is required"))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.global_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    let threads = match cli.threads {
        Some(0) => return Err(Error::config("--threads", "must be >= 1")),
        Some(n) => n,
        None => rayon::current_num_threads(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config("--threads", e.to_string()))?;
    pool.install(|| Runner::new(&cfg, cli.model.clone(), threads).run(cli.command))
}

struct Runner<'a> {
    cfg: &'a ExperimentConfig,
    layout: Layout,
    model_path: Option<PathBuf>,
    threads: usize,
    timings: Vec<(String, f64)>,
    artifacts: Vec<PathBuf>,
}

impl<'a> Runner<'a> {
    fn new(cfg: &'a ExperimentConfig, model_path: Option<PathBuf>, threads: usize) -> Self {
        Self {
            cfg,
            layout: Layout::new(&cfg.output_dir),
            model_path,
            threads,
            timings: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    fn run(mut self, command: Command) -> Result<()> {
        if matches!(command, Command::Train | Command::Run) && self.cfg.train.is_empty() {
            return Err(Error::config("train", "at least one training entry is required"));
        }
        if matches!(command, Command::Predict | Command::Evaluate) && self.cfg.test.is_empty() {
            return Err(Error::config("test", "at least one test entry is required"));
        }
        if command == Command::Basin && self.cfg.basin.is_none() {
            return Err(Error::config("basin", "the `basin` section is required for this command"));
        }
        self.layout.create()?;

        match command {
            Command::Simulate => {
                self.simulate()?;
            }
            Command::Train => {
                let data = self.simulate()?;
                self.train(&data)?;
            }
            Command::Predict => {
                let op = self.load_model()?;
                let data = self.simulate()?;
                self.evaluate(&op, &data, false)?;
            }
            Command::Evaluate => {
                let op = self.load_model()?;
                let data = self.simulate()?;
                self.evaluate(&op, &data, true)?;
            }
            Command::Basin => {
                let op = match &self.model_path {
                    Some(p) => Some(read_model(p)?),
                    None => None,
                };
                self.basin(op.as_ref())?;
            }
            Command::Run => {
                let data = self.simulate()?;
                let op = self.train(&data)?;
                if !self.cfg.test.is_empty() {
                    self.evaluate(&op, &data, true)?;
                }
                if self.cfg.basin.is_some() {
                    self.basin(Some(&op))?;
                }
            }
        }
        self.write_manifest(command)
    }

    fn load_model(&self) -> Result<LearnedOperator> {
        let path = self.model_path.clone().unwrap_or_else(|| self.layout.model());
        if !path.exists() {
            return Err(Error::config(
                "--model",
                format!("{} does not exist; run `train` first or pass --model", path.display()),
            ));
        }
        read_model(&path)
    }

    fn simulate(&mut self) -> Result<Datasets> {
        let cfg = self.cfg;
        let data = timed(&mut self.timings, "simulate", || pipeline::generate(cfg))?;
        let written = pipeline::write_datasets(cfg, &data, &self.layout)?;
        self.artifacts.extend(written);
        Ok(data)
    }

    fn train(&mut self, data: &Datasets) -> Result<LearnedOperator> {
        let cfg = self.cfg;
        let result = timed(&mut self.timings, "train", || pipeline::train_stage(cfg, data))?;
        write_model(&self.layout.model(), &result.operator)?;
        write_json(&self.layout.train_metrics(), &pipeline::train_metrics_json(&result))?;
        self.artifacts.push(self.layout.model());
        self.artifacts.push(self.layout.train_metrics());
        log::info!("training mean RRMSE {:.3e}", result.mean_rrmse);
        Ok(result.operator)
    }

    fn evaluate(&mut self, op: &LearnedOperator, data: &Datasets, score: bool) -> Result<()> {
        let cfg = self.cfg;
        let stage = if score { "evaluate" } else { "predict" };
        let outcomes = timed(&mut self.timings, stage, || pipeline::evaluate_stage(cfg, op, data))?;
        for (i, o) in outcomes.iter().enumerate() {
            let path = self.layout.prediction(i);
            write_trajectory_csv(&path, &o.prediction.trajectory)?;
            self.artifacts.push(path);
        }
        if score {
            write_json(&self.layout.test_metrics(), &pipeline::test_metrics_json(cfg, data, &outcomes))?;
            self.artifacts.push(self.layout.test_metrics());
        }
        Ok(())
    }

    fn basin(&mut self, op: Option<&LearnedOperator>) -> Result<()> {
        let cfg = self.cfg;
        let outcome = timed(&mut self.timings, "basin", || pipeline::basin_stage(cfg, op))?;
        if let Some(a) = &outcome.agreement {
            log::info!("basin agreement {:.4} over {} cells", a.fraction_agree, a.compared);
        }
        let written = pipeline::write_basin(&outcome, &self.layout)?;
        self.artifacts.extend(written);
        Ok(())
    }

    fn write_manifest(&self, command: Command) -> Result<()> {
        let cfg = self.cfg;
        let mut seeds = Vec::new();
        for (stage, list) in [(Stage::Train, &cfg.train), (Stage::Test, &cfg.test)] {
            for i in 0..list.len() {
                if let Some(seed) = cfg.noise_seed(stage, i) {
                    seeds.push(json!({
                        "stage": stage.name(),
                        "index": i,
                        "seed": seed,
                        "explicit": list[i].noise.and_then(|n| n.seed).is_some(),
                    }));
                }
            }
        }
        let root = &self.layout.root;
        let mut artifacts: Vec<String> = self.artifacts.iter().map(|p| relative(root, p)).collect();
        artifacts.sort();
        artifacts.dedup();
        let timings: serde_json::Map<String, Value> =
            self.timings.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        let manifest = json!({
            "tool": "nldm",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command.name(),
            "config": serde_json::to_value(cfg).map_err(|e| Error::config("config", e.to_string()))?,
            "global_seed": cfg.global_seed,
            "noise_seeds": seeds,
            "feature_ordering": CANONICAL_ORDERING,
            "model_path": self.model_path.as_deref().map(Path::display).map(|d| d.to_string()),
            "threads": self.threads,
            "timings_seconds": timings,
            "artifacts": artifacts,
        });
        write_json(&self.layout.manifest(), &manifest)
    }
}
