//! Stages shared by the CLI verbs. Each stage is a plain function over an
//! [`ExperimentConfig`] so runs can also be scripted from Rust.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Value};

use super::config::{ExperimentConfig, SeriesConfig, Stage};
use crate::basin::{grid_agreement, ground_truth_grid, operator_grid, Agreement, BasinGrid};
use crate::error::{Error, Result};
use crate::identify::{train_data, TrainingData, TrainingResult};
use crate::io::{json_number, read_trajectory_csv, write_basin_csv, write_json, write_trajectory_csv};
use crate::metrics::{rrmse, SkillScore};
use crate::odes::{add_noise, integrate};
use crate::predict::{predict_like_with_threshold, Prediction};
use crate::types::{same_dt, LearnedOperator, Provenance, Trajectory};

/// An observed series and the clean series it is scored against.
#[derive(Debug, Clone)]
pub struct Series {
    pub observed: Trajectory,
    pub clean: Option<Trajectory>,
    pub noise_seed: Option<u64>,
}

impl Series {
    pub fn reference(&self) -> &Trajectory {
        self.clean.as_ref().unwrap_or(&self.observed)
    }

    fn training_data(&self) -> TrainingData {
        match &self.clean {
            Some(c) => TrainingData::with_reference(self.observed.clone(), c.clone()),
            None => TrainingData::clean(self.observed.clone()),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Datasets {
    pub train: Vec<Series>,
    pub test: Vec<Series>,
}

fn build_series(cfg: &ExperimentConfig, stage: Stage, index: usize, entry: &SeriesConfig) -> Result<Series> {
    if let Some(path) = &entry.file {
        let observed = read_trajectory_csv(path, Provenance::Clean)?;
        let clean = entry
            .reference
            .as_deref()
            .map(|p| read_trajectory_csv(p, Provenance::Clean))
            .transpose()?;
        return Ok(Series {
            observed,
            clean,
            noise_seed: None,
        });
    }
    let sys = cfg.system()?;
    let ic = entry.ic.as_deref().unwrap_or_default();
    let [t0, tf] = entry.t_span.unwrap_or_default();
    let k = entry.num_samples.unwrap_or_default();
    let clean = integrate(&sys, ic, (t0, tf), k, &cfg.integrator)?;
    let noise_seed = cfg.noise_seed(stage, index);
    let observed = match (entry.noise, noise_seed) {
        (Some(noise), Some(seed)) => add_noise(&clean, noise.sigma_pct, seed),
        _ => clean.clone(),
    };
    Ok(Series {
        observed,
        clean: Some(clean),
        noise_seed,
    })
}

fn build_list(cfg: &ExperimentConfig, stage: Stage) -> Result<Vec<Series>> {
    let entries = match stage {
        Stage::Train => &cfg.train,
        Stage::Test => &cfg.test,
    };
    entries
        .par_iter()
        .enumerate()
        .map(|(i, e)| build_series(cfg, stage, i, e))
        .collect()
}

/// Integrates (or loads) every train and test entry and applies noise.
pub fn generate(cfg: &ExperimentConfig) -> Result<Datasets> {
    Ok(Datasets {
        train: build_list(cfg, Stage::Train)?,
        test: build_list(cfg, Stage::Test)?,
    })
}

/// Paths of every artifact inside one output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn create(&self) -> Result<()> {
        for dir in [self.root.clone(), self.root.join("trajectories"), self.root.join("predictions"), self.root.join("basin")] {
            fs::create_dir_all(&dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        }
        Ok(())
    }

    pub fn series(&self, stage: Stage, index: usize, variant: &str) -> PathBuf {
        self.root
            .join("trajectories")
            .join(format!("{}_{index:02}_{variant}.csv", stage.name()))
    }

    pub fn prediction(&self, index: usize) -> PathBuf {
        self.root.join("predictions").join(format!("test_{index:02}_predicted.csv"))
    }

    pub fn model(&self) -> PathBuf {
        self.root.join("model.txt")
    }

    pub fn train_metrics(&self) -> PathBuf {
        self.root.join("train_metrics.json")
    }

    pub fn test_metrics(&self) -> PathBuf {
        self.root.join("test_metrics.json")
    }

    pub fn basin_truth(&self) -> PathBuf {
        self.root.join("basin").join("truth.csv")
    }

    pub fn basin_operator(&self) -> PathBuf {
        self.root.join("basin").join("operator.csv")
    }

    pub fn basin_agreement(&self) -> PathBuf {
        self.root.join("basin").join("agreement.json")
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }
}

/// Writes clean and noisy CSVs for every generated entry.
pub fn write_datasets(cfg: &ExperimentConfig, data: &Datasets, layout: &Layout) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (stage, list, entries) in [
        (Stage::Train, &data.train, &cfg.train),
        (Stage::Test, &data.test, &cfg.test),
    ] {
        for (i, (series, entry)) in list.iter().zip(entries).enumerate() {
            if entry.file.is_some() {
                continue;
            }
            let clean = layout.series(stage, i, "clean");
            let noisy = layout.series(stage, i, "noisy");
            write_trajectory_csv(&clean, series.reference())?;
            write_trajectory_csv(&noisy, &series.observed)?;
            written.push(clean);
            written.push(noisy);
        }
    }
    Ok(written)
}

pub fn train_stage(cfg: &ExperimentConfig, data: &Datasets) -> Result<TrainingResult> {
    if data.train.is_empty() {
        return Err(Error::config("train", "at least one training entry is required"));
    }
    let items: Vec<TrainingData> = data.train.iter().map(Series::training_data).collect();
    train_data(&items, cfg.feature_config()?)
}

pub fn train_metrics_json(result: &TrainingResult) -> Value {
    let s = &result.operator.summary;
    json!({
        "num_trajectories": s.num_trajectories,
        "total_columns": s.total_columns,
        "effective_rank": s.effective_rank,
        "underdetermined": s.underdetermined,
        "residual_frobenius": json_number(s.residual_frobenius),
        "per_trajectory_rrmse": result.per_trajectory_rrmse.iter().map(|&v| json_number(v)).collect::<Vec<_>>(),
        "diverged": result.per_trajectory_rrmse.iter().map(|v| v.is_nan()).collect::<Vec<_>>(),
        "mean_rrmse": json_number(result.mean_rrmse),
        "elapsed_seconds": result.elapsed_seconds,
    })
}

/// Prediction and score for one test entry.
#[derive(Debug, Clone)]
pub struct TestOutcome {
    pub prediction: Prediction,
    pub score: SkillScore,
    /// Why the score is NaN when it is not due to divergence.
    pub note: Option<String>,
}

impl TestOutcome {
    pub fn mean_rrmse(&self) -> f64 {
        self.score.mean_rrmse
    }
}

/// Seeds each test prediction from the first `d` observed states and scores
/// it against the clean series.
pub fn evaluate_stage(cfg: &ExperimentConfig, op: &LearnedOperator, data: &Datasets) -> Result<Vec<TestOutcome>> {
    let s = cfg.system.id.state_dim();
    if op.config().states() != s {
        return Err(Error::Dimension(format!(
            "model has S={}, system `{}` has S={s}",
            op.config().states(),
            cfg.system.id
        )));
    }
    let d = op.config().delay();
    data.test
        .par_iter()
        .enumerate()
        .map(|(i, series)| {
            if !same_dt(series.observed.dt(), op.dt()) {
                log::warn!(
                    "test[{i}] is sampled at dt={} but the model was trained at dt={}",
                    series.observed.dt(),
                    op.dt()
                );
            }
            let prediction = predict_like_with_threshold(op, &series.observed, cfg.divergence_threshold)?;
            let (score, note) = match rrmse(&prediction.trajectory, series.reference(), d) {
                Ok(score) => (score, None),
                Err(e @ (Error::UndefinedScore { .. } | Error::TooShort { .. })) => {
                    log::warn!("test[{i}]: {e}");
                    let score = SkillScore {
                        per_state_rrmse: vec![f64::NAN; s],
                        mean_rrmse: f64::NAN,
                        compared_points: 0,
                    };
                    (score, Some(e.to_string()))
                }
                Err(e) => return Err(e),
            };
            Ok(TestOutcome {
                prediction,
                score,
                note,
            })
        })
        .collect()
}

pub fn test_metrics_json(cfg: &ExperimentConfig, data: &Datasets, outcomes: &[TestOutcome]) -> Value {
    let tests: Vec<Value> = outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| {
            json!({
                "index": i,
                "ic": data.test[i].reference().state(0),
                "noise_seed": cfg.noise_seed(Stage::Test, i),
                "per_state_rrmse": o.score.per_state_rrmse.iter().map(|&v| json_number(v)).collect::<Vec<_>>(),
                "mean_rrmse": json_number(o.score.mean_rrmse),
                "diverged": o.prediction.diverged(),
                "diverged_at": o.prediction.diverged_at,
                "compared_points": o.score.compared_points,
                "note": o.note,
            })
        })
        .collect();
    let mean = outcomes.iter().map(TestOutcome::mean_rrmse).sum::<f64>() / outcomes.len().max(1) as f64;
    json!({
        "tests": tests,
        "mean_rrmse": json_number(mean),
        "num_diverged": outcomes.iter().filter(|o| o.prediction.diverged()).count(),
    })
}

#[derive(Debug, Clone)]
pub struct BasinOutcome {
    pub truth: BasinGrid,
    pub operator: Option<BasinGrid>,
    pub agreement: Option<Agreement>,
}

pub fn basin_stage(cfg: &ExperimentConfig, op: Option<&LearnedOperator>) -> Result<BasinOutcome> {
    let b = cfg
        .basin
        .as_ref()
        .ok_or_else(|| Error::config("basin", "the `basin` section is required for this command"))?;
    let sys = cfg.system()?;
    let window = b.window(sys.state_dim());
    let truth = ground_truth_grid(&sys, &window, b.resolution, b.horizon, b.truth_samples, b.rule(), &cfg.integrator)?;
    let (operator, agreement) = match op {
        Some(op) => {
            let grid = operator_grid(op, &sys, &window, b.resolution, b.steps, b.rule())?;
            let agreement = grid_agreement(&truth, &grid)?;
            (Some(grid), Some(agreement))
        }
        None => (None, None),
    };
    Ok(BasinOutcome {
        truth,
        operator,
        agreement,
    })
}

pub fn write_basin(outcome: &BasinOutcome, layout: &Layout) -> Result<Vec<PathBuf>> {
    let mut written = vec![layout.basin_truth()];
    write_basin_csv(&layout.basin_truth(), &outcome.truth)?;
    if let Some(grid) = &outcome.operator {
        write_basin_csv(&layout.basin_operator(), grid)?;
        written.push(layout.basin_operator());
    }
    let counts = |g: &BasinGrid| {
        let mut m = serde_json::Map::new();
        for (label, name) in label_names(g) {
            m.insert(name, json!(g.count(label)));
        }
        Value::Object(m)
    };
    let mut summary = json!({
        "resolution": outcome.truth.resolution,
        "truth_counts": counts(&outcome.truth),
        "truth_source": outcome.truth.source,
    });
    if let (Some(grid), Some(a)) = (&outcome.operator, &outcome.agreement) {
        summary["operator_counts"] = counts(grid);
        summary["operator_source"] = serde_json::to_value(&grid.source).unwrap_or(Value::Null);
        summary["operator_seeding"] = json!("grid point replicated d times");
        summary["fraction_agree"] = json_number(a.fraction_agree);
        summary["compared"] = json!(a.compared);
        summary["both_unresolved"] = json!(a.both_unresolved);
        summary["confusion"] = serde_json::to_value(&a.confusion).unwrap_or(Value::Null);
    }
    write_json(&layout.basin_agreement(), &summary)?;
    written.push(layout.basin_agreement());
    Ok(written)
}

fn label_names(g: &BasinGrid) -> Vec<(crate::basin::CellLabel, String)> {
    use crate::basin::CellLabel;
    let mut out: Vec<(CellLabel, String)> = (0..g.attractors.len())
        .map(|i| (CellLabel::Attractor(i), g.attractors[i].clone()))
        .collect();
    out.push((CellLabel::Unresolved, "unresolved".into()));
    out.push((CellLabel::Diverged, "diverged".into()));
    out
}

/// Wall-clock timer for manifest entries.
pub fn timed<T>(timings: &mut Vec<(String, f64)>, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f();
    timings.push((stage.to_string(), start.elapsed().as_secs_f64()));
    out
}

pub fn relative(root: &Path, path: &Path) -> String {
    path.strip_prefix(root).unwrap_or(path).display().to_string()
}
