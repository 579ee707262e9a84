//! Experiment configuration: one TOML file fully determines a run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basin::{BasinWindow, CaptureRule};
use crate::error::{Error, Result};
use crate::odes::{BenchmarkSystem, IntegratorSettings, SystemId};
use crate::predict::DEFAULT_DIVERGENCE_THRESHOLD;
use crate::types::{same_dt, FeatureConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub global_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_threshold")]
    pub divergence_threshold: f64,
    pub system: SystemConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub integrator: IntegratorSettings,
    #[serde(default)]
    pub train: Vec<SeriesConfig>,
    #[serde(default)]
    pub test: Vec<SeriesConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basin: Option<BasinConfig>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_threshold() -> f64 {
    DEFAULT_DIVERGENCE_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub id: SystemId,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub delay: usize,
    pub degree: usize,
}

/// One trajectory: integrated from `ic` over `t_span`, or loaded from `file`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ic: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_span: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    /// Observed series in the trajectory CSV format.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    /// Clean series to score `file` against; defaults to `file` itself.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<PathBuf>,
}

impl SeriesConfig {
    pub fn generated(ic: Vec<f64>, t_span: [f64; 2], num_samples: usize) -> Self {
        Self {
            ic: Some(ic),
            t_span: Some(t_span),
            num_samples: Some(num_samples),
            ..Self::default()
        }
    }

    pub fn with_noise(mut self, sigma_pct: f64, seed: Option<u64>) -> Self {
        self.noise = Some(NoiseConfig { sigma_pct, seed });
        self
    }

    /// Sampling interval implied by `t_span` and `num_samples`.
    pub fn dt(&self) -> Option<f64> {
        match (self.t_span, self.num_samples) {
            (Some([t0, tf]), Some(k)) if k >= 2 => Some((tf - t0) / (k - 1) as f64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub sigma_pct: f64,
    /// Derived from `global_seed` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasinConfig {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub resolution: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_persist")]
    pub persist: usize,
    /// Integration horizon for the truth grid.
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_truth_samples")]
    pub truth_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axes: Option<[usize; 2]>,
    /// Values of the state channels not on the plotted axes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<Vec<f64>>,
}

fn default_steps() -> usize {
    1000
}
fn default_tol() -> f64 {
    CaptureRule::default().tol
}
fn default_persist() -> usize {
    CaptureRule::default().persist
}
fn default_horizon() -> f64 {
    30.0
}
fn default_truth_samples() -> usize {
    3001
}

impl BasinConfig {
    pub fn window(&self, state_dim: usize) -> BasinWindow {
        let mut w = BasinWindow::planar(
            (self.x_range[0], self.x_range[1]),
            (self.y_range[0], self.y_range[1]),
        );
        if let Some([a, b]) = self.axes {
            w.axes = (a, b);
        }
        w.base = self.base.clone().unwrap_or_else(|| vec![0.0; state_dim]);
        w
    }

    pub fn rule(&self) -> CaptureRule {
        CaptureRule {
            tol: self.tol,
            persist: self.persist,
        }
    }
}

/// Which list a series belongs to; part of the seed derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Train,
    Test,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Train => "train",
            Stage::Test => "test",
        }
    }
}

/// Seed for entry `index` of `stage`: the first word of the ChaCha8 stream
/// `(stage, index)` keyed by `global_seed`. Adding entries never shifts the
/// seeds of existing ones.
pub fn derived_seed(global_seed: u64, stage: Stage, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(global_seed);
    let tag: u64 = match stage {
        Stage::Train => 1,
        Stage::Test => 2,
    };
    rng.set_stream((tag << 32) | index as u64);
    rng.next_u64()
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|s| format!("bytes {}..{}", s.start, s.end))
                .unwrap_or_else(|| "config".into());
            Error::config(field, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config { field, message } => Error::Config {
                field: format!("{}: {field}", path.display()),
                message,
            },
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("config", e.to_string()))
    }

    pub fn feature_config(&self) -> Result<FeatureConfig> {
        FeatureConfig::new(self.system.id.state_dim(), self.model.delay, self.model.degree)
            .map_err(|e| Error::config("model", e.to_string()))
    }

    pub fn system(&self) -> Result<BenchmarkSystem> {
        let mut sys = BenchmarkSystem::new(self.system.id);
        for (name, &value) in &self.system.params {
            sys = sys
                .with_param(name, value)
                .map_err(|e| Error::config(format!("system.params.{name}"), e.to_string()))?;
        }
        Ok(sys)
    }

    /// Noise seed actually used for an entry.
    pub fn noise_seed(&self, stage: Stage, index: usize) -> Option<u64> {
        let entries = match stage {
            Stage::Train => &self.train,
            Stage::Test => &self.test,
        };
        let noise = entries.get(index)?.noise?;
        Some(noise.seed.unwrap_or_else(|| derived_seed(self.global_seed, stage, index)))
    }

    pub fn validate(&self) -> Result<()> {
        if self.model.delay < 1 {
            return Err(Error::config("model.delay", "must be >= 1"));
        }
        if self.model.degree < 1 {
            return Err(Error::config("model.degree", "must be >= 1"));
        }
        self.feature_config()?;
        self.system()?;
        if !(self.divergence_threshold > 0.0) {
            return Err(Error::config("divergence_threshold", "must be positive"));
        }
        self.integrator
            .validate()
            .map_err(|e| Error::config("integrator", e.to_string()))?;

        let s = self.system.id.state_dim();
        let mut dt_seen: Option<(String, f64)> = None;
        for (stage, list) in [(Stage::Train, &self.train), (Stage::Test, &self.test)] {
            for (i, entry) in list.iter().enumerate() {
                let at = format!("{}[{i}]", stage.name());
                self.validate_series(entry, &at, s)?;
                if let Some(dt) = entry.dt() {
                    match &dt_seen {
                        Some((first, dt0)) if !same_dt(*dt0, dt) => {
                            return Err(Error::config(
                                &at,
                                format!("implied dt {dt} differs from {first} (dt {dt0}); sampling must be uniform"),
                            ));
                        }
                        None => dt_seen = Some((at.clone(), dt)),
                        _ => {}
                    }
                }
            }
        }

        if let Some(b) = &self.basin {
            self.validate_basin(b, s)?;
        }
        Ok(())
    }

    fn validate_series(&self, entry: &SeriesConfig, at: &str, s: usize) -> Result<()> {
        let generated = entry.ic.is_some() || entry.t_span.is_some() || entry.num_samples.is_some();
        match (&entry.file, generated) {
            (Some(_), true) => {
                return Err(Error::config(at, "give either `file` or `ic`/`t_span`/`num_samples`, not both"));
            }
            (None, false) => {
                return Err(Error::config(at, "needs `ic`, `t_span` and `num_samples` (or `file`)"));
            }
            (None, true) => {
                let ic = entry
                    .ic
                    .as_ref()
                    .ok_or_else(|| Error::config(format!("{at}.ic"), "missing"))?;
                if ic.len() != s {
                    return Err(Error::config(
                        format!("{at}.ic"),
                        format!("has {} values, system `{}` has {s} states", ic.len(), self.system.id),
                    ));
                }
                if ic.iter().any(|v| !v.is_finite()) {
                    return Err(Error::config(format!("{at}.ic"), "must be finite"));
                }
                let [t0, tf] = entry
                    .t_span
                    .ok_or_else(|| Error::config(format!("{at}.t_span"), "missing"))?;
                if !(t0.is_finite() && tf.is_finite() && tf > t0) {
                    return Err(Error::config(
                        format!("{at}.t_span"),
                        format!("needs finite t0 < tf, got [{t0}, {tf}]"),
                    ));
                }
                let k = entry
                    .num_samples
                    .ok_or_else(|| Error::config(format!("{at}.num_samples"), "missing"))?;
                if k <= self.model.delay || k < 2 {
                    return Err(Error::config(
                        format!("{at}.num_samples"),
                        format!("must exceed the delay d={} (and be >= 2), got {k}", self.model.delay),
                    ));
                }
            }
            (Some(_), false) => {}
        }
        if entry.reference.is_some() && entry.file.is_none() {
            return Err(Error::config(format!("{at}.reference"), "only valid together with `file`"));
        }
        if let Some(noise) = entry.noise {
            if !(noise.sigma_pct.is_finite() && noise.sigma_pct >= 0.0) {
                return Err(Error::config(format!("{at}.noise.sigma_pct"), "must be >= 0"));
            }
            if entry.file.is_some() {
                return Err(Error::config(format!("{at}.noise"), "not applied to loaded files"));
            }
        }
        Ok(())
    }

    fn validate_basin(&self, b: &BasinConfig, s: usize) -> Result<()> {
        if b.resolution < 2 {
            return Err(Error::config("basin.resolution", format!("must be >= 2, got {}", b.resolution)));
        }
        for (name, [lo, hi]) in [("basin.x_range", b.x_range), ("basin.y_range", b.y_range)] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::config(name, format!("needs finite lo < hi, got [{lo}, {hi}]")));
            }
        }
        if b.steps == 0 {
            return Err(Error::config("basin.steps", "must be >= 1"));
        }
        if !(b.tol > 0.0) {
            return Err(Error::config("basin.tol", "must be positive"));
        }
        if b.persist == 0 {
            return Err(Error::config("basin.persist", "must be >= 1"));
        }
        if !(b.horizon > 0.0) || b.truth_samples < 2 {
            return Err(Error::config("basin.horizon", "needs a positive horizon and truth_samples >= 2"));
        }
        if let Some([a, c]) = b.axes {
            if a >= s || c >= s || a == c {
                return Err(Error::config("basin.axes", format!("need two distinct channels below {s}")));
            }
        }
        if let Some(base) = &b.base {
            if base.len() != s {
                return Err(Error::config("basin.base", format!("needs {s} values")));
            }
        }
        if self.system()?.attractors().is_empty() {
            return Err(Error::config(
                "basin",
                format!("system `{}` has no catalogued attractors to label cells with", self.system.id),
            ));
        }
        Ok(())
    }
}
