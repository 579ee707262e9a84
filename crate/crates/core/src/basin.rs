//! Basins of attraction on a rectangular grid, either from the true flow or
//! by iterating a learned operator, plus cellwise agreement between grids.

use std::collections::BTreeMap;
use std::ops::ControlFlow;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::odes::{integrate_with, Attractor, AttractorKind, BenchmarkSystem, IntegratorSettings};
use crate::predict::{Stepper, DEFAULT_DIVERGENCE_THRESHOLD};
use crate::types::LearnedOperator;

/// A planar window through phase space. For systems with more than two
/// states the remaining coordinates are held at `base`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasinWindow {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    /// State indices plotted on the x and y axes.
    pub axes: (usize, usize),
    /// Full-dimensional state supplying the coordinates off the plane.
    pub base: Vec<f64>,
}

impl BasinWindow {
    pub fn planar(x_range: (f64, f64), y_range: (f64, f64)) -> Self {
        Self {
            x_range,
            y_range,
            axes: (0, 1),
            base: vec![0.0, 0.0],
        }
    }

    pub fn square(half_width: f64) -> Self {
        Self::planar((-half_width, half_width), (-half_width, half_width))
    }

    fn validate(&self, states: usize) -> Result<()> {
        let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo < hi;
        if !ok(self.x_range) || !ok(self.y_range) {
            return Err(Error::InvalidArgument("basin window ranges must satisfy lo < hi".into()));
        }
        if self.base.len() != states {
            return Err(Error::Dimension(format!(
                "window base has {} coordinates, system has S={states}",
                self.base.len()
            )));
        }
        let (a, b) = self.axes;
        if a == b || a >= states || b >= states {
            return Err(Error::InvalidArgument(format!(
                "window axes {:?} are not two distinct states of {states}",
                self.axes
            )));
        }
        Ok(())
    }

    /// Coordinate of grid index `i` along an axis with `n` points.
    fn coord((lo, hi): (f64, f64), i: usize, n: usize) -> f64 {
        lo + (hi - lo) * (i as f64 / (n - 1) as f64)
    }

    fn state_at(&self, ix: usize, iy: usize, n: usize) -> Vec<f64> {
        let mut x = self.base.clone();
        x[self.axes.0] = Self::coord(self.x_range, ix, n);
        x[self.axes.1] = Self::coord(self.y_range, iy, n);
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellLabel {
    /// Index into [`BasinGrid::attractors`].
    Attractor(usize),
    Unresolved,
    Diverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaptureRule {
    /// Distance (state units) that counts as "at" an attractor.
    pub tol: f64,
    /// Consecutive samples the capture must hold.
    pub persist: usize,
}

impl Default for CaptureRule {
    fn default() -> Self {
        Self {
            tol: 0.05,
            persist: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridSource {
    Integrator { horizon: f64, samples: usize },
    /// Each grid point is replicated `delay` times to seed the prediction.
    Operator { steps: usize, delay: usize, degree: usize, dt: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasinGrid {
    pub window: BasinWindow,
    pub resolution: usize,
    pub attractors: Vec<String>,
    /// Row-major with y outermost: cell `(ix, iy)` is `labels[iy * n + ix]`.
    pub labels: Vec<CellLabel>,
    pub source: GridSource,
}

impl BasinGrid {
    pub fn label(&self, ix: usize, iy: usize) -> CellLabel {
        self.labels[iy * self.resolution + ix]
    }

    pub fn point(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            BasinWindow::coord(self.window.x_range, ix, self.resolution),
            BasinWindow::coord(self.window.y_range, iy, self.resolution),
        )
    }

    pub fn label_name(&self, label: CellLabel) -> &str {
        match label {
            CellLabel::Attractor(i) => &self.attractors[i],
            CellLabel::Unresolved => "unresolved",
            CellLabel::Diverged => "diverged",
        }
    }

    /// `(x, y, label)` for every cell in storage order.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, CellLabel)> + '_ {
        let n = self.resolution;
        (0..n * n).map(move |c| {
            let (x, y) = self.point(c % n, c / n);
            (x, y, self.labels[c])
        })
    }

    pub fn count(&self, label: CellLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

/// Tracks how long a trajectory has stayed near each attractor.
struct Classifier<'a> {
    attractors: &'a [Attractor],
    rule: CaptureRule,
    needed: Vec<usize>,
    streak: Vec<usize>,
}

impl<'a> Classifier<'a> {
    /// A cycle must hold its radius band for a full period at step `dt`.
    fn new(attractors: &'a [Attractor], rule: CaptureRule, dt: f64) -> Self {
        let needed = attractors
            .iter()
            .map(|a| match a.kind {
                AttractorKind::Point(_) => rule.persist.max(1),
                AttractorKind::Cycle { period, .. } => {
                    rule.persist.max((period / dt).ceil() as usize).max(1)
                }
            })
            .collect();
        Self {
            attractors,
            rule,
            needed,
            streak: vec![0; attractors.len()],
        }
    }

    fn observe(&mut self, x: &[f64]) -> Option<usize> {
        for (i, a) in self.attractors.iter().enumerate() {
            if near(a, x, self.rule.tol) {
                self.streak[i] += 1;
                if self.streak[i] >= self.needed[i] {
                    return Some(i);
                }
            } else {
                self.streak[i] = 0;
            }
        }
        None
    }
}

fn near(a: &Attractor, x: &[f64], tol: f64) -> bool {
    match &a.kind {
        AttractorKind::Point(p) => {
            p.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() <= tol
        }
        AttractorKind::Cycle {
            radius,
            axes,
            height,
            ..
        } => {
            let r = x[axes.0].hypot(x[axes.1]);
            let on_height = height.map_or(true, |(i, h)| (x[i] - h).abs() <= tol);
            (r - radius).abs() <= tol && on_height
        }
    }
}

fn check_common(sys: &BenchmarkSystem, window: &BasinWindow, resolution: usize) -> Result<Vec<Attractor>> {
    if resolution < 2 {
        return Err(Error::InvalidArgument(format!(
            "basin resolution must be >= 2, got {resolution}"
        )));
    }
    window.validate(sys.state_dim())?;
    let attractors = sys.attractors();
    if attractors.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "system `{}` has no catalogued attractor to classify against",
            sys.id()
        )));
    }
    Ok(attractors)
}

/// Labels each grid point by integrating the true flow for `horizon` time
/// units, sampled at `samples` points.
pub fn ground_truth_grid(
    sys: &BenchmarkSystem,
    window: &BasinWindow,
    resolution: usize,
    horizon: f64,
    samples: usize,
    rule: CaptureRule,
    settings: &IntegratorSettings,
) -> Result<BasinGrid> {
    let attractors = check_common(sys, window, resolution)?;
    if !(horizon > 0.0) || samples < 2 {
        return Err(Error::InvalidArgument(
            "truth grid needs a positive horizon and at least 2 samples".into(),
        ));
    }
    settings.validate()?;
    let dt = horizon / (samples - 1) as f64;
    let n = resolution;
    let labels = (0..n * n)
        .into_par_iter()
        .map(|c| {
            let ic = window.state_at(c % n, c / n, n);
            truth_cell(sys, &attractors, &ic, horizon, samples, dt, rule, settings)
        })
        .collect();
    Ok(BasinGrid {
        window: window.clone(),
        resolution,
        attractors: attractors.into_iter().map(|a| a.name).collect(),
        labels,
        source: GridSource::Integrator { horizon, samples },
    })
}

#[allow(clippy::too_many_arguments)]
fn truth_cell(
    sys: &BenchmarkSystem,
    attractors: &[Attractor],
    ic: &[f64],
    horizon: f64,
    samples: usize,
    dt: f64,
    rule: CaptureRule,
    settings: &IntegratorSettings,
) -> CellLabel {
    let mut classifier = Classifier::new(attractors, rule, dt);
    let mut label = CellLabel::Unresolved;
    let run = integrate_with(
        |x, dx| sys.rhs(x, dx),
        ic,
        (0.0, horizon),
        samples,
        settings,
        |_, x| {
            if x.iter().any(|v| !v.is_finite() || v.abs() > DEFAULT_DIVERGENCE_THRESHOLD) {
                label = CellLabel::Diverged;
                return ControlFlow::Break(());
            }
            match classifier.observe(x) {
                Some(i) => {
                    label = CellLabel::Attractor(i);
                    ControlFlow::Break(())
                }
                None => ControlFlow::Continue(()),
            }
        },
    );
    match run {
        Ok(_) => label,
        Err(e) => {
            log::debug!("truth cell at {ic:?} failed: {e}");
            CellLabel::Diverged
        }
    }
}

/// Labels each grid point by iterating `op` for `steps` steps from the point
/// repeated `d` times.
pub fn operator_grid(
    op: &LearnedOperator,
    sys: &BenchmarkSystem,
    window: &BasinWindow,
    resolution: usize,
    steps: usize,
    rule: CaptureRule,
) -> Result<BasinGrid> {
    let attractors = check_common(sys, window, resolution)?;
    if op.config().states() != sys.state_dim() {
        return Err(Error::Dimension(format!(
            "operator has S={}, system `{}` has S={}",
            op.config().states(),
            sys.id(),
            sys.state_dim()
        )));
    }
    let n = resolution;
    let labels = (0..n * n)
        .into_par_iter()
        .map(|c| operator_cell(op, &attractors, &window.state_at(c % n, c / n, n), steps, rule))
        .collect();
    Ok(BasinGrid {
        window: window.clone(),
        resolution,
        attractors: attractors.into_iter().map(|a| a.name).collect(),
        labels,
        source: GridSource::Operator {
            steps,
            delay: op.config().delay(),
            degree: op.config().degree(),
            dt: op.dt(),
        },
    })
}

/// Classifies a single initial point under the learned operator.
pub fn operator_cell(
    op: &LearnedOperator,
    attractors: &[Attractor],
    point: &[f64],
    steps: usize,
    rule: CaptureRule,
) -> CellLabel {
    let seeds = point.repeat(op.config().delay());
    let mut stepper = match Stepper::new(op, &seeds) {
        Ok(s) => s,
        Err(_) => return CellLabel::Diverged,
    };
    let mut classifier = Classifier::new(attractors, rule, op.dt());
    for _ in 0..steps {
        let x = stepper.step();
        if x.iter().any(|v| !v.is_finite() || v.abs() > DEFAULT_DIVERGENCE_THRESHOLD) {
            return CellLabel::Diverged;
        }
        if let Some(i) = classifier.observe(x) {
            return CellLabel::Attractor(i);
        }
    }
    CellLabel::Unresolved
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionEntry {
    pub a: String,
    pub b: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Agreement {
    /// Matching cells over compared cells; 1.0 when nothing was compared.
    pub fraction_agree: f64,
    pub compared: usize,
    /// Cells skipped because both grids left them unresolved.
    pub both_unresolved: usize,
    pub confusion: Vec<ConfusionEntry>,
}

/// Cellwise label agreement, skipping cells unresolved in both grids.
pub fn grid_agreement(a: &BasinGrid, b: &BasinGrid) -> Result<Agreement> {
    if a.resolution != b.resolution
        || a.window.x_range != b.window.x_range
        || a.window.y_range != b.window.y_range
        || a.window.axes != b.window.axes
    {
        return Err(Error::Incompatible(
            "basin grids differ in window or resolution".into(),
        ));
    }
    let mut confusion: BTreeMap<(String, String), usize> = BTreeMap::new();
    let (mut compared, mut agree, mut skipped) = (0, 0, 0);
    for (&la, &lb) in a.labels.iter().zip(&b.labels) {
        if la == CellLabel::Unresolved && lb == CellLabel::Unresolved {
            skipped += 1;
            continue;
        }
        let (na, nb) = (a.label_name(la), b.label_name(lb));
        compared += 1;
        if na == nb {
            agree += 1;
        }
        *confusion.entry((na.to_string(), nb.to_string())).or_default() += 1;
    }
    Ok(Agreement {
        fraction_agree: if compared == 0 {
            1.0
        } else {
            agree as f64 / compared as f64
        },
        compared,
        both_unresolved: skipped,
        confusion: confusion
            .into_iter()
            .map(|((a, b), count)| ConfusionEntry { a, b, count })
            .collect(),
    })
}
