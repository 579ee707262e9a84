//! Iterative forecasting: lift the `d` most recent states, multiply by
//! `Lambda`, append, repeat.

use crate::error::{Error, Result};
use crate::types::{LearnedOperator, Provenance, StateVector, Trajectory};

/// Max-norm beyond which a predicted state counts as diverged.
pub const DEFAULT_DIVERGENCE_THRESHOLD: f64 = 1e6;

#[derive(Debug, Clone)]
pub struct Prediction {
    /// Seeds followed by predicted states; NaN from `diverged_at` onwards.
    pub trajectory: Trajectory,
    /// Index into `trajectory` of the first diverged state.
    pub diverged_at: Option<usize>,
    pub steps_requested: usize,
}

impl Prediction {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }
}

/// Predicts `steps` states after the `d` seeds (oldest first).
pub fn predict(op: &LearnedOperator, seeds: &[StateVector], steps: usize) -> Result<Prediction> {
    let flat: Vec<f64> = seeds.iter().flat_map(|s| s.iter().copied()).collect();
    let s = op.config().states();
    if let Some((i, bad)) = seeds.iter().enumerate().find(|(_, x)| x.dim() != s) {
        return Err(Error::Dimension(format!(
            "seed {i} has dimension {}, operator expects S={s}",
            bad.dim()
        )));
    }
    predict_flat(op, &flat, seeds.len(), steps, 0.0, DEFAULT_DIVERGENCE_THRESHOLD)
}

/// Seeds from the first `d` states of `reference`, predicting its remaining
/// `K - d` states so the output aligns index-by-index with it.
pub fn predict_like(op: &LearnedOperator, reference: &Trajectory) -> Result<Prediction> {
    predict_like_with_threshold(op, reference, DEFAULT_DIVERGENCE_THRESHOLD)
}

pub fn predict_like_with_threshold(
    op: &LearnedOperator,
    reference: &Trajectory,
    threshold: f64,
) -> Result<Prediction> {
    let d = op.config().delay();
    if reference.state_dim() != op.config().states() {
        return Err(Error::Dimension(format!(
            "reference has S={}, operator expects S={}",
            reference.state_dim(),
            op.config().states()
        )));
    }
    if reference.len() < d {
        return Err(Error::TooShort {
            index: 0,
            len: reference.len(),
            needed: d,
        });
    }
    let seeds = &reference.as_flat()[..d * reference.state_dim()];
    predict_flat(op, seeds, d, reference.len() - d, reference.t0(), threshold)
}

/// Core loop over row-major seed values.
pub fn predict_flat(
    op: &LearnedOperator,
    seeds: &[f64],
    seed_count: usize,
    steps: usize,
    t0: f64,
    threshold: f64,
) -> Result<Prediction> {
    let s = op.config().states();
    let d = op.config().delay();
    if seed_count != d {
        return Err(Error::InvalidArgument(format!(
            "operator needs exactly d={d} seed states, got {seed_count}"
        )));
    }
    let mut stepper = Stepper::new(op, seeds)?;

    let total = d + steps;
    let mut out = Vec::with_capacity(total * s);
    out.extend_from_slice(seeds);
    let mut diverged_at = None;
    for k in d..total {
        let next = stepper.step();
        if next.iter().any(|v| !v.is_finite() || v.abs() > threshold) {
            diverged_at = Some(k);
            out.resize(total * s, f64::NAN);
            break;
        }
        out.extend_from_slice(next);
    }

    let trajectory = Trajectory::from_flat(s, out, op.dt(), t0, Provenance::Predicted)?;
    Ok(Prediction {
        trajectory,
        diverged_at,
        steps_requested: steps,
    })
}

/// One-step-at-a-time iteration of a learned operator, for callers that
/// want to stop early (basin classification) without materialising the
/// whole trajectory.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    op: &'a LearnedOperator,
    /// The `d` most recent states, newest first.
    delayed: Vec<f64>,
    lifted: Vec<f64>,
    next: Vec<f64>,
}

impl<'a> Stepper<'a> {
    /// `seeds` holds `d` states row-major, oldest first.
    pub fn new(op: &'a LearnedOperator, seeds: &[f64]) -> Result<Self> {
        let s = op.config().states();
        let d = op.config().delay();
        if seeds.len() != d * s {
            return Err(Error::Dimension(format!(
                "{} seed values do not form {d} states of dimension {s}",
                seeds.len()
            )));
        }
        let mut delayed = Vec::with_capacity(d * s);
        for state in seeds.chunks_exact(s).rev() {
            delayed.extend_from_slice(state);
        }
        Ok(Self {
            op,
            delayed,
            lifted: vec![0.0; op.basis().len()],
            next: vec![0.0; s],
        })
    }

    /// Advances by one step and returns the new state.
    pub fn step(&mut self) -> &[f64] {
        let s = self.next.len();
        self.op
            .basis()
            .lift_into(&self.delayed, &mut self.lifted)
            .expect("stepper buffers are sized from the operator");
        self.next.iter_mut().for_each(|v| *v = 0.0);
        // Lambda is column-major: column j holds the weights of feature j.
        for (col, &f) in self.op.lambda().as_slice().chunks_exact(s).zip(&self.lifted) {
            for (acc, &w) in self.next.iter_mut().zip(col) {
                *acc += w * f;
            }
        }
        let len = self.delayed.len();
        self.delayed.copy_within(0..len - s, s);
        self.delayed[..s].copy_from_slice(&self.next);
        &self.next
    }
}
