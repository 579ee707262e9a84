//! Domain types shared by every stage of the pipeline.
//!
//! Everything here is immutable once constructed. Trajectories store their
//! states in one flat row-major buffer (`K` rows of `S` values) so that
//! slicing a state is free and serialization is a straight walk.

use std::ops::Deref;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::MonomialBasis;

/// Relative tolerance used when two sampling intervals must be "the same".
pub const DT_REL_TOL: f64 = 1e-9;

pub(crate) fn same_dt(a: f64, b: f64) -> bool {
    (a - b).abs() <= DT_REL_TOL * a.abs().max(b.abs())
}

/// One sampled state `x_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("state vector must have S >= 1".into()));
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for StateVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<&[f64]> for StateVector {
    fn from(values: &[f64]) -> Self {
        Self(values.to_vec())
    }
}

impl<const N: usize> From<[f64; N]> for StateVector {
    fn from(values: [f64; N]) -> Self {
        Self(values.to_vec())
    }
}

/// Where a trajectory's samples came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Clean,
    Noisy { sigma_pct: f64, seed: u64 },
    Predicted,
}

/// Uniformly sampled time series `x_0 .. x_{K-1}` at `t_k = t0 + k*dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: usize,
    data: Vec<f64>,
    dt: f64,
    t0: f64,
    provenance: Provenance,
}

impl Trajectory {
    /// Builds a trajectory from row-major samples (`len = K * S`).
    ///
    /// Non-finite samples are accepted: predicted trajectories use NaN as
    /// the divergence sentinel.
    pub fn from_flat(
        states: usize,
        data: Vec<f64>,
        dt: f64,
        t0: f64,
        provenance: Provenance,
    ) -> Result<Self> {
        if states == 0 {
            return Err(Error::InvalidArgument("S must be >= 1".into()));
        }
        if data.len() % states != 0 {
            return Err(Error::Dimension(format!(
                "{} values do not split into states of size {states}",
                data.len()
            )));
        }
        if data.len() / states < 2 {
            return Err(Error::InvalidArgument(
                "a trajectory needs at least 2 samples".into(),
            ));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if !t0.is_finite() {
            return Err(Error::InvalidArgument("t0 must be finite".into()));
        }
        Ok(Self {
            states,
            data,
            dt,
            t0,
            provenance,
        })
    }

    pub fn new(
        samples: Vec<StateVector>,
        dt: f64,
        t0: f64,
        provenance: Provenance,
    ) -> Result<Self> {
        let s = samples
            .first()
            .map(|x| x.dim())
            .ok_or_else(|| Error::InvalidArgument("empty trajectory".into()))?;
        let mut data = Vec::with_capacity(samples.len() * s);
        for (k, x) in samples.iter().enumerate() {
            if x.dim() != s {
                return Err(Error::Dimension(format!(
                    "state {k} has dimension {}, expected {s}",
                    x.dim()
                )));
            }
            data.extend_from_slice(x);
        }
        Self::from_flat(s, data, dt, t0, provenance)
    }

    /// Scalar (S = 1) convenience constructor with `dt = 1`, `t0 = 0`.
    pub fn scalar(values: &[f64]) -> Result<Self> {
        Self::from_flat(1, values.to_vec(), 1.0, 0.0, Provenance::Clean)
    }

    pub fn state_dim(&self) -> usize {
        self.states
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.states
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.data[k * self.states..(k + 1) * self.states]
    }

    pub fn states(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.states)
    }

    /// Values of state channel `n` over time.
    pub fn channel(&self, n: usize) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.states().map(move |x| x[n])
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub(crate) fn map_flat(&self, data: Vec<f64>, provenance: Provenance) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        Self {
            data,
            provenance,
            ..self.clone()
        }
    }
}

/// Binomial coefficient `C(n, k)` with overflow detection.
fn binomial(n: usize, k: usize) -> Option<usize> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
        if acc > usize::MAX as u128 {
            return None;
        }
    }
    usize::try_from(acc).ok()
}

/// Number of monomials of total degree `1..=o` in `d*S` variables:
/// `C(dS + o, o) - 1`.
pub fn feature_dim(states: usize, delay: usize, degree: usize) -> Result<usize> {
    if states == 0 || delay == 0 || degree == 0 {
        return Err(Error::InvalidArgument(format!(
            "S, d and o must all be >= 1 (got S={states}, d={delay}, o={degree})"
        )));
    }
    let capacity = || Error::Capacity {
        states,
        delay,
        degree,
    };
    let vars = states.checked_mul(delay).ok_or_else(capacity)?;
    let n = vars.checked_add(degree).ok_or_else(capacity)?;
    binomial(n, degree)
        .map(|c| c - 1)
        .ok_or_else(capacity)
}

/// Time-delay order `d` and polynomial degree `o` for an `S`-state system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureConfig {
    states: usize,
    delay: usize,
    degree: usize,
    dim: usize,
}

impl FeatureConfig {
    pub fn new(states: usize, delay: usize, degree: usize) -> Result<Self> {
        let dim = feature_dim(states, delay, degree)?;
        Ok(Self {
            states,
            delay,
            degree,
            dim,
        })
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Feature dimension `L`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Length of a delayed-state vector, `d * S`.
    pub fn delayed_len(&self) -> usize {
        self.states * self.delay
    }
}

/// Target/feature matrices `X` (S x M) and `Upsilon` (L x M).
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotPair {
    pub targets: DMatrix<f64>,
    pub features: DMatrix<f64>,
}

impl SnapshotPair {
    pub fn columns(&self) -> usize {
        self.targets.ncols()
    }
}

/// Diagnostics recorded alongside a learned operator.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub num_trajectories: usize,
    pub total_columns: usize,
    pub residual_frobenius: f64,
    pub effective_rank: usize,
    pub underdetermined: bool,
    pub per_trajectory_rrmse: Vec<f64>,
}

/// The learned `S x L` map from lifted delayed features to the next state.
#[derive(Debug, Clone)]
pub struct LearnedOperator {
    lambda: DMatrix<f64>,
    basis: MonomialBasis,
    dt: f64,
    pub summary: TrainingSummary,
}

impl LearnedOperator {
    pub fn new(lambda: DMatrix<f64>, basis: MonomialBasis, dt: f64) -> Result<Self> {
        let config = basis.config();
        if lambda.nrows() != config.states() || lambda.ncols() != config.dim() {
            return Err(Error::Dimension(format!(
                "operator is {}x{}, config requires {}x{}",
                lambda.nrows(),
                lambda.ncols(),
                config.states(),
                config.dim()
            )));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        Ok(Self {
            lambda,
            basis,
            dt,
            summary: TrainingSummary::default(),
        })
    }

    pub fn lambda(&self) -> &DMatrix<f64> {
        &self.lambda
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    pub fn config(&self) -> FeatureConfig {
        self.basis.config()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
}
