//! Delayed-state feature vectors and the feature matrix `Upsilon`.
//!
//! A delayed vector stacks the `d` most recent states newest first,
//! `[x_{k-1}; x_{k-2}; ...; x_{k-d}]`, giving `dS` variables. The lifted
//! vector holds every monomial of total degree `1..=o` in those variables,
//! with no constant term, in graded lexicographic order: degree ascending,
//! and within a degree the sorted variable-index tuples in lexicographic
//! order (`z0^2, z0 z1, z0 z2, .., z1^2, ..`).

use std::collections::HashMap;
use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::{same_dt, FeatureConfig, SnapshotPair, Trajectory};

/// Tag written into model files for the canonical ordering.
pub const CANONICAL_ORDERING: &str = "grlex-newest-first";

/// Exponents of one monomial over the `dS` delayed variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial {
    exponents: Vec<u32>,
}

impl Monomial {
    pub fn from_exponents(exponents: Vec<u32>) -> Result<Self> {
        let total: u32 = exponents.iter().sum();
        if total == 0 {
            return Err(Error::InvalidArgument(
                "constant monomial is not a feature".into(),
            ));
        }
        Ok(Self { exponents })
    }

    fn from_indices(vars: usize, indices: &[usize]) -> Self {
        let mut exponents = vec![0; vars];
        for &i in indices {
            exponents[i] += 1;
        }
        Self { exponents }
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    pub fn total_degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    /// Direct evaluation by powers; slow path kept for checks and display.
    pub fn eval(&self, z: &[f64]) -> f64 {
        self.exponents
            .iter()
            .zip(z)
            .filter(|(&e, _)| e > 0)
            .map(|(&e, &v)| v.powi(e as i32))
            .product()
    }

    /// Human readable form such as `x1[k-1]^2*x2[k-2]`.
    pub fn describe(&self, states: usize) -> String {
        let parts: Vec<String> = self
            .exponents
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(v, &e)| {
                let name = format!("x{}[k-{}]", v % states + 1, v / states + 1);
                if e == 1 {
                    name
                } else {
                    format!("{name}^{e}")
                }
            })
            .collect();
        parts.join("*")
    }
}

#[derive(Debug, Clone, Copy)]
enum Step {
    Var(usize),
    Product { parent: usize, var: usize },
}

/// The ordered monomial set for a [`FeatureConfig`] plus an evaluation plan
/// that computes every degree-`g` entry as one multiplication of a memoized
/// degree-`g-1` entry.
#[derive(Debug, Clone)]
pub struct MonomialBasis {
    config: FeatureConfig,
    monomials: Vec<Monomial>,
    plan: Vec<Step>,
    /// `order[j]` is the canonical index evaluated into output slot `j`.
    /// `None` for the canonical ordering.
    order: Option<Vec<usize>>,
}

impl MonomialBasis {
    /// Canonical graded-lex basis.
    pub fn new(config: FeatureConfig) -> Self {
        let vars = config.delayed_len();
        let mut monomials = Vec::with_capacity(config.dim());
        let mut plan = Vec::with_capacity(config.dim());
        let mut index_of: HashMap<Vec<usize>, usize> = HashMap::new();

        let mut prev: Vec<Vec<usize>> = Vec::new();
        for v in 0..vars {
            let tuple = vec![v];
            index_of.insert(tuple.clone(), plan.len());
            monomials.push(Monomial::from_indices(vars, &tuple));
            plan.push(Step::Var(v));
            prev.push(tuple);
        }
        for _ in 2..=config.degree() {
            let mut next = Vec::new();
            for tuple in &prev {
                let last = *tuple.last().expect("non-empty tuple");
                let parent = index_of[tuple];
                for v in last..vars {
                    let mut t = tuple.clone();
                    t.push(v);
                    index_of.insert(t.clone(), plan.len());
                    monomials.push(Monomial::from_indices(vars, &t));
                    plan.push(Step::Product { parent, var: v });
                    next.push(t);
                }
            }
            prev = next;
        }
        debug_assert_eq!(plan.len(), config.dim());
        Self {
            config,
            monomials,
            plan,
            order: None,
        }
    }

    /// A basis listing the canonical monomials in a caller-chosen order.
    pub fn with_order(config: FeatureConfig, monomials: Vec<Monomial>) -> Result<Self> {
        let canonical = Self::new(config);
        if monomials.len() != canonical.len() {
            return Err(Error::Dimension(format!(
                "ordering lists {} monomials, expected {}",
                monomials.len(),
                canonical.len()
            )));
        }
        let position: HashMap<&Monomial, usize> = canonical
            .monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m, i))
            .collect();
        let mut seen = vec![false; canonical.len()];
        let mut order = Vec::with_capacity(monomials.len());
        for m in &monomials {
            let i = *position.get(m).ok_or_else(|| {
                Error::InvalidArgument(format!("monomial {:?} is not in the feature set", m.exponents))
            })?;
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidArgument(format!(
                    "monomial {:?} listed twice",
                    m.exponents
                )));
            }
            order.push(i);
        }
        Ok(Self {
            config,
            monomials,
            plan: canonical.plan,
            order: Some(order),
        })
    }

    pub fn config(&self) -> FeatureConfig {
        self.config
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn is_canonical(&self) -> bool {
        self.order.is_none()
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    /// Evaluates all features of `delayed` into `out` (`out.len() == L`).
    pub fn lift_into(&self, delayed: &[f64], out: &mut [f64]) -> Result<()> {
        let want = self.config.delayed_len();
        if delayed.len() != want {
            return Err(Error::Dimension(format!(
                "delayed vector has length {}, expected dS = {want}",
                delayed.len()
            )));
        }
        if out.len() != self.len() {
            return Err(Error::Dimension(format!(
                "output buffer has length {}, expected L = {}",
                out.len(),
                self.len()
            )));
        }
        match &self.order {
            None => self.eval_plan(delayed, out),
            Some(order) => {
                let mut canonical = vec![0.0; self.len()];
                self.eval_plan(delayed, &mut canonical);
                for (slot, &i) in out.iter_mut().zip(order) {
                    *slot = canonical[i];
                }
            }
        }
        Ok(())
    }

    fn eval_plan(&self, z: &[f64], out: &mut [f64]) {
        for (j, step) in self.plan.iter().enumerate() {
            out[j] = match *step {
                Step::Var(v) => z[v],
                Step::Product { parent, var } => out[parent] * z[var],
            };
        }
    }

    pub fn lift(&self, delayed: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len()];
        self.lift_into(delayed, &mut out)?;
        Ok(out)
    }
}

impl fmt::Display for MonomialBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.config.states();
        for (j, m) in self.monomials.iter().enumerate() {
            writeln!(f, "{j:>4}  {}", m.describe(s))?;
        }
        Ok(())
    }
}

/// Lifts with the canonical basis for `config`.
pub fn lift(delayed: &[f64], config: &FeatureConfig) -> Result<Vec<f64>> {
    MonomialBasis::new(*config).lift(delayed)
}

/// `[x_{k-1}; x_{k-2}; ..; x_{k-d}]` from `traj`.
pub fn delayed_state(traj: &Trajectory, k: usize, d: usize) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::InvalidArgument("delay order must be >= 1".into()));
    }
    if k < d {
        return Err(Error::InsufficientHistory {
            index: k,
            delay: d,
            available: k,
        });
    }
    if k >= traj.len() {
        return Err(Error::Dimension(format!(
            "index {k} outside trajectory of length {}",
            traj.len()
        )));
    }
    let mut out = Vec::with_capacity(d * traj.state_dim());
    for lag in 1..=d {
        out.extend_from_slice(traj.state(k - lag));
    }
    Ok(out)
}

/// Stacks `(x_k, lift(delayed_state(k)))` column pairs for every trajectory
/// and every `k in d..K_q`, trajectory-major then time-ascending.
pub fn build_snapshot_pair(trajs: &[Trajectory], basis: &MonomialBasis) -> Result<SnapshotPair> {
    let config = basis.config();
    let d = config.delay();
    let s = config.states();
    let first = trajs
        .first()
        .ok_or_else(|| Error::InvalidArgument("at least one trajectory is required".into()))?;
    for (q, t) in trajs.iter().enumerate() {
        if t.state_dim() != s {
            return Err(Error::Incompatible(format!(
                "trajectory {q} has S={}, feature config expects S={s}",
                t.state_dim()
            )));
        }
        if !same_dt(t.dt(), first.dt()) {
            return Err(Error::Incompatible(format!(
                "trajectory {q} has dt={}, trajectory 0 has dt={}",
                t.dt(),
                first.dt()
            )));
        }
        if t.len() <= d {
            return Err(Error::TooShort {
                index: q,
                len: t.len(),
                needed: d + 1,
            });
        }
    }

    let columns: Vec<(usize, usize)> = trajs
        .iter()
        .enumerate()
        .flat_map(|(q, t)| (d..t.len()).map(move |k| (q, k)))
        .collect();
    let m = columns.len();
    let l = basis.len();

    let mut targets = DMatrix::<f64>::zeros(s, m);
    for (col, &(q, k)) in targets
        .as_mut_slice()
        .chunks_exact_mut(s)
        .zip(columns.iter())
    {
        col.copy_from_slice(trajs[q].state(k));
    }

    let mut features = DMatrix::<f64>::zeros(l, m);
    features
        .as_mut_slice()
        .par_chunks_exact_mut(l)
        .zip(columns.par_iter())
        .try_for_each(|(col, &(q, k))| {
            let mut delayed = Vec::with_capacity(d * s);
            let t = &trajs[q];
            for lag in 1..=d {
                delayed.extend_from_slice(t.state(k - lag));
            }
            basis.lift_into(&delayed, col)
        })?;

    Ok(SnapshotPair { targets, features })
}
