//! Relative root-mean-square error between a predicted and a reference
//! trajectory.
//!
//! For each state `n`, the RMSE over the `I = K - d` points starting at
//! index `d` is divided by the population standard deviation of the
//! reference over that same window. The overall score is the mean over
//! states. A non-finite predicted value makes that state's score NaN.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::{same_dt, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkillScore {
    pub per_state_rrmse: Vec<f64>,
    pub mean_rrmse: f64,
    pub compared_points: usize,
}

impl SkillScore {
    pub fn is_finite(&self) -> bool {
        self.mean_rrmse.is_finite()
    }
}

pub fn rrmse(predicted: &Trajectory, reference: &Trajectory, d: usize) -> Result<SkillScore> {
    if predicted.len() != reference.len() {
        return Err(Error::Dimension(format!(
            "predicted has {} samples, reference has {}",
            predicted.len(),
            reference.len()
        )));
    }
    if predicted.state_dim() != reference.state_dim() {
        return Err(Error::Dimension(format!(
            "predicted has S={}, reference has S={}",
            predicted.state_dim(),
            reference.state_dim()
        )));
    }
    if !same_dt(predicted.dt(), reference.dt()) {
        return Err(Error::Incompatible(format!(
            "predicted dt={} differs from reference dt={}",
            predicted.dt(),
            reference.dt()
        )));
    }
    if d >= reference.len() {
        return Err(Error::InvalidArgument(format!(
            "comparison window starting at {d} is empty (K={})",
            reference.len()
        )));
    }

    let k = reference.len();
    let count = (k - d) as f64;
    let mut per_state = Vec::with_capacity(reference.state_dim());
    for n in 0..reference.state_dim() {
        let window = d..k;
        let mean = window.clone().map(|i| reference.state(i)[n]).sum::<f64>() / count;
        let var = window
            .clone()
            .map(|i| (reference.state(i)[n] - mean).powi(2))
            .sum::<f64>()
            / count;
        let std = var.sqrt();
        if !(std > 0.0) {
            return Err(Error::UndefinedScore { state: n });
        }
        let sq = window
            .map(|i| (predicted.state(i)[n] - reference.state(i)[n]).powi(2))
            .sum::<f64>();
        let score = (sq / count).sqrt() / std;
        per_state.push(if score.is_finite() { score } else { f64::NAN });
    }
    let mean_rrmse = per_state.iter().sum::<f64>() / per_state.len() as f64;
    Ok(SkillScore {
        per_state_rrmse: per_state,
        mean_rrmse,
        compared_points: k - d,
    })
}
