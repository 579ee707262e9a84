//! Training: stack every trajectory into one snapshot pair, solve for
//! `Lambda`, then score each trajectory by re-predicting it from its own
//! first `d` states.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{build_snapshot_pair, MonomialBasis};
use crate::lstsq::solve_min_frobenius;
use crate::metrics::rrmse;
use crate::predict::predict_like;
use crate::types::{FeatureConfig, LearnedOperator, Trajectory, TrainingSummary};

/// A training trajectory together with the clean series it should be
/// scored against, when one exists.
#[derive(Debug, Clone)]
pub struct TrainingData {
    pub observed: Trajectory,
    pub reference: Option<Trajectory>,
}

impl TrainingData {
    pub fn clean(observed: Trajectory) -> Self {
        Self {
            observed,
            reference: None,
        }
    }

    pub fn with_reference(observed: Trajectory, reference: Trajectory) -> Self {
        Self {
            observed,
            reference: Some(reference),
        }
    }

    fn score_target(&self) -> &Trajectory {
        self.reference.as_ref().unwrap_or(&self.observed)
    }
}

#[derive(Debug, Clone)]
pub struct TrainingResult {
    pub operator: LearnedOperator,
    pub per_trajectory_rrmse: Vec<f64>,
    pub mean_rrmse: f64,
    pub elapsed_seconds: f64,
}

pub fn train(trajs: &[Trajectory], config: FeatureConfig) -> Result<TrainingResult> {
    let data: Vec<TrainingData> = trajs.iter().cloned().map(TrainingData::clean).collect();
    train_with_basis(&data, &MonomialBasis::new(config))
}

pub fn train_data(data: &[TrainingData], config: FeatureConfig) -> Result<TrainingResult> {
    train_with_basis(data, &MonomialBasis::new(config))
}

pub fn train_with_basis(data: &[TrainingData], basis: &MonomialBasis) -> Result<TrainingResult> {
    for (q, item) in data.iter().enumerate() {
        if let Some(r) = &item.reference {
            if r.len() != item.observed.len() || r.state_dim() != item.observed.state_dim() {
                return Err(Error::Incompatible(format!(
                    "reference for trajectory {q} does not match its observed shape"
                )));
            }
        }
    }
    let observed: Vec<Trajectory> = data.iter().map(|t| t.observed.clone()).collect();
    let pair = build_snapshot_pair(&observed, basis)?;
    let config = basis.config();
    let m = pair.columns();
    let underdetermined = config.dim() > m;
    if underdetermined {
        log::warn!(
            "underdetermined fit: L={} features but only M={m} columns; using the minimum-norm solution",
            config.dim()
        );
    }

    let started = Instant::now();
    let report = solve_min_frobenius(&pair.features, &pair.targets)?;
    let dt = observed[0].dt();
    let mut operator = LearnedOperator::new(report.solution, basis.clone(), dt)?;

    let per_trajectory_rrmse = data
        .par_iter()
        .map(|item| {
            let predicted = predict_like(&operator, &item.observed)?;
            match rrmse(&predicted.trajectory, item.score_target(), config.delay()) {
                Ok(score) => Ok(score.mean_rrmse),
                // A window too short or flat to normalise still trains.
                Err(Error::UndefinedScore { state }) => {
                    log::warn!("training RRMSE undefined: state {state} has zero spread");
                    Ok(f64::NAN)
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let elapsed_seconds = started.elapsed().as_secs_f64();

    let mean_rrmse = per_trajectory_rrmse.iter().sum::<f64>() / per_trajectory_rrmse.len() as f64;
    operator.summary = TrainingSummary {
        num_trajectories: data.len(),
        total_columns: m,
        residual_frobenius: report.residual_frobenius,
        effective_rank: report.effective_rank,
        underdetermined,
        per_trajectory_rrmse: per_trajectory_rrmse.clone(),
    };
    Ok(TrainingResult {
        operator,
        per_trajectory_rrmse,
        mean_rrmse,
        elapsed_seconds,
    })
}
