//! Nonlinear delayed maps: learn a discrete-time model of a dynamical system
//! from uniformly sampled trajectories by lifting time-delayed states into
//! polynomial features and fitting a linear operator by least squares.
//!
//! The typical pipeline is [`odes::integrate`] (or your own data) →
//! [`identify::train`] → [`predict::predict_like`] → [`metrics::rrmse`],
//! with [`basin`] for phase-space grids.

pub mod basin;
pub mod cli;
pub mod error;
pub mod features;
pub mod identify;
pub mod io;
pub mod lstsq;
pub mod metrics;
pub mod odes;
pub mod predict;
pub mod types;

pub use basin::{grid_agreement, ground_truth_grid, operator_grid, BasinGrid, BasinWindow, CaptureRule, CellLabel};
pub use error::{Error, Result};
pub use features::{build_snapshot_pair, delayed_state, lift, Monomial, MonomialBasis};
pub use identify::{train, train_data, TrainingData, TrainingResult};
pub use lstsq::{solve_min_frobenius, LstsqReport};
pub use metrics::{rrmse, SkillScore};
pub use odes::{add_noise, integrate, BenchmarkSystem, IntegratorSettings, SystemId};
pub use predict::{predict, predict_like, Prediction};
pub use types::{
    feature_dim, FeatureConfig, LearnedOperator, Provenance, SnapshotPair, StateVector,
    Trajectory, TrainingSummary,
};
