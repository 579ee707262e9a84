//! Lorenz system driven from a checked-in experiment config: five training
//! trajectories, one test trajectory visiting both lobes.

use nldm::cli::config::ExperimentConfig;
use nldm::cli::pipeline;

pub fn run_example() -> nldm::Result<()> {
    let cfg = ExperimentConfig::from_toml_str(include_str!("../configs/lorenz.toml"))?;
    let data = pipeline::generate(&cfg)?;
    let fit = pipeline::train_stage(&cfg, &data)?;
    println!(
        "(d, o) = ({}, {}), L = {}, rank {}, {} columns",
        cfg.model.delay,
        cfg.model.degree,
        fit.operator.config().dim(),
        fit.operator.summary.effective_rank,
        fit.operator.summary.total_columns
    );
    for (entry, r) in cfg.train.iter().zip(&fit.per_trajectory_rrmse) {
        println!("  train {:?}: RRMSE {r:.3e}", entry.ic.as_deref().unwrap_or_default());
    }
    println!("mean training RRMSE {:.3e} ({:.2} s)", fit.mean_rrmse, fit.elapsed_seconds);
    for (entry, outcome) in cfg.test.iter().zip(pipeline::evaluate_stage(&cfg, &fit.operator, &data)?) {
        println!("  test {:?}: RRMSE {:.3e}", entry.ic.as_deref().unwrap_or_default(), outcome.mean_rrmse());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> nldm::Result<()> {
    run_example()
}
