//! Damped nonlinear sink: the polynomial degree has to cover the cubic
//! restoring force. Too low a degree fails regardless of the delay.

use nldm::{integrate, predict_like, rrmse, train, BenchmarkSystem, FeatureConfig, IntegratorSettings, SystemId};

pub fn run_example() -> nldm::Result<()> {
    let sys = BenchmarkSystem::new(SystemId::Dnls);
    let settings = IntegratorSettings {
        rel_tol: 1e-12,
        abs_tol: 1e-14,
        ..IntegratorSettings::default()
    };
    let span = (0.0, 20.0);
    let train_set = vec![
        integrate(&sys, &[2.0, 0.0], span, 1000, &settings)?,
        integrate(&sys, &[-1.5, 1.5], span, 1000, &settings)?,
    ];
    let test = integrate(&sys, &[0.5, -2.0], span, 1000, &settings)?;

    println!("{:>3} {:>3} {:>12} {:>12}", "d", "o", "train", "test");
    for (d, o) in [(2, 1), (2, 2), (4, 2), (2, 3)] {
        let fit = train(&train_set, FeatureConfig::new(2, d, o)?)?;
        let pred = predict_like(&fit.operator, &test)?;
        let test_score = rrmse(&pred.trajectory, &test, d)?.mean_rrmse;
        println!("{d:>3} {o:>3} {:>12.3e} {test_score:>12.3e}", fit.mean_rrmse);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> nldm::Result<()> {
    run_example()
}
