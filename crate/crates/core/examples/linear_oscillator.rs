//! Damped linear oscillator: exact recovery of the one-step flow map from
//! clean data, then training on noisy trajectories and scoring a test IC.

use nldm::odes::integrate_fn;
use nldm::{
    add_noise, integrate, predict_like, rrmse, train, train_data, BenchmarkSystem, FeatureConfig,
    IntegratorSettings, SystemId, TrainingData,
};

pub fn run_example() -> nldm::Result<()> {
    let sys = BenchmarkSystem::new(SystemId::Lho);
    let tight = IntegratorSettings {
        rel_tol: 1e-12,
        abs_tol: 1e-14,
        ..IntegratorSettings::default()
    };

    // With (d, o) = (1, 1) the model is x[k] = Lambda x[k-1], and for a
    // linear system Lambda should be the flow map over one step.
    let dt = 0.01;
    let clean = integrate(&sys, &[2.0, 0.0], (0.0, 999.0 * dt), 1000, &tight)?;
    let fit = train(&[clean], FeatureConfig::new(2, 1, 1)?)?;
    let lambda = fit.operator.lambda();
    let mut flow = [[0.0; 2]; 2];
    for (j, e) in [[1.0, 0.0], [0.0, 1.0]].iter().enumerate() {
        let x = integrate_fn(|x, dx| sys.rhs(x, dx), e, (0.0, dt), 2, &tight)?;
        flow[0][j] = x[2];
        flow[1][j] = x[3];
    }
    let err = (0..2)
        .flat_map(|i| (0..2).map(move |j| (i, j)))
        .map(|(i, j)| (lambda[(i, j)] - flow[i][j]).powi(2))
        .sum::<f64>()
        .sqrt();
    println!("learned Lambda = {lambda:.9}");
    println!("flow map over dt = {flow:?}");
    println!("Frobenius error {err:.2e}\n");

    // Four noisy trajectories, (d, o) = (2, 1).
    let settings = IntegratorSettings::default();
    let span = (0.0, 10.0);
    let mut data = Vec::new();
    for (i, ic) in [[2.0, 0.0], [-2.0, 0.0], [0.0, -2.0], [1.5, 1.5]].iter().enumerate() {
        let clean = integrate(&sys, ic, span, 1000, &settings)?;
        let noisy = add_noise(&clean, 0.1, 100 + i as u64);
        data.push(TrainingData::with_reference(noisy, clean));
    }
    let config = FeatureConfig::new(2, 2, 1)?;
    let fit = train_data(&data, config)?;
    let per: Vec<String> = fit.per_trajectory_rrmse.iter().map(|r| format!("{r:.2e}")).collect();
    println!("noisy training: per-trajectory RRMSE [{}]", per.join(", "));
    println!("mean training RRMSE {:.3e}", fit.mean_rrmse);

    let test_clean = integrate(&sys, &[0.0, 2.0], span, 1000, &settings)?;
    let test_noisy = add_noise(&test_clean, 0.1, 7);
    let pred = predict_like(&fit.operator, &test_noisy)?;
    let score = rrmse(&pred.trajectory, &test_clean, config.delay())?;
    println!("test IC (0, 2): RRMSE {:.3e}", score.mean_rrmse);
    Ok(())
}

#[allow(dead_code)]
fn main() -> nldm::Result<()> {
    run_example()
}
