//! Sink at the origin, repelling cycle at r = 1 and attracting cycle at
//! r = 2. Reports where learned trajectories seeded outside the outer cycle
//! and inside the inner one end up.

use nldm::{add_noise, integrate, predict_like, train_data, BenchmarkSystem, FeatureConfig, IntegratorSettings, SystemId, TrainingData};

pub fn run_example() -> nldm::Result<()> {
    let sys = BenchmarkSystem::new(SystemId::DualLimitCycle);
    let settings = IntegratorSettings::default();
    let span = (0.0, 10.0);
    let k = 1000;
    let radii = [0.5, 0.7, 0.9, 1.1, 1.5, 2.2, 2.6, 3.0, 3.0, 3.0, 3.2, 3.5];
    let mut data = Vec::new();
    for (i, r) in radii.iter().enumerate() {
        let angle = i as f64 * 2.3;
        let clean = integrate(&sys, &[r * angle.cos(), r * angle.sin()], span, k, &settings)?;
        data.push(TrainingData::with_reference(add_noise(&clean, 0.1, 500 + i as u64), clean));
    }
    let fit = train_data(&data, FeatureConfig::new(2, 5, 2)?)?;
    println!("training RRMSE {:.3e} over {} trajectories", fit.mean_rrmse, radii.len());

    let pi = std::f64::consts::PI;
    for (r, theta) in [(3.0, 4.0 * pi / 3.0), (3.0, pi / 4.0), (0.5, pi / 3.0), (0.5, 5.0 * pi / 4.0)] {
        let truth = integrate(&sys, &[r * f64::cos(theta), r * f64::sin(theta)], span, k, &settings)?;
        let pred = predict_like(&fit.operator, &add_noise(&truth, 0.1, 900))?;
        let t = &pred.trajectory;
        let end_true = truth.state(k - 1);
        let end_pred = t.state(k - 1);
        println!(
            "seed r = {r}, theta = {:5.1} deg: true final radius {:.3}, learned final radius {:.3}{}",
            theta.to_degrees(),
            end_true[0].hypot(end_true[1]),
            end_pred[0].hypot(end_pred[1]),
            if pred.diverged() { " (diverged)" } else { "" }
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> nldm::Result<()> {
    run_example()
}
