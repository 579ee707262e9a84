//! Mean-field cylinder dynamics: a damped oscillator coupled to a height
//! variable, spiralling onto a periodic orbit at z = 1 with radius 1.

use nldm::{add_noise, integrate, predict_like, rrmse, train_data, BenchmarkSystem, FeatureConfig, IntegratorSettings, SystemId, TrainingData};

pub fn run_example() -> nldm::Result<()> {
    let sys = BenchmarkSystem::new(SystemId::Mfcd);
    println!("parameters {:?}", sys.params());
    for a in sys.attractors() {
        println!("attractor {}: {:?}", a.name, a.kind);
    }
    let settings = IntegratorSettings {
        rel_tol: 1e-11,
        abs_tol: 1e-13,
        ..IntegratorSettings::default()
    };
    let span = (0.0, 40.0);
    let k = 2000;
    // One IC inside the orbit's xy-projection, one outside.
    let train_ics = [[0.2, 0.0, 0.1], [1.8, 0.0, 2.0]];
    let test_ics = [[0.0, 0.5, 0.3], [0.0, -1.5, 1.5]];
    let config = FeatureConfig::new(3, 3, 2)?;

    for sigma_pct in [0.0, 0.1] {
        let mut data = Vec::new();
        for (i, ic) in train_ics.iter().enumerate() {
            let clean = integrate(&sys, ic, span, k, &settings)?;
            data.push(TrainingData::with_reference(add_noise(&clean, sigma_pct, i as u64), clean));
        }
        let fit = train_data(&data, config)?;
        println!("\nnoise {sigma_pct}%: training RRMSE {:.3e}", fit.mean_rrmse);
        for ic in test_ics {
            let truth = integrate(&sys, &ic, span, k, &settings)?;
            let pred = predict_like(&fit.operator, &add_noise(&truth, sigma_pct, 50))?;
            let end = pred.trajectory.state(pred.trajectory.len() - 1);
            let radius = end[0].hypot(end[1]);
            let score = rrmse(&pred.trajectory, &truth, config.delay())?;
            println!(
                "  test {ic:?}: RRMSE {:.3e}, final radius {radius:.4}, height {:.4}",
                score.mean_rrmse, end[2]
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> nldm::Result<()> {
    run_example()
}
