//! Asymmetric damped double well from a single noiseless trajectory. Test
//! ICs inside the training basin are predicted to near machine precision.

use nldm::basin::CellLabel;
use nldm::{
    ground_truth_grid, integrate, predict_like, rrmse, train, BasinWindow, BenchmarkSystem, CaptureRule,
    FeatureConfig, IntegratorSettings, SystemId,
};

pub fn run_example() -> nldm::Result<()> {
    let sys = BenchmarkSystem::new(SystemId::DoubleWell);
    for a in sys.attractors() {
        println!("attractor {}: {:?}", a.name, a.kind);
    }
    let settings = IntegratorSettings {
        rel_tol: 1e-12,
        abs_tol: 1e-14,
        ..IntegratorSettings::default()
    };
    let span = (0.0, 20.0);
    let config = FeatureConfig::new(2, 4, 3)?;
    let data = integrate(&sys, &[2.1, 3.0], span, 1000, &settings)?;
    let fit = train(&[data], config)?;
    println!(
        "training RRMSE {:.2e}, L = {}, rank {}",
        fit.mean_rrmse,
        config.dim(),
        fit.operator.summary.effective_rank
    );

    for i in 0..9 {
        let theta = std::f64::consts::PI * (i as f64 + 0.5) / 9.0;
        let ic = [theta.cos(), theta.sin()];
        let truth = integrate(&sys, &ic, span, 1000, &settings)?;
        let end = truth.state(truth.len() - 1);
        let pred = predict_like(&fit.operator, &truth)?;
        let score = rrmse(&pred.trajectory, &truth, config.delay())?;
        println!(
            "theta {:5.1} deg -> ends near x = {:+.4}, RRMSE {:.2e}",
            theta.to_degrees(),
            end[0],
            score.mean_rrmse
        );
    }

    // Basin layout near the origin under the true flow.
    let window = BasinWindow::square(3.0);
    let n = 21;
    let grid = ground_truth_grid(&sys, &window, n, 60.0, 6001, CaptureRule::default(), &settings)?;
    println!("\ntrue basins on [-3, 3]^2 (L = left sink, R = right sink):");
    for iy in (0..n).rev() {
        let row: String = (0..n)
            .map(|ix| match grid.label(ix, iy) {
                CellLabel::Attractor(0) => 'L',
                CellLabel::Attractor(_) => 'R',
                CellLabel::Unresolved => '?',
                CellLabel::Diverged => '!',
            })
            .collect();
        println!("  {row}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> nldm::Result<()> {
    run_example()
}
