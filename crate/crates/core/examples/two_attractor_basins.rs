//! Two sinks split by the y-axis. Training only in the left basin cannot
//! predict the right one; adding a single right-basin trajectory repairs it,
//! and the learned basin map then matches the true one.

use nldm::basin::CellLabel;
use nldm::{
    add_noise, grid_agreement, ground_truth_grid, integrate, operator_grid, predict_like, rrmse, train_data,
    BasinGrid, BasinWindow, BenchmarkSystem, CaptureRule, FeatureConfig, IntegratorSettings, LearnedOperator,
    SystemId, TrainingData,
};

const SPAN: (f64, f64) = (0.0, 10.0);
const SAMPLES: usize = 2000;
const SIGMA_PCT: f64 = 0.1;

fn fit(sys: &BenchmarkSystem, ics: &[[f64; 2]], seed: u64) -> nldm::Result<LearnedOperator> {
    let settings = IntegratorSettings::default();
    let mut data = Vec::new();
    for (i, ic) in ics.iter().enumerate() {
        let clean = integrate(sys, ic, SPAN, SAMPLES, &settings)?;
        let noisy = add_noise(&clean, SIGMA_PCT, seed + i as u64);
        data.push(TrainingData::with_reference(noisy, clean));
    }
    let result = train_data(&data, FeatureConfig::new(2, 2, 3)?)?;
    println!("  training RRMSE {:.3e}", result.mean_rrmse);
    Ok(result.operator)
}

fn score(sys: &BenchmarkSystem, op: &LearnedOperator, ic: [f64; 2]) -> nldm::Result<String> {
    let truth = integrate(sys, &ic, SPAN, SAMPLES, &IntegratorSettings::default())?;
    let pred = predict_like(op, &add_noise(&truth, SIGMA_PCT, 99))?;
    Ok(match rrmse(&pred.trajectory, &truth, 2) {
        Ok(s) if pred.diverged() => format!("diverged at step {} (RRMSE {})", pred.diverged_at.unwrap_or(0), s.mean_rrmse),
        Ok(s) => format!("RRMSE {:.3e}", s.mean_rrmse),
        Err(e) => format!("unscored: {e}"),
    })
}

fn render(grid: &BasinGrid) {
    let n = grid.resolution;
    for iy in (0..n).rev() {
        let row: String = (0..n)
            .map(|ix| match grid.label(ix, iy) {
                CellLabel::Attractor(0) => '<',
                CellLabel::Attractor(_) => '>',
                CellLabel::Unresolved => '?',
                CellLabel::Diverged => '!',
            })
            .collect();
        println!("  {row}");
    }
}

pub fn run_example() -> nldm::Result<()> {
    let sys = BenchmarkSystem::new(SystemId::TwoAttractor);
    let tests = [[0.025, 1.0], [-0.25, 3.0], [1.5, 2.0], [2.5, -1.0]];
    let left = [[-3.0, 3.0], [-3.0, -3.0], [-0.3, 3.0]];
    let both = [[-3.0, 3.0], [-3.0, -3.0], [-0.3, 3.0], [3.0, -3.0]];

    println!("left basin only:");
    let op_left = fit(&sys, &left, 10)?;
    for ic in tests {
        println!("  test {ic:?}: {}", score(&sys, &op_left, ic)?);
    }
    println!("both basins:");
    let op_both = fit(&sys, &both, 10)?;
    for ic in tests {
        println!("  test {ic:?}: {}", score(&sys, &op_both, ic)?);
    }

    let window = BasinWindow::square(3.0);
    let rule = CaptureRule::default();
    let truth = ground_truth_grid(&sys, &window, 25, 30.0, 3001, rule, &IntegratorSettings::default())?;
    let learned = operator_grid(&op_both, &sys, &window, 25, 3000, rule)?;
    println!("\ntrue basins (< left sink, > right sink):");
    render(&truth);
    println!("basins of the both-basin model:");
    render(&learned);
    let agreement = grid_agreement(&truth, &learned)?;
    println!(
        "agreement {:.3} over {} cells; confusion {:?}",
        agreement.fraction_agree,
        agreement.compared,
        agreement.confusion.iter().map(|c| (&c.a, &c.b, c.count)).collect::<Vec<_>>()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> nldm::Result<()> {
    run_example()
}
