//! Property checks for every module invariant. Each function panics on the
//! first counterexample and is shared by the `properties` test target and
//! the acceptance suite.

use std::path::Path;

use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRng, TestRunner};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nldm::basin::{operator_cell, CellLabel};
use nldm::cli::config::{ExperimentConfig, ModelConfig, NoiseConfig, SeriesConfig, SystemConfig};
use nldm::identify::train_with_basis;
use nldm::io::{read_trajectory_csv, write_trajectory_csv};
use nldm::predict::predict_flat;
use nldm::{
    add_noise, build_snapshot_pair, feature_dim, ground_truth_grid, integrate, lift, operator_grid, predict_like,
    rrmse, solve_min_frobenius, train, train_data, BasinWindow, BenchmarkSystem, CaptureRule, FeatureConfig,
    IntegratorSettings, LearnedOperator, MonomialBasis, Provenance, SystemId, TrainingData, Trajectory,
};

use super::{brute_force_monomials, frobenius, frobenius_diff, lho_closed_form, lstsq_oracle, to_mat};

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let rng = TestRng::deterministic_rng(config.rng_algorithm);
    TestRunner::new_with_rng(config, rng)
}

fn check<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>)
where
    S::Value: std::fmt::Debug,
{
    if let Err(e) = runner(cases).run(&strategy, test) {
        panic!("{e}");
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn random_trajectory(rng: &mut ChaCha8Rng, s: usize, k: usize) -> Trajectory {
    let data = (0..s * k).map(|_| rng.random_range(-1.0..1.0)).collect();
    Trajectory::from_flat(s, data, 0.1, 0.0, Provenance::Clean).unwrap()
}

// ---- core ----

pub fn feature_dim_linear_is_ds() {
    check(200, (1usize..30, 1usize..30), |(s, d)| {
        prop_assert_eq!(feature_dim(s, d, 1).unwrap(), d * s);
        Ok(())
    });
}

pub fn feature_dim_matches_enumeration() {
    for s in 1..=6 {
        for d in 1..=6 / s {
            for o in 1..=4 {
                let expected = brute_force_monomials(d * s, o).len();
                assert_eq!(feature_dim(s, d, o).unwrap(), expected, "S={s} d={d} o={o}");
                let basis = MonomialBasis::new(FeatureConfig::new(s, d, o).unwrap());
                let exps: Vec<Vec<u32>> = basis.monomials().iter().map(|m| m.exponents().to_vec()).collect();
                assert_eq!(exps, brute_force_monomials(d * s, o), "ordering for S={s} d={d} o={o}");
            }
        }
    }
}

fn finite_value() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e3f64..1e3,
        Just(0.0),
        Just(-0.0),
        Just(f64::MAX),
        Just(f64::MIN_POSITIVE),
        Just(5e-324),
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
    ]
}

pub fn trajectory_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let strategy = (1usize..4, 2usize..30).prop_flat_map(|(s, k)| {
        (Just(s), proptest::collection::vec(finite_value(), s * k), 1e-4f64..10.0, -100.0f64..100.0)
    });
    check(64, strategy, |(s, data, dt, t0)| {
        let t = Trajectory::from_flat(s, data, dt, t0, Provenance::Clean).unwrap();
        write_trajectory_csv(&path, &t).unwrap();
        let back = read_trajectory_csv(&path, Provenance::Clean).unwrap();
        let bits = |t: &Trajectory| t.as_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&t));
        prop_assert!(rel(back.dt(), dt) < 1e-12);
        Ok(())
    });
}

// ---- features ----

pub fn lift_is_multiplicative() {
    let strategy = (1usize..3, 1usize..3, 1usize..5).prop_flat_map(|(s, d, o)| {
        (Just((s, d, o)), proptest::collection::vec(-2.0f64..2.0, s * d), 0.1f64..3.0)
    });
    check(128, strategy, |((s, d, o), z, c)| {
        let config = FeatureConfig::new(s, d, o).unwrap();
        let basis = MonomialBasis::new(config);
        let base = basis.lift(&z).unwrap();
        let scaled: Vec<f64> = z.iter().map(|v| v * c).collect();
        let lifted = basis.lift(&scaled).unwrap();
        for ((m, b), l) in basis.monomials().iter().zip(&base).zip(&lifted) {
            let expect = b * c.powi(m.total_degree() as i32);
            prop_assert!((l - expect).abs() <= 1e-12 * expect.abs().max(1e-12), "{l} vs {expect}");
            prop_assert!((m.eval(&z) - b).abs() <= 1e-12 * b.abs().max(1e-12));
        }
        Ok(())
    });
}

pub fn lift_degree_one_is_identity() {
    let strategy = (1usize..4, 1usize..4).prop_flat_map(|(s, d)| (Just((s, d)), proptest::collection::vec(-1e6f64..1e6, s * d)));
    check(128, strategy, |((s, d), z)| {
        prop_assert_eq!(lift(&z, &FeatureConfig::new(s, d, 1).unwrap()).unwrap(), z);
        Ok(())
    });
}

pub fn snapshot_permutation_invariance() {
    check(48, (any::<u64>(), 1usize..3, 1usize..3, 1usize..3), |(seed, s, d, o)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let config = FeatureConfig::new(s, d, o).unwrap();
        let l = config.dim();
        let a = random_trajectory(&mut rng, s, 2 * l + 10);
        let b = random_trajectory(&mut rng, s, l + 7);
        let basis = MonomialBasis::new(config);
        let ab = build_snapshot_pair(&[a.clone(), b.clone()], &basis).unwrap();
        let ba = build_snapshot_pair(&[b.clone(), a.clone()], &basis).unwrap();
        let (ma, mb) = (a.len() - d, b.len() - d);
        for j in 0..ma {
            prop_assert_eq!(ab.features.column(j), ba.features.column(mb + j));
            prop_assert_eq!(ab.targets.column(j), ba.targets.column(mb + j));
        }
        let x = solve_min_frobenius(&ab.features, &ab.targets).unwrap().solution;
        let y = solve_min_frobenius(&ba.features, &ba.targets).unwrap().solution;
        prop_assert!((&x - &y).norm() <= 1e-9 * x.norm().max(1.0));
        let tx = train(&[a.clone(), b.clone()], config).unwrap().operator;
        let ty = train(&[b, a], config).unwrap().operator;
        prop_assert!((tx.lambda() - ty.lambda()).norm() <= 1e-9 * tx.lambda().norm().max(1.0));
        Ok(())
    });
}

pub fn snapshot_alignment() {
    check(48, (any::<u64>(), 1usize..4, 1usize..4, 1usize..3), |(seed, s, d, o)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trajs: Vec<Trajectory> = (0..3).map(|i| random_trajectory(&mut rng, s, d + 1 + 3 * i)).collect();
        let pair = build_snapshot_pair(&trajs, &MonomialBasis::new(FeatureConfig::new(s, d, o).unwrap())).unwrap();
        let mut j = 0;
        for t in &trajs {
            for k in d..t.len() {
                // The first dS features are the delayed vector itself, newest first.
                for lag in 1..=d {
                    for n in 0..s {
                        prop_assert_eq!(pair.features[((lag - 1) * s + n, j)], t.state(k - lag)[n]);
                    }
                }
                let target: Vec<f64> = pair.targets.column(j).iter().copied().collect();
                prop_assert_eq!(&target[..], t.state(k));
                j += 1;
            }
        }
        prop_assert_eq!(j, pair.columns());
        Ok(())
    });
}

// ---- lstsq ----

fn instance(rng: &mut ChaCha8Rng) -> (DMatrix<f64>, DMatrix<f64>) {
    let l = rng.random_range(1..=6);
    let m = rng.random_range(1..=6);
    let s = rng.random_range(1..=6);
    let features = if rng.random_bool(0.4) {
        // Small integer factors make the product exactly rank deficient.
        let r = rng.random_range(1..=l.min(m));
        let int = |rng: &mut ChaCha8Rng, rows, cols| {
            DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-3i32..=3) as f64)
        };
        int(rng, l, r) * int(rng, r, m) / 8.0
    } else {
        random_matrix(rng, l, m)
    };
    (features, random_matrix(rng, s, m))
}

/// Agreement with the Jacobi pseudo-inverse oracle on `count` random
/// instances, about 40% of them rank deficient. Returns the worst relative
/// error seen.
pub fn lstsq_matches_oracle(count: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for i in 0..count {
        let (features, targets) = instance(&mut rng);
        let got = solve_min_frobenius(&features, &targets).unwrap().solution;
        let want = lstsq_oracle(&to_mat(&features), &to_mat(&targets));
        let err = frobenius_diff(&to_mat(&got), &want) / frobenius(&want).max(1e-300);
        assert!(err <= 1e-8, "instance {i}: relative error {err:e}\nfeatures {features}\ntargets {targets}");
        worst = worst.max(err);
    }
    worst
}

pub fn lstsq_oracle_agreement() {
    check(16, any::<u64>(), |seed| {
        lstsq_matches_oracle(25, seed);
        Ok(())
    });
}

pub fn lstsq_optimality_probe() {
    check(64, any::<u64>(), |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (features, targets) = instance(&mut rng);
        let lambda = solve_min_frobenius(&features, &targets).unwrap().solution;
        let base = (&lambda * &features - &targets).norm();
        for _ in 0..100 {
            let mut dir = random_matrix(&mut rng, lambda.nrows(), lambda.ncols());
            dir /= dir.norm();
            let probe = ((&lambda + dir * 1e-3) * &features - &targets).norm();
            prop_assert!(probe >= base - 1e-12, "probe {probe} below base {base}");
        }
        Ok(())
    });
}

pub fn lstsq_scaling_equivariance() {
    check(64, (any::<u64>(), prop_oneof![-10.0f64..-0.1, 0.1f64..10.0]), |(seed, c)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (features, targets) = instance(&mut rng);
        let a = solve_min_frobenius(&(&features * c), &targets).unwrap().solution;
        let b = solve_min_frobenius(&features, &targets).unwrap().solution / c;
        prop_assert!((&a - &b).norm() <= 1e-9 * b.norm().max(1e-12), "{a} vs {b}");
        Ok(())
    });
}

// ---- identify ----

pub fn exact_recovery() {
    // Linear maps with spectral norm below one, (d, o) = (1, 1).
    check(48, (any::<u64>(), 1usize..4), |(seed, s)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = random_matrix(&mut rng, s, s);
        let norm = a.norm();
        a *= 0.95 / norm.max(1e-12);
        let trajs: Vec<Trajectory> = (0..2)
            .map(|_| {
                let mut x = nalgebra::DVector::from_fn(s, |_, _| rng.random_range(-1.0..1.0));
                let mut data = Vec::new();
                for _ in 0..30 {
                    data.extend(x.iter());
                    x = &a * x;
                }
                Trajectory::from_flat(s, data, 1.0, 0.0, Provenance::Clean).unwrap()
            })
            .collect();
        let fit = train(&trajs, FeatureConfig::new(s, 1, 1).unwrap()).unwrap();
        let x_norm: f64 = trajs.iter().flat_map(|t| t.as_flat()[s..].iter()).map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(fit.operator.summary.residual_frobenius <= 1e-8 * x_norm);
        prop_assert!((fit.operator.lambda() - &a).norm() <= 1e-8);
        Ok(())
    });
    // A quadratic two-step recurrence, (d, o) = (2, 2).
    check(32, (-0.5f64..0.5, -0.5f64..0.5), |(x0, x1)| {
        let mut v = vec![x0, x1];
        for k in 2..40 {
            let next = 0.6 * v[k - 1] - 0.3 * v[k - 1] * v[k - 1] + 0.2 * v[k - 2] + 0.1 * v[k - 1] * v[k - 2];
            v.push(next);
        }
        let t = Trajectory::scalar(&v).unwrap();
        let fit = train(&[t], FeatureConfig::new(1, 2, 2).unwrap()).unwrap();
        let x_norm: f64 = v[2..].iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!(fit.operator.summary.residual_frobenius <= 1e-8 * x_norm);
        Ok(())
    });
}

pub fn duplicate_trajectory_invariance() {
    check(48, (any::<u64>(), 1usize..3, 1usize..3, 1usize..3), |(seed, s, d, o)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let config = FeatureConfig::new(s, d, o).unwrap();
        let l = config.dim();
        let a = random_trajectory(&mut rng, s, 2 * l + 10);
        let b = random_trajectory(&mut rng, s, l + 5);
        let once = train(&[a.clone(), b.clone()], config).unwrap().operator;
        let twice = train(&[a.clone(), b.clone(), a, b], config).unwrap().operator;
        prop_assert!((once.lambda() - twice.lambda()).norm() <= 1e-10 * once.lambda().norm().max(1.0));
        Ok(())
    });
}

// ---- predict ----

fn noisy_lho(seed: u64, k: usize) -> Vec<TrainingData> {
    let sys = BenchmarkSystem::new(SystemId::Lho);
    [[2.0, 0.0], [0.0, -2.0], [1.5, 1.5]]
        .iter()
        .enumerate()
        .map(|(i, ic)| {
            let clean = integrate(&sys, ic, (0.0, 10.0), k, &IntegratorSettings::default()).unwrap();
            TrainingData::with_reference(add_noise(&clean, 0.1, seed + i as u64), clean)
        })
        .collect()
}

pub fn prediction_determinism() {
    check(32, (any::<u64>(), 1usize..4, 1usize..3, 1usize..200), |(seed, d, o, steps)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let config = FeatureConfig::new(2, d, o).unwrap();
        let lambda = random_matrix(&mut rng, 2, config.dim()) * 0.3;
        let op = LearnedOperator::new(lambda, MonomialBasis::new(config), 0.1).unwrap();
        let seeds: Vec<f64> = (0..2 * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = predict_flat(&op, &seeds, d, steps, 0.0, 1e6).unwrap();
        let b = predict_flat(&op, &seeds, d, steps, 0.0, 1e6).unwrap();
        let bits = |p: &nldm::Prediction| p.trajectory.as_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a), bits(&b));
        prop_assert_eq!(a.diverged_at, b.diverged_at);
        prop_assert_eq!(&a.trajectory.as_flat()[..2 * d], &seeds[..]);
        Ok(())
    });
}

pub fn prediction_matches_training_score() {
    check(8, (any::<u64>(), 1usize..4, 1usize..3), |(seed, d, o)| {
        let data = noisy_lho(seed, 400);
        let fit = train_data(&data, FeatureConfig::new(2, d, o).unwrap()).unwrap();
        for (item, recorded) in data.iter().zip(&fit.per_trajectory_rrmse) {
            let pred = predict_like(&fit.operator, &item.observed).unwrap();
            let score = rrmse(&pred.trajectory, item.reference.as_ref().unwrap(), d).unwrap();
            prop_assert_eq!(score.mean_rrmse.to_bits(), recorded.to_bits());
        }
        Ok(())
    });
}

pub fn feature_ordering_invariance() {
    check(8, (any::<u64>(), 1usize..3), |(seed, d)| {
        let data = noisy_lho(seed, 400);
        let config = FeatureConfig::new(2, d, 2).unwrap();
        let canonical = MonomialBasis::new(config);
        let mut order = canonical.monomials().to_vec();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let shuffled = MonomialBasis::with_order(config, order).unwrap();
        let a = train_with_basis(&data, &canonical).unwrap().operator;
        let b = train_with_basis(&data, &shuffled).unwrap().operator;
        let seeds = &data[0].observed.as_flat()[..2 * d];
        let pa = predict_flat(&a, seeds, d, 300, 0.0, 1e6).unwrap();
        let pb = predict_flat(&b, seeds, d, 300, 0.0, 1e6).unwrap();
        let end = pa.diverged_at.or(pb.diverged_at).unwrap_or(pa.trajectory.len());
        for k in 0..end {
            for (x, y) in pa.trajectory.state(k).iter().zip(pb.trajectory.state(k)) {
                prop_assert!((x - y).abs() <= 1e-10, "step {k}: {x} vs {y}");
            }
        }
        Ok(())
    });
}

// ---- metrics ----

fn series_pair() -> impl Strategy<Value = (usize, usize, Vec<f64>, Vec<f64>)> {
    (1usize..4, 0usize..4, 8usize..60).prop_flat_map(|(s, d, k)| {
        (
            Just(s),
            Just(d),
            proptest::collection::vec(-10.0f64..10.0, s * k),
            proptest::collection::vec(-10.0f64..10.0, s * k),
        )
    })
}

fn traj(s: usize, data: Vec<f64>) -> Trajectory {
    Trajectory::from_flat(s, data, 0.5, 0.0, Provenance::Clean).unwrap()
}

pub fn rrmse_scale_invariance() {
    check(128, (series_pair(), prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3]), |((s, d, p, r), c)| {
        let base = rrmse(&traj(s, p.clone()), &traj(s, r.clone()), d).unwrap();
        let scaled = rrmse(
            &traj(s, p.iter().map(|v| v * c).collect()),
            &traj(s, r.iter().map(|v| v * c).collect()),
            d,
        )
        .unwrap();
        for (a, b) in base.per_state_rrmse.iter().zip(&scaled.per_state_rrmse) {
            prop_assert!(rel(*a, *b) <= 1e-12, "{a} vs {b}");
        }
        Ok(())
    });
}

pub fn rrmse_translation_invariance() {
    check(128, (series_pair(), -100.0f64..100.0), |((s, d, p, r), c)| {
        let base = rrmse(&traj(s, p.clone()), &traj(s, r.clone()), d).unwrap();
        let moved = rrmse(
            &traj(s, p.iter().map(|v| v + c).collect()),
            &traj(s, r.iter().map(|v| v + c).collect()),
            d,
        )
        .unwrap();
        for (a, b) in base.per_state_rrmse.iter().zip(&moved.per_state_rrmse) {
            prop_assert!(rel(*a, *b) <= 1e-9, "{a} vs {b}");
        }
        Ok(())
    });
}

pub fn rrmse_error_doubling() {
    check(128, (series_pair(), any::<prop::sample::Index>()), |((s, d, p, r), which)| {
        let n = which.index(s);
        let base = rrmse(&traj(s, p.clone()), &traj(s, r.clone()), d).unwrap();
        let inflated: Vec<f64> = p
            .iter()
            .zip(&r)
            .enumerate()
            .map(|(i, (pv, rv))| if i % s == n { rv + 2.0 * (pv - rv) } else { *pv })
            .collect();
        let doubled = rrmse(&traj(s, inflated), &traj(s, r.clone()), d).unwrap();
        for m in 0..s {
            let want = if m == n { 2.0 * base.per_state_rrmse[m] } else { base.per_state_rrmse[m] };
            prop_assert!(rel(doubled.per_state_rrmse[m], want) <= 1e-10);
        }
        Ok(())
    });
}

// ---- odes ----

pub fn lho_integrator_accuracy() {
    let sys = BenchmarkSystem::new(SystemId::Lho);
    let error = |rel_tol: f64, abs_tol: f64| {
        let settings = IntegratorSettings {
            rel_tol,
            abs_tol,
            ..IntegratorSettings::default()
        };
        let t = integrate(&sys, &[2.0, 0.5], (0.0, 10.0), 501, &settings).unwrap();
        (0..t.len())
            .map(|k| {
                let exact = lho_closed_form(1.0, 2.0, 0.5, t.time(k));
                (t.state(k)[0] - exact[0]).abs().max((t.state(k)[1] - exact[1]).abs())
            })
            .fold(0.0, f64::max)
    };
    let default = IntegratorSettings::default();
    let e_default = error(default.rel_tol, default.abs_tol);
    assert!(e_default <= 1e-7, "default-tolerance error {e_default:e}");
    for tol in [1e-4, 1e-5, 1e-6, 1e-7, 1e-8] {
        let coarse = error(tol, tol * 1e-3);
        let fine = error(tol / 2.0, tol * 0.5e-3);
        assert!(fine < coarse, "halving {tol:e}: {fine:e} !< {coarse:e}");
    }
}

pub fn dnls_energy_monotone() {
    check(32, (-2.0f64..2.0, -2.0f64..2.0, 0.1f64..2.0), |(x0, y0, delta)| {
        let sys = BenchmarkSystem::new(SystemId::Dnls).with_param("delta", delta).unwrap();
        let t = integrate(&sys, &[x0, y0], (0.0, 10.0), 500, &IntegratorSettings::default()).unwrap();
        let v = |x: &[f64]| x[0].powi(4) / 4.0 + x[1] * x[1] / 2.0;
        for k in 1..t.len() {
            prop_assert!(v(t.state(k)) <= v(t.state(k - 1)) + 1e-9, "energy rose at step {k}");
        }
        Ok(())
    });
}

pub fn equilibrium_fidelity() {
    use nldm::odes::AttractorKind;
    for id in SystemId::ALL {
        let sys = BenchmarkSystem::new(id);
        for a in sys.attractors() {
            if let AttractorKind::Point(p) = &a.kind {
                let mut dx = vec![0.0; p.len()];
                sys.rhs(p, &mut dx);
                let worst = dx.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                assert!(worst <= 1e-12, "{id} {}: |f| = {worst:e}", a.name);
            }
        }
    }
    let dw = BenchmarkSystem::new(SystemId::DoubleWell);
    let xs: Vec<f64> = dw
        .attractors()
        .iter()
        .filter_map(|a| match &a.kind {
            AttractorKind::Point(p) => Some(p[0]),
            _ => None,
        })
        .collect();
    assert!(xs.iter().any(|x| (x - 0.5427).abs() < 1e-4));
    assert!(xs.iter().any(|x| (x + 1.8427).abs() < 1e-4));
}

pub fn noise_reproducibility() {
    let sys = BenchmarkSystem::new(SystemId::TwoAttractor);
    let clean = integrate(&sys, &[0.5, 1.0], (0.0, 5.0), 300, &IntegratorSettings::default()).unwrap();
    check(64, (any::<u64>(), 0.0f64..5.0), |(seed, sigma)| {
        let a = add_noise(&clean, sigma, seed);
        let b = add_noise(&clean, sigma, seed);
        let bits = |t: &Trajectory| t.as_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a), bits(&b));
        Ok(())
    });
}

// ---- basin ----

pub fn basin_symmetry() {
    let sys = BenchmarkSystem::new(SystemId::TwoAttractor);
    let n = 21;
    let grid = ground_truth_grid(&sys, &BasinWindow::square(2.0), n, 30.0, 3001, CaptureRule::default(), &IntegratorSettings::default()).unwrap();
    let mirror = |l: CellLabel| match l {
        CellLabel::Attractor(0) => CellLabel::Attractor(1),
        CellLabel::Attractor(1) => CellLabel::Attractor(0),
        other => other,
    };
    for iy in 0..n {
        for ix in 0..n {
            if ix == n / 2 {
                continue;
            }
            assert_eq!(grid.label(ix, iy), mirror(grid.label(n - 1 - ix, iy)), "cell ({ix}, {iy})");
            let want = if ix < n / 2 { CellLabel::Attractor(0) } else { CellLabel::Attractor(1) };
            assert_eq!(grid.label(ix, iy), want);
        }
    }
}

fn two_attractor_operator() -> LearnedOperator {
    let sys = BenchmarkSystem::new(SystemId::TwoAttractor);
    let trajs: Vec<Trajectory> = [[-2.0, 2.0], [-0.5, -2.0], [2.0, 2.0], [0.5, -2.0]]
        .iter()
        .map(|ic| integrate(&sys, ic, (0.0, 10.0), 1000, &IntegratorSettings::default()).unwrap())
        .collect();
    train(&trajs, FeatureConfig::new(2, 1, 3).unwrap()).unwrap().operator
}

pub fn basin_refinement() {
    let sys = BenchmarkSystem::new(SystemId::DualLimitCycle);
    let window = BasinWindow::square(3.0);
    let rule = CaptureRule::default();
    let settings = IntegratorSettings::default();
    let coarse = ground_truth_grid(&sys, &window, 7, 30.0, 3001, rule, &settings).unwrap();
    let fine = ground_truth_grid(&sys, &window, 13, 30.0, 3001, rule, &settings).unwrap();
    for iy in 0..7 {
        for ix in 0..7 {
            assert_eq!(coarse.point(ix, iy), fine.point(2 * ix, 2 * iy));
            assert_eq!(coarse.label(ix, iy), fine.label(2 * ix, 2 * iy), "truth cell ({ix}, {iy})");
        }
    }
    let sys = BenchmarkSystem::new(SystemId::TwoAttractor);
    let op = two_attractor_operator();
    let coarse = operator_grid(&op, &sys, &window, 9, 500, rule).unwrap();
    let fine = operator_grid(&op, &sys, &window, 17, 500, rule).unwrap();
    for iy in 0..9 {
        for ix in 0..9 {
            assert_eq!(coarse.label(ix, iy), fine.label(2 * ix, 2 * iy), "operator cell ({ix}, {iy})");
        }
    }
}

pub fn basin_cell_isolation() {
    let sys = BenchmarkSystem::new(SystemId::TwoAttractor);
    let op = two_attractor_operator();
    let rule = CaptureRule::default();
    let n = 15;
    let grid = operator_grid(&op, &sys, &BasinWindow::square(3.0), n, 500, rule).unwrap();
    let attractors = sys.attractors();
    for iy in 0..n {
        for ix in 0..n {
            let (x, y) = grid.point(ix, iy);
            assert_eq!(operator_cell(&op, &attractors, &[x, y], 500, rule), grid.label(ix, iy));
        }
    }
}

// ---- cli ----

fn series_strategy(s: usize, t_span: [f64; 2], k: usize) -> impl Strategy<Value = SeriesConfig> {
    (
        proptest::collection::vec(-5.0f64..5.0, s),
        proptest::option::of((0.0f64..1.0, proptest::option::of(any::<u64>()))),
    )
        .prop_map(move |(ic, noise)| SeriesConfig {
            ic: Some(ic),
            t_span: Some(t_span),
            num_samples: Some(k),
            noise: noise.map(|(sigma_pct, seed)| NoiseConfig { sigma_pct, seed }),
            ..SeriesConfig::default()
        })
}

fn config_strategy() -> impl Strategy<Value = ExperimentConfig> {
    (
        prop::sample::select(SystemId::ALL.to_vec()),
        1usize..5,
        1usize..4,
        any::<u64>(),
        (0.0f64..5.0, 1.0f64..20.0, 10usize..3000),
    )
        .prop_flat_map(|(id, delay, degree, global_seed, (t0, len, k))| {
            let s = id.state_dim();
            let span = [t0, t0 + len];
            (
                Just((id, delay, degree, global_seed)),
                proptest::collection::vec(series_strategy(s, span, k), 1..4),
                proptest::collection::vec(series_strategy(s, span, k), 0..3),
                proptest::option::of("[a-z_]{1,12}"),
            )
        })
        .prop_map(|((id, delay, degree, global_seed), train, test, name)| ExperimentConfig {
            name,
            global_seed,
            output_dir: format!("out/{}", id.name()).into(),
            divergence_threshold: 1e6,
            system: SystemConfig {
                id,
                params: Default::default(),
            },
            model: ModelConfig { delay, degree },
            integrator: IntegratorSettings::default(),
            train,
            test,
            basin: None,
        })
}

pub fn config_round_trip() {
    check(64, config_strategy(), |cfg| {
        let text = cfg.to_toml_string().unwrap();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_toml_string().unwrap(), text);
        Ok(())
    });
}

fn lho_run_config(out: &Path) -> String {
    format!(
        r#"
global_seed = 11
output_dir = "{}"

[system]
id = "lho"

[model]
delay = 2
degree = 1

[[train]]
ic = [2.0, 0.0]
t_span = [0.0, 5.0]
num_samples = 200
noise = {{ sigma_pct = 0.5 }}

[[train]]
ic = [0.0, -2.0]
t_span = [0.0, 5.0]
num_samples = 200
noise = {{ sigma_pct = 0.5, seed = 77 }}

[[test]]
ic = [1.0, 1.0]
t_span = [0.0, 5.0]
num_samples = 200
noise = {{ sigma_pct = 0.2 }}

[basin]
x_range = [-2.0, 2.0]
y_range = [-2.0, 2.0]
resolution = 4
steps = 300
"#,
        out.display()
    )
}

/// Runs the CLI on a small LHO config inside a fresh directory.
pub fn run_lho_cli(dir: &Path, command: &str) -> i32 {
    let out = dir.join("out");
    let config = dir.join("lho.toml");
    std::fs::write(&config, lho_run_config(&out)).unwrap();
    nldm::cli::main_with_args(["nldm", command, "--config", config.to_str().unwrap()])
}

pub fn manifest_completeness() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_lho_cli(dir.path(), "run"), 0);
    let out = dir.path().join("out");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let seeds = manifest["noise_seeds"].as_array().unwrap();
    assert_eq!(seeds.len(), 3, "one seed per noisy entry");
    for entry in seeds {
        let stage = entry["stage"].as_str().unwrap();
        let index = entry["index"].as_u64().unwrap() as usize;
        let seed = entry["seed"].as_u64().unwrap();
        let sigma = manifest["config"][stage][index]["noise"]["sigma_pct"].as_f64().unwrap();
        let clean = read_trajectory_csv(&out.join(format!("trajectories/{stage}_{index:02}_clean.csv")), Provenance::Clean).unwrap();
        let noisy = read_trajectory_csv(&out.join(format!("trajectories/{stage}_{index:02}_noisy.csv")), Provenance::Clean).unwrap();
        let redone = add_noise(&clean, sigma, seed);
        assert_eq!(redone.as_flat(), noisy.as_flat(), "{stage}[{index}] not reproducible from its recorded seed");
    }
    assert_eq!(seeds[1]["seed"].as_u64(), Some(77));
    for artifact in manifest["artifacts"].as_array().unwrap() {
        assert!(out.join(artifact.as_str().unwrap()).exists(), "missing {artifact}");
    }
}

fn is_full_precision(field: &str) -> bool {
    // d.dddddddddddddddde[+-]x : 17 significant digits
    let mantissa = field.trim_start_matches('-').split('e').next().unwrap_or("");
    field.contains('e') && mantissa.len() == 18 && mantissa.as_bytes()[1] == b'.'
}

pub fn csv_schema_stability() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_lho_cli(dir.path(), "run"), 0);
    let out = dir.path().join("out");
    for name in ["trajectories/train_00_noisy.csv", "trajectories/test_00_clean.csv", "predictions/test_00_predicted.csv"] {
        let text = std::fs::read_to_string(out.join(name)).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,x1,x2"), "{name}");
        for line in lines {
            for field in line.split(',') {
                assert!(is_full_precision(field), "{name}: `{field}`");
            }
        }
    }
    let raster = std::fs::read_to_string(out.join("basin/truth.csv")).unwrap();
    let mut lines = raster.lines();
    assert_eq!(lines.next(), Some("x,y,label"));
    assert_eq!(lines.count(), 16);
}
