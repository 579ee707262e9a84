use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::types::{Provenance, Trajectory};

/// Adds i.i.d. Gaussian noise to every channel with standard deviation
/// `sigma_pct / 100` times that channel's clean range (max - min).
///
/// Channels are filled one after another from a single ChaCha8 stream, so
/// the same seed always reproduces the same noisy series.
pub fn add_noise(traj: &Trajectory, sigma_pct: f64, seed: u64) -> Trajectory {
    assert!(sigma_pct >= 0.0, "sigma_pct must be non-negative");
    let provenance = Provenance::Noisy { sigma_pct, seed };
    let s = traj.state_dim();
    let mut data = traj.as_flat().to_vec();
    if sigma_pct == 0.0 {
        return traj.map_flat(data, provenance);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for n in 0..s {
        let (lo, hi) = traj
            .channel(n)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let sigma = sigma_pct / 100.0 * (hi - lo);
        if !(sigma > 0.0) {
            continue;
        }
        for v in data.iter_mut().skip(n).step_by(s) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += sigma * z;
        }
    }
    traj.map_flat(data, provenance)
}
