//! The time-delayed polynomial feature map: basis size, ordering and lifting.

use nldm::{build_snapshot_pair, delayed_state, feature_dim, FeatureConfig, MonomialBasis, Trajectory};

pub fn run_example() -> nldm::Result<()> {
    println!("feature dimension L = C(dS + o, o) - 1");
    println!("{:>3} {:>3} {:>3} {:>6}", "S", "d", "o", "L");
    for (s, d, o) in [(1, 1, 3), (2, 1, 1), (2, 2, 1), (2, 2, 2), (2, 2, 3), (2, 4, 3), (3, 3, 2)] {
        println!("{s:>3} {d:>3} {o:>3} {:>6}", feature_dim(s, d, o)?);
    }

    // S = 2, d = 2, o = 2 gives the 14 monomials of degree 1 and 2 in
    // x1[k-1], x2[k-1], x1[k-2], x2[k-2].
    let config = FeatureConfig::new(2, 2, 2)?;
    let basis = MonomialBasis::new(config);
    println!("\nbasis for S=2, d=2, o=2:\n{basis}");

    let traj = Trajectory::new(
        vec![[1.0, 2.0].into(), [3.0, 4.0].into(), [5.0, 6.0].into()],
        0.1,
        0.0,
        nldm::Provenance::Clean,
    )?;
    let delayed = delayed_state(&traj, 2, 2)?;
    let lifted = basis.lift(&delayed)?;
    println!("delayed state at k=2 (newest first): {delayed:?}");
    for (m, v) in basis.monomials().iter().zip(&lifted) {
        println!("  {:<22} = {v}", m.describe(2));
    }

    let pair = build_snapshot_pair(&[traj], &basis)?;
    println!(
        "\nsnapshot pair from one 3-sample trajectory: {} column(s), Upsilon is {}x{}",
        pair.columns(),
        pair.features.nrows(),
        pair.features.ncols()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> nldm::Result<()> {
    run_example()
}
