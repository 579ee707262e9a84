//! Minimum-norm least squares for `Lambda ~ X Upsilon^+`.
//!
//! The problem `min ||Lambda Upsilon - X||_F` decouples into one ordinary
//! least-squares problem per state row. We solve all of them at once from a
//! thin SVD of `Upsilon^T` (M x L), computed by faer. Singular values at or below
//! `eps * sigma_max * max(L, M)` are treated as zero, which selects the
//! minimum-Frobenius-norm minimizer when `Upsilon` is rank deficient.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct LstsqReport {
    #[serde(skip)]
    pub solution: DMatrix<f64>,
    pub residual_frobenius: f64,
    pub effective_rank: usize,
    pub truncated_singular_values: usize,
    pub sigma_max: f64,
    pub threshold: f64,
}

/// Rank cutoff for singular values of an `rows x cols` matrix.
pub fn rank_threshold(sigma_max: f64, rows: usize, cols: usize) -> f64 {
    f64::EPSILON * sigma_max * rows.max(cols) as f64
}

/// Solves `min ||Lambda * features - targets||_F` for `Lambda` (S x L) with
/// the pseudo-inverse solution.
pub fn solve_min_frobenius(features: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<LstsqReport> {
    let (l, m) = features.shape();
    let s = targets.nrows();
    if m == 0 {
        return Err(Error::InvalidArgument("least squares needs M >= 1 columns".into()));
    }
    if targets.ncols() != m {
        return Err(Error::Dimension(format!(
            "features have {m} columns, targets have {}",
            targets.ncols()
        )));
    }
    if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "feature matrix entry ({}, {})",
            pos % l,
            pos / l
        )));
    }
    if let Some(pos) = targets.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "target matrix entry ({}, {})",
            pos % s.max(1),
            pos / s.max(1)
        )));
    }

    let full = l.min(m);
    if features.iter().all(|&v| v == 0.0) {
        return Ok(LstsqReport {
            solution: DMatrix::zeros(s, l),
            residual_frobenius: targets.norm(),
            effective_rank: 0,
            truncated_singular_values: full,
            sigma_max: 0.0,
            threshold: 0.0,
        });
    }

    // Thin SVD of the M x L design matrix Upsilon^T.
    let design = faer::Mat::<f64>::from_fn(m, l, |i, j| features[(j, i)]);
    let svd = design
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("SVD did not converge: {e:?}")))?;
    let (u, v) = (svd.U(), svd.V());
    let sigma = svd.S().column_vector();

    let sigma_max = sigma.iter().cloned().fold(0.0, f64::max);
    let threshold = rank_threshold(sigma_max, l, m);

    // Z = V * diag(1/sigma) * U^T * X^T, restricted to the kept singular triplets.
    let mut z = DMatrix::<f64>::zeros(l, s);
    let mut rank = 0;
    for (i, &sv) in sigma.iter().enumerate() {
        if sv <= threshold {
            continue;
        }
        rank += 1;
        for n in 0..s {
            let coeff = (0..m).map(|k| u[(k, i)] * targets[(n, k)]).sum::<f64>() / sv;
            for j in 0..l {
                z[(j, n)] += v[(j, i)] * coeff;
            }
        }
    }

    let solution = z.transpose();
    let residual_frobenius = (&solution * features - targets).norm();
    Ok(LstsqReport {
        solution,
        residual_frobenius,
        effective_rank: rank,
        truncated_singular_values: full - rank,
        sigma_max,
        threshold,
    })
}
