//! Monte Carlo estimation of sufficient-statistic moments, and symmetric
//! square-root factors for whitening.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::glauber::{sample_batch, ChainConfig};
use crate::model::IsingParameters;
use crate::samples::SampleSet;
use crate::suffstats::SuffStatSpec;

/// Budget for a moment-estimation run, in statistic entries (`n * dim(T)`).
pub const MOMENT_BUDGET_ENTRIES: usize = 100_000_000;

/// Empirical mean and covariance of the sufficient statistics.
#[derive(Debug, Clone)]
pub struct MomentEstimate {
    pub mean: DVector<f64>,
    /// Symmetric positive semidefinite (eigenvalues clamped at zero).
    pub cov: DMatrix<f64>,
    pub n_used: usize,
    pub gamma_used: f64,
}

/// Statistic images of a sample set, one point per column.
pub fn suffstat_matrix(spec: &SuffStatSpec, samples: &SampleSet) -> Result<DMatrix<f64>> {
    if samples.dim() != spec.spin_dim() {
        return Err(Error::Dimension(format!(
            "samples have dimension {}, spec expects {}",
            samples.dim(),
            spec.spin_dim()
        )));
    }
    let k = spec.dim();
    let n = samples.len();
    let mut out = DMatrix::zeros(k, n);
    for (c, row) in samples.rows().enumerate() {
        spec.write_stats(row, &mut out.column_mut(c).as_mut_slice()[..]);
    }
    Ok(out)
}

/// Mean and covariance of the columns of `points` (1/n normalization),
/// accumulated in a fixed order.
pub fn empirical_moments(points: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let k = points.nrows();
    let n = points.ncols();
    assert!(n > 0, "empty point set");
    let mut mean = DVector::zeros(k);
    for c in 0..n {
        mean += points.column(c);
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(k, k);
    let mut centered = DVector::zeros(k);
    for c in 0..n {
        centered.copy_from(&points.column(c));
        centered -= &mean;
        let cs = centered.as_slice();
        // Accumulate the lower triangle; column `a` of the column-major
        // storage holds entries (a.., a) contiguously.
        for a in 0..k {
            let ca = cs[a];
            let col = &mut cov.as_mut_slice()[a * k..(a + 1) * k];
            for b in a..k {
                col[b] += ca * cs[b];
            }
        }
    }
    cov /= n as f64;
    cov.fill_upper_triangle_with_lower_triangle();
    (mean, cov)
}

/// Draw `n` near-independent samples from the model at chain accuracy
/// `gamma` and return the empirical moments of their statistics. Covariance
/// eigenvalues are clamped at zero.
pub fn estimate_moments(
    params: &IsingParameters,
    spec: &SuffStatSpec,
    n: usize,
    gamma: f64,
    master_seed: u64,
) -> Result<MomentEstimate> {
    let chain = ChainConfig::new(gamma, 20.0, master_seed)?;
    estimate_moments_with_chain(params, spec, n, &chain)
}

/// [`estimate_moments`] with full control of the chain configuration.
pub fn estimate_moments_with_chain(
    params: &IsingParameters,
    spec: &SuffStatSpec,
    n: usize,
    chain: &ChainConfig,
) -> Result<MomentEstimate> {
    if n < 2 {
        return Err(Error::Parameter(format!("need at least 2 samples, got {n}")));
    }
    let k = spec.dim();
    if n.saturating_mul(k) > MOMENT_BUDGET_ENTRIES {
        return Err(Error::Capacity(format!(
            "{n} samples of dimension {k} exceed the {MOMENT_BUDGET_ENTRIES}-entry budget"
        )));
    }
    let samples = sample_batch(params, n, chain)?;
    estimate_moments_of_samples(&samples, spec, chain.gamma)
}

/// Empirical moments of an existing sample set's statistics.
pub fn estimate_moments_of_samples(
    samples: &SampleSet,
    spec: &SuffStatSpec,
    gamma_used: f64,
) -> Result<MomentEstimate> {
    let points = suffstat_matrix(spec, samples)?;
    let (mean, cov) = empirical_moments(&points);
    let cov = clamp_psd(cov);
    Ok(MomentEstimate { mean, cov, n_used: samples.len(), gamma_used })
}

/// Symmetrize and clamp negative eigenvalues to zero.
pub fn clamp_psd(mut cov: DMatrix<f64>) -> DMatrix<f64> {
    let k = cov.nrows();
    for a in 0..k {
        for b in (a + 1)..k {
            let s = 0.5 * (cov[(a, b)] + cov[(b, a)]);
            cov[(a, b)] = s;
            cov[(b, a)] = s;
        }
    }
    let eig = cov.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l < 0.0) {
        let mut rebuilt = DMatrix::zeros(k, k);
        for (idx, &l) in eig.eigenvalues.iter().enumerate() {
            if l > 0.0 {
                let q = eig.eigenvectors.column(idx);
                rebuilt.syger(l, &q, &q, 1.0);
            }
        }
        rebuilt.fill_upper_triangle_with_lower_triangle();
        rebuilt
    } else {
        cov
    }
}

/// Symmetric factors `(cov^{-1/2}, cov^{1/2})` with eigenvalues clamped
/// below at `floor` before the square roots are taken.
pub fn whiten_factor(cov: &DMatrix<f64>, floor: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    assert!(floor > 0.0, "eigenvalue floor must be positive");
    let k = cov.nrows();
    let eig = cov.clone().symmetric_eigen();
    let mut inv_sqrt = DMatrix::zeros(k, k);
    let mut sqrt = DMatrix::zeros(k, k);
    for (idx, &l) in eig.eigenvalues.iter().enumerate() {
        let l = l.max(floor);
        let q = eig.eigenvectors.column(idx);
        inv_sqrt.syger(1.0 / l.sqrt(), &q, &q, 1.0);
        sqrt.syger(l.sqrt(), &q, &q, 1.0);
    }
    inv_sqrt.fill_upper_triangle_with_lower_triangle();
    sqrt.fill_upper_triangle_with_lower_triangle();
    (inv_sqrt, sqrt)
}
