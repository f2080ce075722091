//! Brute-force oracle for small dimension: exact partition value, moments,
//! sufficient-statistic covariance, and total variation distance, computed by
//! summing over all `2^d` states with log-sum-exp stabilization.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{n_pairs, pair_index, IsingParameters};

/// Default dimension cap for enumeration.
pub const ENUM_CAP_DEFAULT: usize = 12;
/// Hard dimension cap; above this, enumeration is refused outright.
pub const ENUM_CAP_HARD: usize = 16;

/// Exact quantities of a small model, all computed by full enumeration.
#[derive(Debug, Clone)]
pub struct ExactSummary {
    /// Log-partition value.
    pub log_z: f64,
    /// Site means `E[X_i]`.
    pub mean: DVector<f64>,
    /// Second moments `E[X_i X_j]` (unit diagonal).
    pub pair_moments: DMatrix<f64>,
    /// Mean of the pair statistics in the canonical upper-triangle order.
    pub suffstat_mean: DVector<f64>,
    /// Covariance of the pair statistics in the same order.
    pub suffstat_cov: DMatrix<f64>,
}

fn check_cap(d: usize, cap: usize) -> Result<()> {
    let cap = cap.min(ENUM_CAP_HARD);
    if d > cap {
        return Err(Error::Capacity(format!(
            "enumeration over 2^{d} states exceeds cap {cap} (hard cap {ENUM_CAP_HARD})"
        )));
    }
    Ok(())
}

/// Write the spin configuration encoded by `mask` into `x`.
#[inline]
pub fn decode_state(mask: usize, x: &mut [i8]) {
    for (i, xi) in x.iter_mut().enumerate() {
        *xi = if mask >> i & 1 == 1 { 1 } else { -1 };
    }
}

/// Exact probabilities of all `2^d` states, indexed by bit mask
/// (bit `i` set means `x_i = +1`). Also returns the log-partition value.
pub fn exact_probabilities(params: &IsingParameters) -> Result<(Vec<f64>, f64)> {
    let d = params.dim();
    check_cap(d, ENUM_CAP_HARD)?;
    let n = 1usize << d;
    let mut x = vec![0i8; d];
    let mut logw = Vec::with_capacity(n);
    let mut max = f64::NEG_INFINITY;
    for mask in 0..n {
        decode_state(mask, &mut x);
        let lw = params.unnormalized_log_density(&x)?;
        max = max.max(lw);
        logw.push(lw);
    }
    let mut total = 0.0;
    for lw in &mut logw {
        *lw = (*lw - max).exp();
        total += *lw;
    }
    let log_z = max + total.ln();
    for w in &mut logw {
        *w /= total;
    }
    Ok((logw, log_z))
}

/// Full enumeration summary. Refuses dimensions above `cap` (clamped to the
/// hard cap).
pub fn exact_summary_capped(params: &IsingParameters, cap: usize) -> Result<ExactSummary> {
    let d = params.dim();
    check_cap(d, cap)?;
    let (probs, log_z) = exact_probabilities(params)?;
    let k = n_pairs(d);
    let mut mean: DVector<f64> = DVector::zeros(d);
    let mut pair_moments: DMatrix<f64> = DMatrix::zeros(d, d);
    let mut t_mean: DVector<f64> = DVector::zeros(k);
    let mut t_second: DMatrix<f64> = DMatrix::zeros(k, k);
    let mut x = vec![0i8; d];
    let mut t = vec![0.0f64; k];
    for (mask, &p) in probs.iter().enumerate() {
        decode_state(mask, &mut x);
        for i in 0..d {
            let xi = f64::from(x[i]);
            mean[i] += p * xi;
            for j in i..d {
                pair_moments[(i, j)] += p * xi * f64::from(x[j]);
            }
            for j in (i + 1)..d {
                t[pair_index(d, i, j)] = xi * f64::from(x[j]);
            }
        }
        for a in 0..k {
            t_mean[a] += p * t[a];
            for b in a..k {
                t_second[(a, b)] += p * t[a] * t[b];
            }
        }
    }
    for i in 0..d {
        for j in (i + 1)..d {
            pair_moments[(j, i)] = pair_moments[(i, j)];
        }
    }
    let mut cov = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let c = t_second[(a, b)] - t_mean[a] * t_mean[b];
            cov[(a, b)] = c;
            cov[(b, a)] = c;
        }
    }
    Ok(ExactSummary { log_z, mean, pair_moments, suffstat_mean: t_mean, suffstat_cov: cov })
}

/// [`exact_summary_capped`] at the default cap.
pub fn exact_summary(params: &IsingParameters) -> Result<ExactSummary> {
    exact_summary_capped(params, ENUM_CAP_DEFAULT)
}

/// Exact total variation distance between two models of the same dimension.
pub fn exact_tv(p1: &IsingParameters, p2: &IsingParameters) -> Result<f64> {
    if p1.dim() != p2.dim() {
        return Err(Error::Dimension(format!(
            "dimension mismatch: {} vs {}",
            p1.dim(),
            p2.dim()
        )));
    }
    check_cap(p1.dim(), ENUM_CAP_HARD)?;
    let (a, _) = exact_probabilities(p1)?;
    let (b, _) = exact_probabilities(p2)?;
    let sum: f64 = a.iter().zip(&b).map(|(pa, pb)| (pa - pb).abs()).sum();
    Ok(0.5 * sum)
}

/// Exact mean and covariance of an arbitrary statistic `t_fn` (writing its
/// `dim_t` values into the provided buffer) under the model.
pub fn exact_moments_of<F>(
    params: &IsingParameters,
    dim_t: usize,
    mut t_fn: F,
) -> Result<(DVector<f64>, DMatrix<f64>)>
where
    F: FnMut(&[i8], &mut [f64]),
{
    let d = params.dim();
    check_cap(d, ENUM_CAP_HARD)?;
    let (probs, _) = exact_probabilities(params)?;
    let mut x = vec![0i8; d];
    let mut t = vec![0.0f64; dim_t];
    let mut mean: DVector<f64> = DVector::zeros(dim_t);
    let mut second: DMatrix<f64> = DMatrix::zeros(dim_t, dim_t);
    for (mask, &p) in probs.iter().enumerate() {
        decode_state(mask, &mut x);
        t_fn(&x, &mut t);
        for a in 0..dim_t {
            mean[a] += p * t[a];
            for b in a..dim_t {
                second[(a, b)] += p * t[a] * t[b];
            }
        }
    }
    let mut cov: DMatrix<f64> = DMatrix::zeros(dim_t, dim_t);
    for a in 0..dim_t {
        for b in a..dim_t {
            let c = second[(a, b)] - mean[a] * mean[b];
            cov[(a, b)] = c;
            cov[(b, a)] = c;
        }
    }
    Ok((mean, cov))
}

/// Exact expectation of a scalar function of the state.
pub fn exact_expectation<F>(params: &IsingParameters, mut f: F) -> Result<f64>
where
    F: FnMut(&[i8]) -> f64,
{
    let d = params.dim();
    check_cap(d, ENUM_CAP_HARD)?;
    let (probs, _) = exact_probabilities(params)?;
    let mut x = vec![0i8; d];
    let mut acc = 0.0;
    for (mask, &p) in probs.iter().enumerate() {
        decode_state(mask, &mut x);
        acc += p * f(&x);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn two_site(beta: f64) -> IsingParameters {
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 1)] = beta;
        m[(1, 0)] = beta;
        IsingParameters::new(m, DVector::zeros(2)).unwrap()
    }

    #[test]
    fn uniform_summary() {
        let s = exact_summary(&IsingParameters::zeros(3)).unwrap();
        assert_relative_eq!(s.log_z, 3.0 * std::f64::consts::LN_2, epsilon = 1e-12);
        assert!(s.mean.amax() < 1e-12);
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(s.pair_moments[(i, j)], expected, epsilon = 1e-12);
            }
        }
        // Pair statistics of independent signs are uncorrelated with unit variance.
        for a in 0..3 {
            for b in 0..3 {
                let expected = if a == b { 1.0 } else { 0.0 };
                assert_relative_eq!(s.suffstat_cov[(a, b)], expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn two_site_correlation_is_tanh() {
        let s = exact_summary(&two_site(0.3)).unwrap();
        assert_relative_eq!(s.pair_moments[(0, 1)], 0.3f64.tanh(), epsilon = 1e-12);
        assert_relative_eq!(s.suffstat_mean[0], 0.3f64.tanh(), epsilon = 1e-12);
    }

    #[test]
    fn single_site_field() {
        let p = IsingParameters::new(DMatrix::zeros(1, 1), DVector::from_vec(vec![0.7])).unwrap();
        let s = exact_summary(&p).unwrap();
        assert_relative_eq!(s.log_z, (2.0 * 0.7f64.cosh()).ln(), epsilon = 1e-12);
        assert_relative_eq!(s.mean[0], 0.7f64.tanh(), epsilon = 1e-12);
    }

    #[test]
    fn probabilities_normalize() {
        let p = two_site(1.7);
        let (probs, log_z) = exact_probabilities(&p).unwrap();
        let total: f64 = probs.iter().sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-9);
        // Consistency of log_z with the unnormalized density.
        let mut x = vec![0i8; 2];
        let mut acc = 0.0;
        for mask in 0..4 {
            decode_state(mask, &mut x);
            acc += (p.unnormalized_log_density(&x).unwrap() - log_z).exp();
        }
        assert_relative_eq!(acc, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn tv_values() {
        let a = two_site(0.4);
        assert_eq!(exact_tv(&a, &a).unwrap(), 0.0);

        // One site, field h vs zero: TV = tanh(h)/2.
        let h = IsingParameters::new(DMatrix::zeros(1, 1), DVector::from_vec(vec![0.5])).unwrap();
        let z = IsingParameters::zeros(1);
        assert_relative_eq!(exact_tv(&h, &z).unwrap(), 0.5f64.tanh() / 2.0, epsilon = 1e-12);
        assert_relative_eq!(
            exact_tv(&h, &z).unwrap(),
            exact_tv(&z, &h).unwrap(),
            epsilon = 1e-15
        );

        assert!(matches!(
            exact_tv(&z, &IsingParameters::zeros(2)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn cap_is_enforced() {
        let p = IsingParameters::zeros(13);
        assert!(matches!(exact_summary(&p), Err(Error::Capacity(_))));
        assert!(exact_summary_capped(&p, 16).is_ok());
        let q = IsingParameters::zeros(17);
        assert!(matches!(exact_summary_capped(&q, 32), Err(Error::Capacity(_))));
    }
}
