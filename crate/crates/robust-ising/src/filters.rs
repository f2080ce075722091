//! Robust mean estimation by iterative spectral filtering.
//!
//! Two estimators over point sets (one point per matrix column):
//!
//! - [`robust_mean_bounded_cov`]: for distributions with covariance bounded
//!   by `sigma^2 I`. Soft downweighting along the top covariance direction
//!   until the top eigenvalue passes the classic factor-9 stopping rule;
//!   accuracy `O(sigma sqrt(eps))` on eps-corrupted data.
//! - [`robust_mean_near_identity`]: for sub-exponential data whose
//!   covariance is within `tau` of the identity in spectral norm. Filters on
//!   `Sigma - I` with a tighter stopping rule; large outliers are removed by
//!   sub-exponential tail thresholding, and corruption hiding inside the
//!   bulk (where no tail threshold can certify removal) falls back to the
//!   same score-based downweighting as the bounded-covariance filter. The
//!   accuracy target is `O(sqrt(tau eps) + eps log(1/eps))`.
//!
//! Both filters are deterministic: scores come from a power iteration with a
//! fixed start, and all reductions run in index order.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Observability record for one filter run.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FilterDiagnostics {
    pub rounds: usize,
    /// Fraction of total weight removed, in `[0, 1]`.
    pub mass_removed: f64,
    /// Top eigenvalue (bounded-covariance) or spectral deviation from the
    /// identity (near-identity) at the final round.
    pub final_top_eigenvalue: f64,
    pub threshold_used: f64,
}

/// Constants of the bounded-covariance filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundedCovConfig {
    /// Stop once the top weighted eigenvalue is at most `stop_factor * sigma^2`.
    pub stop_factor: f64,
    /// Round cap, in multiples of the ambient dimension.
    pub max_rounds_per_dim: usize,
}

impl Default for BoundedCovConfig {
    fn default() -> Self {
        Self { stop_factor: 9.0, max_rounds_per_dim: 5 }
    }
}

/// Constants of the near-identity filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearIdentityConfig {
    /// Stop once `||Sigma_w - I||_2 <= stop_factor * (tau + eps ln(1/eps))`.
    pub stop_factor: f64,
    /// Smallest admissible tail threshold.
    pub tail_floor: f64,
    /// Coefficient of the certified tail bound `tail_coeff * exp(-T/tail_rate)`.
    pub tail_coeff: f64,
    pub tail_rate: f64,
    /// Enable score downweighting when no tail threshold certifies removal.
    pub within_ball_downweight: bool,
    pub max_rounds_per_dim: usize,
}

impl Default for NearIdentityConfig {
    fn default() -> Self {
        Self {
            stop_factor: 20.0,
            tail_floor: 10.0,
            tail_coeff: 6.0,
            tail_rate: 3.0,
            within_ball_downweight: true,
            max_rounds_per_dim: 5,
        }
    }
}

/// `x ln(1/x)` extended by continuity at zero.
pub fn eps_log_term(eps: f64) -> f64 {
    if eps <= 0.0 {
        0.0
    } else {
        eps * (1.0 / eps).ln()
    }
}

/// Dominant eigenpair of a symmetric matrix by power iteration from the
/// all-ones direction: 200 iterations or relative residual 1e-10. Returns
/// the Rayleigh quotient (signed) and the direction.
pub fn power_iteration(m: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let k = m.nrows();
    let mut v = DVector::from_element(k, 1.0 / (k as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..200 {
        let mut w = m * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return (0.0, v);
        }
        w /= norm;
        lambda = (m * &w).dot(&w);
        let residual = (m * &w - lambda * &w).norm();
        v = w;
        if residual <= 1e-10 * lambda.abs().max(1e-300) {
            break;
        }
    }
    (lambda, v)
}

fn weighted_mean(points: &DMatrix<f64>, weights: &[f64]) -> DVector<f64> {
    let k = points.nrows();
    let mut mean = DVector::zeros(k);
    let mut total = 0.0;
    for (c, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            mean.axpy(w, &points.column(c), 1.0);
            total += w;
        }
    }
    mean / total
}

fn weighted_cov(points: &DMatrix<f64>, weights: &[f64], mean: &DVector<f64>) -> DMatrix<f64> {
    let k = points.nrows();
    let mut cov = DMatrix::zeros(k, k);
    let mut centered = DVector::zeros(k);
    let mut total = 0.0;
    for (c, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            centered.copy_from(&points.column(c));
            centered -= mean;
            let cs = centered.as_slice();
            for a in 0..k {
                let wa = w * cs[a];
                let col = &mut cov.as_mut_slice()[a * k..(a + 1) * k];
                for b in a..k {
                    col[b] += wa * cs[b];
                }
            }
            total += w;
        }
    }
    cov /= total;
    cov.fill_upper_triangle_with_lower_triangle();
    cov
}

fn validate_inputs(points: &DMatrix<f64>, eps: f64) -> Result<()> {
    if points.ncols() < 2 {
        return Err(Error::Parameter(format!(
            "need at least 2 points, got {}",
            points.ncols()
        )));
    }
    if !(0.0..1.0 / 3.0).contains(&eps) {
        return Err(Error::Parameter(format!(
            "contamination rate must be in [0, 1/3), got {eps}"
        )));
    }
    Ok(())
}

/// The common point when every column is bit-identical, else `None`.
fn degenerate_point(points: &DMatrix<f64>) -> Option<DVector<f64>> {
    let first = points.column(0);
    for c in 1..points.ncols() {
        if points.column(c) != first {
            return None;
        }
    }
    Some(first.into_owned())
}

/// Robust mean under a covariance bound `Sigma <= sigma^2 I`.
pub fn robust_mean_bounded_cov(
    points: &DMatrix<f64>,
    eps: f64,
    sigma: f64,
    cfg: &BoundedCovConfig,
) -> Result<(DVector<f64>, FilterDiagnostics)> {
    validate_inputs(points, eps)?;
    if !(sigma > 0.0) {
        return Err(Error::Parameter(format!("sigma must be positive, got {sigma}")));
    }
    let k = points.nrows();
    let n = points.ncols();
    let threshold = cfg.stop_factor * sigma * sigma;
    let max_rounds = cfg.max_rounds_per_dim * k;
    if let Some(point) = degenerate_point(points) {
        let diag = FilterDiagnostics {
            rounds: 0,
            mass_removed: 0.0,
            final_top_eigenvalue: 0.0,
            threshold_used: threshold,
        };
        return Ok((point, diag));
    }

    let mut weights = vec![1.0f64; n];
    let mut rounds = 0;
    loop {
        let mean = weighted_mean(points, &weights);
        let cov = weighted_cov(points, &weights, &mean);
        let (lambda, direction) = power_iteration(&cov);
        if lambda <= threshold || rounds >= max_rounds {
            let mass_removed = 1.0 - total_weight(&weights) / n as f64;
            return Ok((
                mean,
                FilterDiagnostics {
                    rounds,
                    mass_removed,
                    final_top_eigenvalue: lambda,
                    threshold_used: threshold,
                },
            ));
        }
        rounds += 1;
        downweight_by_scores(points, &mut weights, &mean, &direction);
        if total_weight(&weights) <= 0.5 * n as f64 {
            let mean = weighted_mean(points, &weights);
            return Ok((
                mean,
                FilterDiagnostics {
                    rounds,
                    mass_removed: 1.0 - total_weight(&weights) / n as f64,
                    final_top_eigenvalue: lambda,
                    threshold_used: threshold,
                },
            ));
        }
    }
}

fn total_weight(weights: &[f64]) -> f64 {
    weights.iter().sum()
}

/// Multiplicative downweighting by squared projections along `direction`.
fn downweight_by_scores(
    points: &DMatrix<f64>,
    weights: &mut [f64],
    mean: &DVector<f64>,
    direction: &DVector<f64>,
) {
    let n = points.ncols();
    let mut scores = vec![0.0f64; n];
    let mut max_score = 0.0f64;
    for c in 0..n {
        if weights[c] > 0.0 {
            let p = (points.column(c) - mean).dot(direction);
            scores[c] = p * p;
            max_score = max_score.max(scores[c]);
        }
    }
    if max_score <= 0.0 {
        return;
    }
    for c in 0..n {
        if weights[c] > 0.0 {
            weights[c] *= 1.0 - scores[c] / max_score;
        }
    }
}

/// Robust mean for sub-exponential data with `||Sigma - I||_2 <= tau`.
pub fn robust_mean_near_identity(
    points: &DMatrix<f64>,
    eps: f64,
    tau: f64,
    cfg: &NearIdentityConfig,
) -> Result<(DVector<f64>, FilterDiagnostics)> {
    validate_inputs(points, eps)?;
    if tau < 0.0 {
        return Err(Error::Parameter(format!("tau must be nonnegative, got {tau}")));
    }
    if eps > 0.0 && tau > 2.0 * eps.sqrt() {
        log::warn!(
            "near-identity filter called with tau {tau:.4} > 2 sqrt(eps) = {:.4}; \
             its accuracy guarantee assumes tau = O(sqrt(eps))",
            2.0 * eps.sqrt()
        );
    }
    let k = points.nrows();
    let n = points.ncols();
    let threshold = cfg.stop_factor * (tau + eps_log_term(eps));
    let max_rounds = cfg.max_rounds_per_dim * k;
    let tail_extra = eps / (k as f64 * (k as f64).ln()).max(1.0);
    let identity = DMatrix::<f64>::identity(k, k);
    if let Some(point) = degenerate_point(points) {
        let diag = FilterDiagnostics {
            rounds: 0,
            mass_removed: 0.0,
            final_top_eigenvalue: 1.0,
            threshold_used: threshold,
        };
        return Ok((point, diag));
    }

    let mut weights = vec![1.0f64; n];
    let mut rounds = 0;
    loop {
        let mean = weighted_mean(points, &weights);
        let deviation = weighted_cov(points, &weights, &mean) - &identity;
        let (lambda, direction) = power_iteration(&deviation);
        let spectral = lambda.abs();
        let finish = |rounds: usize, weights: &[f64], mean: DVector<f64>| {
            (
                mean,
                FilterDiagnostics {
                    rounds,
                    mass_removed: 1.0 - total_weight(weights) / n as f64,
                    final_top_eigenvalue: spectral,
                    threshold_used: threshold,
                },
            )
        };
        if spectral <= threshold || rounds >= max_rounds {
            return Ok(finish(rounds, &weights, mean));
        }
        // A dominant variance deficit cannot be explained by outliers, and
        // removing points only deepens it; leave it to the caller's radius.
        if lambda <= 0.0 {
            return Ok(finish(rounds, &weights, mean));
        }

        let mut projections = vec![0.0f64; n];
        for c in 0..n {
            if weights[c] > 0.0 {
                projections[c] = (points.column(c) - &mean).dot(&direction);
            }
        }
        let cut = tail_threshold(&projections, &weights, cfg, tail_extra);
        rounds += 1;
        match cut {
            Some(t) => {
                for c in 0..n {
                    if weights[c] > 0.0 && projections[c].abs() > t {
                        weights[c] = 0.0;
                    }
                }
            }
            None if cfg.within_ball_downweight => {
                // No certified tail: corruption sits inside the bulk, so
                // shrink variance along the top direction instead.
                downweight_by_scores(points, &mut weights, &mean, &direction);
            }
            None => {
                return Ok(finish(rounds, &weights, mean));
            }
        }
        if total_weight(&weights) <= 0.5 * n as f64 {
            let mean = weighted_mean(points, &weights);
            return Ok(finish(rounds, &weights, mean));
        }
    }
}

/// Smallest `T >= tail_floor` at which the weighted tail fraction beyond `T`
/// exceeds the certified sub-exponential bound
/// `tail_coeff exp(-T/tail_rate) + tail_extra`, or `None` when the empirical
/// tail never crosses it.
fn tail_threshold(
    projections: &[f64],
    weights: &[f64],
    cfg: &NearIdentityConfig,
    tail_extra: f64,
) -> Option<f64> {
    let total: f64 = total_weight(weights);
    // Active |projections| above the floor, with their weights, ascending.
    let mut tail: Vec<(f64, f64)> = projections
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&p, &w)| (p.abs(), w))
        .filter(|(p, _)| *p > cfg.tail_floor)
        .collect();
    if tail.is_empty() {
        return None;
    }
    tail.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let bound = |t: f64| cfg.tail_coeff * (-t / cfg.tail_rate).exp() + tail_extra;

    // Sweep intervals of constant empirical tail fraction, from the floor up.
    // On each, the bound decays; the first crossing is the threshold.
    let mut above: f64 = tail.iter().map(|(_, w)| w).sum::<f64>() / total;
    let mut left = cfg.tail_floor;
    let mut idx = 0;
    while idx <= tail.len() {
        let right = if idx < tail.len() { tail[idx].0 } else { f64::INFINITY };
        if above > tail_extra {
            if above > bound(left) {
                return Some(left);
            }
            // Analytic crossing inside (left, right):
            // tail_coeff exp(-t/rate) + extra = above.
            let t_star = cfg.tail_rate * (cfg.tail_coeff / (above - tail_extra)).ln();
            if t_star > left && t_star < right {
                return Some(t_star);
            }
        }
        if idx == tail.len() {
            break;
        }
        above -= tail[idx].1 / total;
        left = right;
        idx += 1;
    }
    None
}
