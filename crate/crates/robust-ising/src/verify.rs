//! Monte Carlo verification of variance and tail properties of quadratic
//! and linear forms of the model: anti-concentration floors, variance upper
//! bounds, and sub-exponential survival curves, all against sampled data
//! (cross-checked by enumeration at small dimension in the tests).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::enumerate::{exact_summary_capped, ENUM_CAP_DEFAULT};
use crate::error::{Error, Result};
use crate::glauber::{sample_batch, ChainConfig};
use crate::model::IsingParameters;
use crate::par::map_indexed;
use crate::samples::SampleSet;
use crate::seeding::{derive_seed, unit_rng};

/// Chain controls for the verification runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub gamma: f64,
    pub mixing_constant: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { gamma: 0.05, mixing_constant: 20.0 }
    }
}

/// Empirical variance of one random test functional.
#[derive(Debug, Clone, serde::Serialize)]
pub struct VarianceReport {
    /// Frobenius norm of the quadratic test matrix.
    pub test_matrix_norm: f64,
    /// Euclidean norm of the linear part.
    pub linear_norm: f64,
    pub empirical_variance: f64,
    /// `variance / (||A||_F^2 + ||b||^2)`.
    pub ratio: f64,
    pub n_samples: usize,
    /// Batched 95% half-width for the variance estimate (20 batches).
    pub ci95_half_width: f64,
}

/// Survival-curve summary of one functional.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TailReport {
    pub thresholds: Vec<f64>,
    /// `ln` of the survival estimates (negative infinity where empty).
    pub log_survival: Vec<f64>,
    /// Exponential rate fitted against `t / sqrt(||A||_F^2 + ||b||^2)`,
    /// over the thresholds where the survival estimate is reliable.
    pub fitted_rate: f64,
    /// True when some thresholds fell below the reliability cut
    /// (survival under `50/n`) and were excluded from the fit.
    pub truncated: bool,
}

/// Random symmetric zero-diagonal matrix with unit Frobenius norm:
/// independent standard normal upper triangle, symmetrized.
pub fn random_test_matrix(d: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(d, d);
    loop {
        for i in 0..d {
            for j in (i + 1)..d {
                let g: f64 = StandardNormal.sample(rng);
                a[(i, j)] = g;
                a[(j, i)] = g;
            }
        }
        let norm = a.norm();
        if norm > 0.0 {
            a /= norm;
            return a;
        }
    }
}

/// `f(x) = (x - v)' A (x - v) + b' x`.
fn eval_form(a: &DMatrix<f64>, b: &DVector<f64>, v: &DVector<f64>, x: &[i8]) -> f64 {
    let d = v.len();
    let mut acc = 0.0;
    for i in 0..d {
        let xi = f64::from(x[i]) - v[i];
        acc += b[i] * f64::from(x[i]);
        for j in (i + 1)..d {
            acc += 2.0 * a[(i, j)] * xi * (f64::from(x[j]) - v[j]);
        }
    }
    acc
}

/// Centering vector: the enumerated mean at small dimension, otherwise the
/// empirical spin mean of the drawn samples.
fn centering_vector(params: &IsingParameters, samples: &SampleSet) -> DVector<f64> {
    if params.dim() <= ENUM_CAP_DEFAULT {
        if let Ok(summary) = exact_summary_capped(params, ENUM_CAP_DEFAULT) {
            return summary.mean;
        }
    }
    let d = samples.dim();
    let mut mean = DVector::zeros(d);
    for row in samples.rows() {
        for (i, &s) in row.iter().enumerate() {
            mean[i] += f64::from(s);
        }
    }
    mean / samples.len() as f64
}

/// Population variance plus a batched 95% half-width (20 batches,
/// Student-t multiplier for 19 degrees of freedom).
fn variance_with_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let batches = 20.min(n);
    let per = n / batches;
    let mut batch_vars = Vec::with_capacity(batches);
    for b in 0..batches {
        let chunk = &values[b * per..(b + 1) * per];
        let bm = chunk.iter().sum::<f64>() / chunk.len() as f64;
        batch_vars.push(chunk.iter().map(|v| (v - bm) * (v - bm)).sum::<f64>() / chunk.len() as f64);
    }
    let bmean = batch_vars.iter().sum::<f64>() / batches as f64;
    let bsd = (batch_vars.iter().map(|v| (v - bmean) * (v - bmean)).sum::<f64>()
        / (batches as f64 - 1.0))
        .sqrt();
    const T19_975: f64 = 2.093024054408263;
    (var, T19_975 * bsd / (batches as f64).sqrt())
}

fn one_variance_trial(
    params: &IsingParameters,
    n: usize,
    with_linear: bool,
    trial_seed: u64,
    mc: &McConfig,
) -> Result<VarianceReport> {
    let d = params.dim();
    let mut rng = unit_rng(trial_seed, 0);
    let mut a = random_test_matrix(d, &mut rng);
    let mut b = DVector::zeros(d);
    if with_linear {
        // Random split of the unit budget between ||A||_F^2 and ||b||^2.
        let w: f64 = rng.gen();
        let mut raw = DVector::from_fn(d, |_, _| {
            let g: f64 = StandardNormal.sample(&mut rng);
            g
        });
        let norm = raw.norm();
        if norm > 0.0 && w < 1.0 {
            raw *= (1.0 - w).sqrt() / norm;
            b = raw;
            a *= w.sqrt();
        }
    }
    let chain = ChainConfig::new(mc.gamma, mc.mixing_constant, derive_seed(trial_seed, 1))?;
    let samples = sample_batch(params, n, &chain)?;
    let v = centering_vector(params, &samples);
    let values: Vec<f64> = samples.rows().map(|x| eval_form(&a, &b, &v, x)).collect();
    let (var, ci) = variance_with_ci(&values);
    let a_norm = a.norm();
    let b_norm = b.norm();
    let denom = a_norm * a_norm + b_norm * b_norm;
    Ok(VarianceReport {
        test_matrix_norm: a_norm,
        linear_norm: b_norm,
        empirical_variance: var,
        ratio: var / denom,
        n_samples: n,
        ci95_half_width: ci,
    })
}

fn variance_trials(
    params: &IsingParameters,
    trials: usize,
    n: usize,
    with_linear: bool,
    seed: u64,
    mc: &McConfig,
) -> Result<Vec<VarianceReport>> {
    if trials == 0 || n < 20 {
        return Err(Error::Parameter("need trials >= 1 and n >= 20".into()));
    }
    let results = map_indexed(trials, |t| {
        one_variance_trial(params, n, with_linear, derive_seed(seed, t as u64), mc)
    });
    results.into_iter().collect()
}

/// Variance of random unit-norm quadratic (optionally quadratic-plus-linear)
/// forms, one report per trial. The anti-concentration suite asserts the
/// minimum ratio stays bounded away from zero.
pub fn mc_variance_lower_bound(
    params: &IsingParameters,
    trials: usize,
    n: usize,
    with_linear: bool,
    seed: u64,
    mc: &McConfig,
) -> Result<Vec<VarianceReport>> {
    variance_trials(params, trials, n, with_linear, seed, mc)
}

/// Same trials viewed from above: the suite asserts the maximum ratio stays
/// below a recorded constant.
pub fn mc_variance_upper_bound(
    params: &IsingParameters,
    trials: usize,
    n: usize,
    seed: u64,
    mc: &McConfig,
) -> Result<Vec<VarianceReport>> {
    variance_trials(params, trials, n, true, seed, mc)
}

/// Variance of random unit linear forms `b' x`.
pub fn mc_linear_anticoncentration(
    params: &IsingParameters,
    trials: usize,
    n: usize,
    seed: u64,
    mc: &McConfig,
) -> Result<Vec<VarianceReport>> {
    if trials == 0 || n < 20 {
        return Err(Error::Parameter("need trials >= 1 and n >= 20".into()));
    }
    let d = params.dim();
    let results = map_indexed(trials, |t| {
        let trial_seed = derive_seed(seed, t as u64);
        let mut rng = unit_rng(trial_seed, 0);
        let mut b = DVector::from_fn(d, |_, _| {
            let g: f64 = StandardNormal.sample(&mut rng);
            g
        });
        let norm = b.norm();
        if norm > 0.0 {
            b /= norm;
        } else {
            b[0] = 1.0;
        }
        let chain = ChainConfig::new(mc.gamma, mc.mixing_constant, derive_seed(trial_seed, 1))?;
        let samples = sample_batch(params, n, &chain)?;
        let values: Vec<f64> = samples
            .rows()
            .map(|x| x.iter().zip(b.iter()).map(|(&s, w)| f64::from(s) * w).sum())
            .collect();
        let (var, ci) = variance_with_ci(&values);
        Ok(VarianceReport {
            test_matrix_norm: 0.0,
            linear_norm: 1.0,
            empirical_variance: var,
            ratio: var,
            n_samples: n,
            ci95_half_width: ci,
        })
    });
    results.into_iter().collect()
}

/// Survival curve of `f(x) = (x-v)'A(x-v) + b'x` at the given increasing
/// thresholds, with an exponential rate fitted where the estimates are
/// reliable (survival at least `50/n`).
#[allow(clippy::too_many_arguments)]
pub fn mc_tail_check(
    params: &IsingParameters,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    v: Option<&DVector<f64>>,
    n: usize,
    thresholds: &[f64],
    seed: u64,
    mc: &McConfig,
) -> Result<TailReport> {
    let d = params.dim();
    if a.nrows() != d || a.ncols() != d || b.len() != d {
        return Err(Error::Dimension("test functional does not match model dimension".into()));
    }
    if thresholds.is_empty() || thresholds.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter("thresholds must be strictly increasing".into()));
    }
    if thresholds[0] <= 0.0 {
        return Err(Error::Parameter("thresholds must be positive".into()));
    }
    let chain = ChainConfig::new(mc.gamma, mc.mixing_constant, derive_seed(seed, 1))?;
    let samples = sample_batch(params, n, &chain)?;
    let centering = match v {
        Some(v) => v.clone(),
        None => centering_vector(params, &samples),
    };
    let values: Vec<f64> = samples.rows().map(|x| eval_form(a, b, &centering, x)).collect();
    let mean = values.iter().sum::<f64>() / n as f64;
    let norm_ab = (a.norm().powi(2) + b.norm().powi(2)).sqrt();

    let survival: Vec<f64> = thresholds
        .iter()
        .map(|&t| values.iter().filter(|&&f| (f - mean).abs() > t).count() as f64 / n as f64)
        .collect();
    let log_survival: Vec<f64> = survival.iter().map(|&s| s.ln()).collect();

    let reliable = 50.0 / n as f64;
    let fit_points: Vec<(f64, f64)> = thresholds
        .iter()
        .zip(&survival)
        .filter(|(_, &s)| s >= reliable)
        .map(|(&t, &s)| (t / norm_ab, s.ln()))
        .collect();
    let truncated = fit_points.len() < thresholds.len();
    let fitted_rate = if fit_points.len() >= 2 {
        // Least-squares slope of ln(survival) against the normalized threshold.
        let m = fit_points.len() as f64;
        let sx: f64 = fit_points.iter().map(|p| p.0).sum();
        let sy: f64 = fit_points.iter().map(|p| p.1).sum();
        let sxx: f64 = fit_points.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = fit_points.iter().map(|p| p.0 * p.1).sum();
        -((m * sxy - sx * sy) / (m * sxx - sx * sx))
    } else {
        0.0
    };
    Ok(TailReport { thresholds: thresholds.to_vec(), log_survival, fitted_rate, truncated })
}
