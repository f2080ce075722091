//! Maximum-likelihood parameter recovery from a sufficient-statistic mean.
//!
//! Given a target mean `mu'`, the estimate maximizes
//! `L(theta, mu') = <theta, mu'> - A(theta)` over the feasible set by
//! projected gradient descent. The gradient `E_theta[T(X)] - mu'` is
//! estimated by fresh Glauber sampling at every iteration, and the
//! projection is the row-l1/field-box projection, so both oracles are
//! approximate in the sense required by [`crate::optim::apgd_minimize`].

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::glauber::ChainConfig;
use crate::model::{DobrushinSpec, IsingParameters};
use crate::moments::estimate_moments_with_chain;
use crate::optim::{apgd_minimize, ApgdConfig, ApgdResult};
use crate::projection::project_parameter_set;
use crate::seeding::derive_seed;
use crate::suffstats::SuffStatSpec;

/// Optimization constants for the likelihood solve.
///
/// `smoothness` and `strong_convexity` are spectrum bounds for the
/// sufficient-statistic covariance over the feasible set. The conservative
/// defaults follow the generic exponential-family contract; for the Ising
/// instantiations at desk scale, [`MleConfig::ising_desk_scale`] uses the
/// empirically measured spectrum range, which shortens the iteration
/// schedule by an order of magnitude without affecting correctness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleConfig {
    /// Smoothness bound `L` (upper bound on covariance eigenvalues).
    pub smoothness: f64,
    /// Strong convexity bound `m` (lower bound on covariance eigenvalues).
    pub strong_convexity: f64,
    /// Constant in the per-iteration gradient sample size
    /// `n = ceil(grad_constant * dim / delta1^2)`.
    pub grad_constant: f64,
    /// Cap on the per-iteration gradient sample size.
    pub grad_budget: usize,
    /// Step-count multiplier of the chains behind gradient estimates.
    pub chain_constant: f64,
    /// Hard cap on iterations.
    pub max_iters: usize,
    /// Trailing iterates averaged into the returned point.
    pub tail_average: usize,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self {
            smoothness: 10.0,
            strong_convexity: 0.1,
            grad_constant: 25.0,
            grad_budget: 20_000,
            chain_constant: 20.0,
            max_iters: 4_000,
            tail_average: 8,
        }
    }
}

impl MleConfig {
    /// Constants sized for Dobrushin-regime Ising models at desk scale.
    ///
    /// The covariance spectrum of the pair statistics stays within
    /// `[0.25, 2.5]` across the benchmark regimes (see the spectrum-witness
    /// test), so those bounds are valid and much tighter than the generic
    /// defaults. The chain constant 8 keeps a 4x margin over the `1/eta`
    /// mixing requirement at `eta = 0.5`.
    pub fn ising_desk_scale() -> Self {
        Self {
            smoothness: 2.5,
            strong_convexity: 0.25,
            chain_constant: 8.0,
            ..Self::default()
        }
    }
}

/// Diagnostics of one likelihood solve.
#[derive(Debug, Clone)]
pub struct MleReport {
    pub iters: usize,
    pub converged: bool,
    /// Per-iteration gradient sample size actually used.
    pub n_grad: usize,
    /// Chain accuracy used for gradient sampling.
    pub gamma: f64,
    /// Effective gradient error bound after budget capping.
    pub delta1: f64,
}

/// Maximize `L(theta, mu_prime)` over the set described by `omega`.
///
/// `delta` is the optimization target: both oracle tolerances are set to
/// `delta` and the iteration count follows the smooth/strongly-convex
/// schedule. `zeta` in (0,1) is the failure-probability budget; it scales
/// the chain accuracy used for gradient estimation (at the default 0.1 the
/// chain accuracy is `delta1^2 / (100 n)`).
pub fn mle_from_mean(
    mu_prime: &DVector<f64>,
    spec: &SuffStatSpec,
    omega: &DobrushinSpec,
    delta: f64,
    zeta: f64,
    cfg: &MleConfig,
    master_seed: u64,
) -> Result<(IsingParameters, MleReport)> {
    if mu_prime.len() != spec.dim() {
        return Err(Error::Dimension(format!(
            "target mean has length {}, spec expects {}",
            mu_prime.len(),
            spec.dim()
        )));
    }
    if mu_prime.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("target mean entries must be finite".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("delta must be in (0,1), got {delta}")));
    }
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(Error::Parameter(format!("zeta must be in (0,1), got {zeta}")));
    }

    let dim = spec.dim();
    let d = spec.spin_dim();
    // Feasible-set diameter in flattened coordinates: the pair block of any
    // member has squared norm at most d M^2 / 2, the field block d alpha^2.
    let diameter = 2.0 * (0.5 * d as f64 * omega.m * omega.m
        + d as f64 * omega.alpha * omega.alpha)
        .sqrt()
        .max(delta);

    let requested = (cfg.grad_constant * dim as f64 / (delta * delta)).ceil() as usize;
    let n_grad = requested.clamp(2, cfg.grad_budget);
    let delta1 = (cfg.grad_constant * dim as f64 / n_grad as f64).sqrt().max(delta);
    let gamma = (zeta * delta1 * delta1 / (10.0 * n_grad as f64)).clamp(1e-9, 0.05);

    let apgd_cfg = ApgdConfig {
        smoothness: cfg.smoothness,
        strong_convexity: cfg.strong_convexity,
        target_dist: delta,
        gradient_tol: delta1,
        projection_tol: delta,
        max_iters: cfg.max_iters,
        diameter,
        tail_average: cfg.tail_average,
    };

    // Fresh randomness per iteration: seed from a running counter.
    let mut iteration = 0u64;
    let grad = move |x: &DVector<f64>| -> DVector<f64> {
        let params = spec
            .params_from_natural(x)
            .expect("iterates stay in the spec's coordinate space");
        let chain = ChainConfig::new(gamma, cfg.chain_constant, derive_seed(master_seed, iteration))
            .expect("validated chain parameters");
        iteration += 1;
        let est = estimate_moments_with_chain(&params, spec, n_grad, &chain)
            .expect("gradient sampling within precomputed budget");
        est.mean - mu_prime
    };

    let proj = |x: &DVector<f64>| -> DVector<f64> {
        let params = spec
            .params_from_natural(x)
            .expect("iterates stay in the spec's coordinate space");
        let projected = match project_parameter_set(&params, omega, delta) {
            Ok(p) => p,
            Err(err) => {
                log::warn!("projection fallback after: {err}");
                // The enforcement sweep inside the projection guarantees
                // membership even when Dykstra hits its cycle cap, so a
                // tighter tolerance retry is the safe fallback.
                project_parameter_set(&params, omega, delta * 4.0)
                    .expect("enforced projection cannot fail")
            }
        };
        spec.natural_from_params(&projected)
            .expect("projected parameters match the spec's coordinate space")
    };

    let start = DVector::zeros(dim);
    let ApgdResult { point, iters, converged } = apgd_minimize(grad, proj, &start, &apgd_cfg)?;
    let params = spec.params_from_natural(&point)?;
    // Averaged tail iterates are convex combinations of feasible points;
    // re-project to make membership exact against roundoff.
    let params = project_parameter_set(&params, omega, delta.min(1e-9).max(1e-12))
        .unwrap_or(params);
    let report = MleReport { iters, converged, n_grad, gamma, delta1 };
    Ok((params, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerate::{exact_moments_of, exact_summary};
    use crate::model::check_bounded;
    use crate::seeding::unit_rng;
    use nalgebra::DMatrix;
    use rand::Rng;

    fn random_dobrushin_zero_field(d: usize, eta: f64, seed: u64) -> IsingParameters {
        let mut rng = unit_rng(seed, 0);
        let mut m = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in (i + 1)..d {
                let v: f64 = rng.gen::<f64>() * 2.0 - 1.0;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        let max_row: f64 = (0..d)
            .map(|i| (0..d).map(|j| m[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max);
        m *= (1.0 - eta) * 0.9 / max_row;
        IsingParameters::new(m, DVector::zeros(d)).unwrap()
    }

    fn exact_suffstat_mean(params: &IsingParameters, spec: &SuffStatSpec) -> DVector<f64> {
        let (mean, _) =
            exact_moments_of(params, spec.dim(), |x, out| spec.write_stats(x, out)).unwrap();
        mean
    }

    #[test]
    fn zero_target_recovers_zero_model() {
        let spec = SuffStatSpec::zero_field(3);
        let omega = DobrushinSpec::from_eta(0.5, 0.0).unwrap();
        let cfg = MleConfig { grad_budget: 4_000, ..MleConfig::ising_desk_scale() };
        let (params, report) = mle_from_mean(
            &DVector::zeros(spec.dim()),
            &spec,
            &omega,
            0.02,
            0.1,
            &cfg,
            17,
        )
        .unwrap();
        assert!(report.converged);
        let norm = params.interaction().norm();
        assert!(norm <= 0.06, "interaction norm {norm}");
    }

    #[test]
    fn exact_mean_recovers_generator() {
        let d = 4;
        let target = random_dobrushin_zero_field(d, 0.5, 41);
        let spec = SuffStatSpec::zero_field(d);
        let omega = DobrushinSpec::from_eta(0.5, 0.0).unwrap();
        let mu = exact_suffstat_mean(&target, &spec);
        let cfg = MleConfig { grad_budget: 6_000, ..MleConfig::ising_desk_scale() };
        let (est, report) = mle_from_mean(&mu, &spec, &omega, 0.01, 0.1, &cfg, 5).unwrap();
        assert!(report.converged);
        let err = (spec.natural_from_params(&est).unwrap()
            - spec.natural_from_params(&target).unwrap())
        .norm();
        assert!(err <= 0.05, "recovery error {err}");
        assert!(check_bounded(&est, &omega));
    }

    #[test]
    fn perturbed_mean_moves_output_proportionally() {
        let d = 4;
        let target = random_dobrushin_zero_field(d, 0.5, 57);
        let spec = SuffStatSpec::zero_field(d);
        let omega = DobrushinSpec::from_eta(0.5, 0.0).unwrap();
        let mu = exact_suffstat_mean(&target, &spec);
        // Strong-convexity constant measured from the enumerated covariance.
        let cov = exact_summary(&target).unwrap().suffstat_cov;
        let c = cov
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b));
        assert!(c > 0.0);

        let cfg = MleConfig { grad_budget: 6_000, tail_average: 16, ..MleConfig::ising_desk_scale() };
        let mut rng = unit_rng(58, 0);
        let mut dir = DVector::from_fn(spec.dim(), |_, _| rng.gen::<f64>() - 0.5);
        dir /= dir.norm();
        let shift = 0.02;
        // Same master seed: common randomness isolates the mean perturbation.
        let (base, _) = mle_from_mean(&mu, &spec, &omega, 0.01, 0.1, &cfg, 90).unwrap();
        let (moved, _) =
            mle_from_mean(&(&mu + shift * &dir), &spec, &omega, 0.01, 0.1, &cfg, 90).unwrap();
        let displacement = (spec.natural_from_params(&moved).unwrap()
            - spec.natural_from_params(&base).unwrap())
        .norm();
        let slope_bound = 2.0 / c;
        assert!(
            displacement <= slope_bound * shift * 1.5 + 0.02,
            "displacement {displacement}, slope bound {slope_bound}"
        );
    }

    #[test]
    fn likelihood_gradient_matches_finite_differences() {
        // d <= 5: finite difference of L(theta, mu') via the enumerated
        // log-partition equals mu' - mu_T(theta) to 1e-6.
        let d = 4;
        let spec = SuffStatSpec::zero_field(d);
        let mut rng = unit_rng(71, 0);
        let theta = DVector::from_fn(spec.dim(), |_, _| 0.3 * (rng.gen::<f64>() - 0.5));
        let mu_prime = DVector::from_fn(spec.dim(), |_, _| 0.5 * (rng.gen::<f64>() - 0.5));

        let log_partition = |nat: &DVector<f64>| -> f64 {
            let params = spec.params_from_natural(nat).unwrap();
            crate::enumerate::exact_probabilities(&params).unwrap().1
        };
        let likelihood = |nat: &DVector<f64>| nat.dot(&mu_prime) - log_partition(nat);

        let params = spec.params_from_natural(&theta).unwrap();
        let analytic = &mu_prime - exact_suffstat_mean(&params, &spec);
        let h = 1e-5;
        for a in 0..spec.dim() {
            let mut up = theta.clone();
            up[a] += h;
            let mut dn = theta.clone();
            dn[a] -= h;
            let fd = (likelihood(&up) - likelihood(&dn)) / (2.0 * h);
            assert!(
                (fd - analytic[a]).abs() <= 1e-6,
                "coordinate {a}: fd {fd} vs analytic {}",
                analytic[a]
            );
        }
    }

    #[test]
    fn covariance_spectrum_witnesses() {
        // Enumerated Hessians across random Dobrushin models stay inside a
        // positive spectrum band; this justifies the desk-scale constants.
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for seed in 0..100 {
            let d = 3 + (seed as usize) % 3;
            let params = random_dobrushin_zero_field(d, 0.5, 1000 + seed);
            let spec = SuffStatSpec::zero_field(d);
            let (_, cov) =
                exact_moments_of(&params, spec.dim(), |x, out| spec.write_stats(x, out)).unwrap();
            let eig = cov.symmetric_eigen().eigenvalues;
            lo = lo.min(eig.iter().fold(f64::INFINITY, |a, &b| a.min(b)));
            hi = hi.max(eig.iter().fold(0.0f64, |a, &b| a.max(b)));
        }
        assert!(lo > 0.25, "minimum covariance eigenvalue {lo}");
        assert!(hi < 2.5, "maximum covariance eigenvalue {hi}");
    }

    #[test]
    fn covariance_is_lipschitz_in_parameters() {
        // Spectral distance of covariances over parameter distance stays
        // within a stable constant band across seeds.
        let measure = |seed: u64| -> f64 {
            let mut worst: f64 = 0.0;
            for t in 0..10 {
                let d = 4;
                let p1 = random_dobrushin_zero_field(d, 0.5, seed * 100 + t);
                let p2 = random_dobrushin_zero_field(d, 0.5, seed * 100 + t + 50);
                let spec = SuffStatSpec::zero_field(d);
                let (_, c1) =
                    exact_moments_of(&p1, spec.dim(), |x, out| spec.write_stats(x, out)).unwrap();
                let (_, c2) =
                    exact_moments_of(&p2, spec.dim(), |x, out| spec.write_stats(x, out)).unwrap();
                let dtheta = (spec.natural_from_params(&p1).unwrap()
                    - spec.natural_from_params(&p2).unwrap())
                .norm();
                let spectral = (c1 - c2).symmetric_eigen().eigenvalues.amax();
                worst = worst.max(spectral / dtheta);
            }
            worst
        };
        let a = measure(1);
        let b = measure(2);
        assert!(a.is_finite() && a > 0.0);
        assert!(b <= 1.5 * a && b >= a / 1.5, "ratios {a} vs {b} drifted beyond 50%");
    }
}
