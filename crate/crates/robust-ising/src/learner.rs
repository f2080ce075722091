//! Outlier-robust parameter learning: a bounded-covariance initial round
//! followed by iterative whiten-and-filter refinement.
//!
//! Round zero estimates the statistic mean with the coarse filter (accuracy
//! `O(sigma sqrt(eps))`) and fits parameters by maximum likelihood. Each
//! refinement round then (i) estimates the statistic covariance by sampling
//! from the current fit, (ii) whitens the corrupted statistic images,
//! (iii) runs the near-identity filter at the radius implied by the current
//! error bound, (iv) un-whitens and refits. The error-bound schedule is
//! `tau_{k+1} = C_ref (sqrt(eps tau_k) + eps ln(1/eps))`, contracting toward
//! the `eps ln(1/eps)` floor.
//!
//! Two instantiations: zero external field over the pair statistics, and
//! non-zero external field over the centered statistics through an estimated
//! spin mean `v`, with parameters recovered by the exact affine
//! back-conversion `theta_i = h_i - sum_j J_ij v_j`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::filters::{
    power_iteration, robust_mean_bounded_cov, robust_mean_near_identity, BoundedCovConfig,
    eps_log_term, FilterDiagnostics, NearIdentityConfig,
};
use crate::mle::{mle_from_mean, MleConfig, MleReport};
use crate::model::{check_bounded, DobrushinSpec, IsingParameters};
use crate::moments::{empirical_moments, estimate_moments_with_chain, suffstat_matrix, whiten_factor};
use crate::projection::project_parameter_set;
use crate::samples::SampleSet;
use crate::seeding::derive_seed;
use crate::suffstats::SuffStatSpec;

/// Schedule constants of the refinement loop.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RefinementConstants {
    /// Initial error bound multiplier: `tau_0 = c0 sqrt(eps)`.
    pub c0: f64,
    /// Multiplier in the bound recursion.
    pub c_ref: f64,
    /// Filter radius multiplier: the near-identity round runs at
    /// `tau = c_tau tau_k` plus the finite-sample floor.
    pub c_tau: f64,
    /// Covariance sample-size constant: `n_k = c_n dim / tau_k^2`.
    pub c_n: f64,
}

impl Default for RefinementConstants {
    fn default() -> Self {
        Self { c0: 3.0, c_ref: 1.0, c_tau: 1.0, c_n: 200.0 }
    }
}

/// Full configuration of a learning run. Every constant that affects the
/// output is here, so a recorded config reproduces a run bit-for-bit.
#[derive(Debug, Clone)]
pub struct LearnerConfig {
    /// Largest admissible contamination rate.
    pub eps0: f64,
    pub constants: RefinementConstants,
    pub mle: MleConfig,
    /// Optimization target passed to each likelihood solve.
    pub mle_delta: f64,
    /// Failure-probability budget forwarded to the likelihood solves.
    pub zeta: f64,
    /// Cap on per-round covariance sample size.
    pub cov_budget: usize,
    /// Chain accuracy for covariance-estimation sampling.
    pub cov_gamma: f64,
    /// Step-count multiplier of the covariance-estimation chains.
    pub cov_chain_constant: f64,
    /// Eigenvalue floor used when whitening estimated covariances.
    pub whiten_floor: f64,
    /// Multiplier of the finite-sample deviation floor added to the
    /// near-identity filter radius.
    pub noise_floor_factor: f64,
    pub bounded_cov: BoundedCovConfig,
    pub near_identity: NearIdentityConfig,
    /// Override the refinement round count `K`.
    pub rounds_override: Option<usize>,
    /// Gradient-budget multiplier for the last refinement round's solve;
    /// the returned estimate comes from the least noisy solve of the run.
    pub final_solve_boost: f64,
    /// Constant in the assumed spin-mean error bound `c1 sqrt(eps)` of the
    /// external-field feasibility inequality.
    pub c1: f64,
    /// Replace both robust filters by plain means (naive baseline).
    pub disable_filters: bool,
    pub master_seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            eps0: 0.1,
            constants: RefinementConstants::default(),
            mle: MleConfig { grad_budget: 5_000, ..MleConfig::ising_desk_scale() },
            mle_delta: 0.02,
            zeta: 0.1,
            cov_budget: 200_000,
            cov_gamma: 1e-6,
            cov_chain_constant: 8.0,
            whiten_floor: 1e-6,
            noise_floor_factor: 5.0,
            bounded_cov: BoundedCovConfig::default(),
            near_identity: NearIdentityConfig { stop_factor: 0.6, ..Default::default() },
            rounds_override: None,
            final_solve_boost: 2.0,
            c1: 1.0,
            disable_filters: false,
            master_seed: 0,
        }
    }
}

/// One refinement round of the trace.
#[derive(Debug, Clone)]
pub struct RoundRecord {
    pub k: usize,
    /// Error bound in effect during this round (drives the sample size and
    /// the filter radius).
    pub tau_k: f64,
    /// Wall-clock duration of the round, in milliseconds.
    pub wall_ms: f64,
    /// Covariance samples drawn this round.
    pub n_cov: usize,
    /// True when the sample-size formula wanted more than the budget.
    pub budget_capped: bool,
    /// Smallest eigenvalue of the estimated statistic covariance.
    pub cov_spectral_gap: f64,
    pub filter: FilterDiagnostics,
    pub mle: MleReport,
    /// True when the filtered mean moved less than the solver could
    /// resolve, so the previous estimate was carried forward.
    pub mle_skipped: bool,
    /// Parameter estimate after this round.
    pub theta: IsingParameters,
}

/// Per-round observability of a learning run.
#[derive(Debug, Clone)]
pub struct RefinementTrace {
    /// Covariance-scale estimate used by the initial coarse round.
    pub sigma0: f64,
    pub initial_filter: FilterDiagnostics,
    pub initial_mle: MleReport,
    pub initial_theta: IsingParameters,
    pub initial_wall_ms: f64,
    pub tau0: f64,
    /// Bound after the last round.
    pub tau_final: f64,
    pub rounds: Vec<RoundRecord>,
}

impl RefinementTrace {
    /// The bound schedule `tau_0, tau_1, ..., tau_K`.
    pub fn tau_schedule(&self) -> Vec<f64> {
        let mut taus: Vec<f64> = self.rounds.iter().map(|r| r.tau_k).collect();
        if taus.is_empty() {
            taus.push(self.tau0);
        }
        taus.push(self.tau_final);
        taus
    }

    /// All parameter estimates in order, initial round first.
    pub fn estimates(&self) -> Vec<&IsingParameters> {
        let mut all = vec![&self.initial_theta];
        all.extend(self.rounds.iter().map(|r| &r.theta));
        all
    }
}

/// Recovered centered-form components of the external-field learner.
#[derive(Debug, Clone)]
pub struct CenteredRecovery {
    /// Robust estimate of the spin mean used as the centering vector.
    pub v: DVector<f64>,
    /// Interaction matrix (shared by both coordinate systems).
    pub j: DMatrix<f64>,
    /// Linear-part natural parameter; the standard field is
    /// `theta_i = h_i - sum_j J_ij v_j`.
    pub h: DVector<f64>,
}

/// `sqrt(||J_a - J_b||_F^2 + ||h_a - h_b||^2)`.
pub fn param_distance(a: &IsingParameters, b: &IsingParameters) -> f64 {
    let dj = (a.interaction() - b.interaction()).norm();
    let dh = (a.field() - b.field()).norm();
    (dj * dj + dh * dh).sqrt()
}

fn plain_mean(points: &DMatrix<f64>) -> DVector<f64> {
    let mut mean = DVector::zeros(points.nrows());
    for c in 0..points.ncols() {
        mean += points.column(c);
    }
    mean / points.ncols() as f64
}

fn noop_diagnostics() -> FilterDiagnostics {
    FilterDiagnostics { rounds: 0, mass_removed: 0.0, final_top_eigenvalue: 0.0, threshold_used: 0.0 }
}

/// Covariance scale for the coarse round: `1.5x` the top covariance
/// eigenvalue of the points whose norms fall in the middle 80%, floored at 1.
fn coarse_sigma(points: &DMatrix<f64>) -> f64 {
    let n = points.ncols();
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|c| points.column(c).norm()).collect();
    order.sort_by(|&a, &b| norms[a].partial_cmp(&norms[b]).unwrap());
    let lo = n / 10;
    let hi = n - n / 10;
    let kept = &order[lo..hi];
    let mut subset = DMatrix::zeros(points.nrows(), kept.len());
    for (to, &from) in kept.iter().enumerate() {
        subset.set_column(to, &points.column(from));
    }
    let (_, cov) = empirical_moments(&subset);
    let (top, _) = power_iteration(&cov);
    (1.5 * top).max(1.0).sqrt()
}

/// Number of refinement rounds: `max(2, ceil(log2 log2 (1/eps)) + 1)`.
fn round_count(eps: f64) -> usize {
    if eps <= 0.0 {
        return 2;
    }
    let inner = (1.0 / eps).log2();
    if inner <= 1.0 {
        return 2;
    }
    (inner.log2().ceil() as usize + 1).max(2)
}

/// Learn the natural parameter of an exponential family over spin data from
/// eps-corrupted statistic images (one point per column).
pub fn robust_learn_expfam(
    points: &DMatrix<f64>,
    eps: f64,
    omega: &DobrushinSpec,
    spec: &SuffStatSpec,
    cfg: &LearnerConfig,
) -> Result<(IsingParameters, RefinementTrace)> {
    if !(0.0..1.0).contains(&eps) || eps >= cfg.eps0 {
        return Err(Error::Parameter(format!(
            "contamination rate {eps} outside [0, eps0 = {})",
            cfg.eps0
        )));
    }
    let dim = spec.dim();
    if points.nrows() != dim {
        return Err(Error::Dimension(format!(
            "points have dimension {}, spec expects {dim}",
            points.nrows()
        )));
    }
    let n = points.ncols();
    if n < 2 {
        return Err(Error::Parameter(format!("need at least 2 samples, got {n}")));
    }
    let master = cfg.master_seed;

    // Initial coarse round.
    let initial_start = std::time::Instant::now();
    let sigma0 = coarse_sigma(points);
    let (mu0, initial_filter) = if cfg.disable_filters {
        (plain_mean(points), noop_diagnostics())
    } else {
        robust_mean_bounded_cov(points, eps, sigma0, &cfg.bounded_cov)?
    };
    let (mut theta, initial_mle) = mle_from_mean(
        &mu0,
        spec,
        omega,
        cfg.mle_delta,
        cfg.zeta,
        &cfg.mle,
        derive_seed(master, 101),
    )?;
    let initial_wall_ms = initial_start.elapsed().as_secs_f64() * 1e3;
    let tau0 = cfg.constants.c0 * eps.sqrt();
    let initial_theta = theta.clone();
    let mut last_solved_mu = mu0;

    let k_rounds = cfg.rounds_override.unwrap_or_else(|| round_count(eps));
    let mut tau_k = tau0;
    let mut rounds = Vec::with_capacity(k_rounds);
    for k in 0..k_rounds {
        let round_start = std::time::Instant::now();
        let tau_in = tau_k;
        let wanted = if tau_k > 0.0 {
            (cfg.constants.c_n * dim as f64 / (tau_k * tau_k)).ceil() as usize
        } else {
            usize::MAX
        };
        let n_cov = wanted.clamp(2 * dim + 16, cfg.cov_budget);
        let budget_capped = wanted > cfg.cov_budget;
        let chain = crate::glauber::ChainConfig::new(
            cfg.cov_gamma,
            cfg.cov_chain_constant,
            derive_seed(master, 200 + k as u64),
        )?;
        let est = estimate_moments_with_chain(&theta, spec, n_cov, &chain)?;
        let gap = est
            .cov
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b));
        let (inv_sqrt, sqrt) = whiten_factor(&est.cov, cfg.whiten_floor);
        let whitened = &inv_sqrt * points;
        // Finite-sample deviation floor of the whitened covariance: input
        // sampling noise plus the error of the estimated whitening factor.
        let noise_floor = cfg.noise_floor_factor
            * ((dim as f64 / n as f64).sqrt() + (dim as f64 / n_cov as f64).sqrt());
        let tau_filter = cfg.constants.c_tau * tau_k + noise_floor;
        let (mu_white, filter) = if cfg.disable_filters {
            (plain_mean(&whitened), noop_diagnostics())
        } else {
            robust_mean_near_identity(&whitened, eps, tau_filter, &cfg.near_identity)?
        };
        let mu_hat = &sqrt * mu_white;
        // A mean within the solver's own resolution of the one already
        // fitted cannot move the estimate meaningfully; carry it forward.
        let mle_skipped = (&mu_hat - &last_solved_mu).norm() <= 1.5 * cfg.mle_delta;
        let mle = if mle_skipped {
            MleReport { iters: 0, converged: true, n_grad: 0, gamma: 0.0, delta1: 0.0 }
        } else {
            let mut solve_cfg = cfg.mle;
            if k + 1 == k_rounds {
                let boosted =
                    (cfg.mle.grad_budget as f64 * cfg.final_solve_boost).round() as usize;
                solve_cfg.grad_budget = boosted.max(cfg.mle.grad_budget);
                solve_cfg.tail_average = cfg.mle.tail_average * 2;
            }
            let (next_theta, report) = mle_from_mean(
                &mu_hat,
                spec,
                omega,
                cfg.mle_delta,
                cfg.zeta,
                &solve_cfg,
                derive_seed(master, 300 + k as u64),
            )?;
            theta = next_theta;
            last_solved_mu = mu_hat;
            report
        };
        tau_k = cfg.constants.c_ref * ((eps * tau_k).sqrt() + eps_log_term(eps));
        rounds.push(RoundRecord {
            k,
            tau_k: tau_in,
            wall_ms: round_start.elapsed().as_secs_f64() * 1e3,
            n_cov,
            budget_capped,
            cov_spectral_gap: gap,
            filter,
            mle,
            mle_skipped,
            theta: theta.clone(),
        });
    }

    // Exact feasibility of the returned point.
    let theta = project_parameter_set(&theta, omega, 1e-12)?;
    debug_assert!(check_bounded(&theta, omega));
    let trace = RefinementTrace {
        sigma0,
        initial_filter,
        initial_mle,
        initial_theta,
        initial_wall_ms,
        tau0,
        tau_final: tau_k,
        rounds,
    };
    Ok((theta, trace))
}

/// Zero-external-field instantiation over the pair statistics. The feasible
/// set is `max row l1 <= 1 - eta` with the field pinned at zero, so the
/// output always satisfies the row-sum condition exactly.
pub fn robust_learn_ising_zero_field(
    samples: &SampleSet,
    eps: f64,
    eta: f64,
    cfg: &LearnerConfig,
) -> Result<(IsingParameters, RefinementTrace)> {
    let omega = DobrushinSpec::from_eta(eta, 0.0)?;
    let spec = SuffStatSpec::zero_field(samples.dim());
    let points = suffstat_matrix(&spec, samples)?;
    robust_learn_expfam(&points, eps, &omega, &spec, cfg)
}

/// Non-zero-external-field instantiation via the centered statistics.
///
/// Refuses to run unless the feasibility inequality relating `(M, alpha,
/// c0, c1, eps)` holds; the error carries both evaluated sides.
pub fn robust_learn_ising_external(
    samples: &SampleSet,
    eps: f64,
    bounds: &DobrushinSpec,
    c0_margin: f64,
    cfg: &LearnerConfig,
) -> Result<(IsingParameters, CenteredRecovery, RefinementTrace)> {
    let (ok, lhs, rhs) = check_external_constraint(bounds.m, bounds.alpha, c0_margin, cfg.c1, eps)?;
    if !ok {
        return Err(Error::ConstraintRefused {
            lhs,
            rhs,
            context: format!(
                "external-field feasibility fails at M={}, alpha={}, c0={c0_margin}, c1={}, eps={eps}",
                bounds.m, bounds.alpha, cfg.c1
            ),
        });
    }
    let d = samples.dim();
    let n = samples.len();
    // Robust spin-mean estimate.
    let mut spins = DMatrix::zeros(d, n);
    for (c, row) in samples.rows().enumerate() {
        for (r, &s) in row.iter().enumerate() {
            spins[(r, c)] = f64::from(s);
        }
    }
    let v = if cfg.disable_filters {
        plain_mean(&spins)
    } else {
        let sigma = coarse_sigma(&spins);
        robust_mean_bounded_cov(&spins, eps, sigma, &cfg.bounded_cov)?.0
    };

    let spec = SuffStatSpec::centered(v.clone())?;
    let points = suffstat_matrix(&spec, samples)?;
    let (theta, trace) = robust_learn_expfam(&points, eps, bounds, &spec, cfg)?;
    let natural = spec.natural_from_params(&theta)?;
    let k = crate::model::n_pairs(d);
    let h = DVector::from_fn(d, |i, _| natural[k + i]);
    let recovery = CenteredRecovery { v, j: theta.interaction().clone(), h };
    Ok((theta, recovery, trace))
}

/// Evaluate the external-field feasibility inequality
/// `4 (M/(1-M) + c1 sqrt(eps))^2 <=
///  (1-c0) (8 (e^{-2(alpha+2M)} / (1+e^{-2(alpha+2M)}))^2 - 2M/(1-M) - c0)`.
/// Returns the truth value with both evaluated sides.
pub fn check_external_constraint(
    m: f64,
    alpha: f64,
    c0: f64,
    c1: f64,
    eps: f64,
) -> Result<(bool, f64, f64)> {
    if !(0.0..1.0).contains(&m) {
        return Err(Error::Parameter(format!("M must be in [0,1), got {m}")));
    }
    if alpha < 0.0 || c0 < 0.0 || c1 < 0.0 || eps < 0.0 {
        return Err(Error::Parameter(
            "alpha, c0, c1 and eps must be nonnegative".into(),
        ));
    }
    let ratio = m / (1.0 - m);
    let lhs = 4.0 * (ratio + c1 * eps.sqrt()).powi(2);
    let marginal = (-2.0 * (alpha + 2.0 * m)).exp();
    let marginal = marginal / (1.0 + marginal);
    let rhs = (1.0 - c0) * (8.0 * marginal * marginal - 2.0 * ratio - c0);
    Ok((lhs <= rhs, lhs, rhs))
}
