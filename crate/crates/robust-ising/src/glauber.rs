//! Single-site heat-bath dynamics for sampling from an Ising model, with a
//! step count calibrated so that each chain's law is within total variation
//! `gamma` of the target under Dobrushin's condition.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{check_dobrushin, IsingParameters};
use crate::par::{map_indexed, map_indexed_serial};
use crate::samples::SampleSet;
use crate::seeding::unit_rng;

/// Memory budget for a sample batch, in spin entries.
pub const SAMPLE_BUDGET_ENTRIES: usize = 200_000_000;

/// Chain controls: target accuracy, step-count multiplier, and master seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainConfig {
    /// Target total variation accuracy of the chain law, in (0,1).
    pub gamma: f64,
    /// Multiplier `C` in the step count `ceil(C d (ln d + ln(1/gamma)))`.
    pub mixing_constant: f64,
    pub master_seed: u64,
}

impl ChainConfig {
    pub fn new(gamma: f64, mixing_constant: f64, master_seed: u64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::Parameter(format!("gamma must be in (0,1), got {gamma}")));
        }
        if !(mixing_constant > 0.0) {
            return Err(Error::Parameter(format!(
                "mixing constant must be positive, got {mixing_constant}"
            )));
        }
        Ok(Self { gamma, mixing_constant, master_seed })
    }

    /// Number of single-site updates for one sample.
    pub fn steps(&self, d: usize) -> usize {
        let d_f = d as f64;
        let t = self.mixing_constant * d_f * (d_f.ln() + (1.0 / self.gamma).ln());
        (t.ceil() as usize).max(1)
    }
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self { gamma: 0.01, mixing_constant: 20.0, master_seed: 0 }
    }
}

/// Log-probability that a heat-bath update at site `i` sets spin `target`,
/// given the rest of `state`. The update rule is
/// `P[+1] = exp(f_i) / (exp(f_i) + exp(-f_i))` with local field
/// `f_i = h_i + sum_{j != i} J_ij x_j`.
pub fn log_update_prob(params: &IsingParameters, state: &[i8], i: usize, target: i8) -> f64 {
    let f = params.local_field(state, i);
    let a = 2.0 * f * f64::from(target);
    // log sigmoid(a), stable in both tails.
    if a > 0.0 {
        -(-a).exp().ln_1p()
    } else {
        a - a.exp().ln_1p()
    }
}

/// One heat-bath update: picks a site uniformly, resamples its spin from the
/// conditional distribution given the rest. Mutates `state` in place.
pub fn glauber_step(params: &IsingParameters, state: &mut [i8], rng: &mut impl Rng) {
    let d = params.dim();
    let i = rng.gen_range(0..d);
    let f = params.local_field(state, i);
    let p_plus = 1.0 / (1.0 + (-2.0 * f).exp());
    state[i] = if rng.gen::<f64>() < p_plus { 1 } else { -1 };
}

/// Chain state with cached local fields, for long runs.
struct Chain<'a> {
    params: &'a IsingParameters,
    state: Vec<i8>,
    fields: Vec<f64>,
}

impl<'a> Chain<'a> {
    fn from_uniform(params: &'a IsingParameters, rng: &mut impl Rng) -> Self {
        let d = params.dim();
        let state: Vec<i8> = (0..d).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
        let fields = (0..d).map(|i| params.local_field(&state, i)).collect();
        Self { params, state, fields }
    }

    #[inline]
    fn step(&mut self, rng: &mut impl Rng) {
        let d = self.state.len();
        // Multiply-shift uniform site draw (bias below d / 2^64).
        let i = ((rng.next_u64() as u128 * d as u128) >> 64) as usize;
        let p_plus = 1.0 / (1.0 + (-2.0 * self.fields[i]).exp());
        let new: i8 = if rng.gen::<f64>() < p_plus { 1 } else { -1 };
        let old = self.state[i];
        if new != old {
            self.state[i] = new;
            let delta = f64::from(new - old);
            // Column i of the column-major interaction is contiguous; its
            // diagonal entry is zero, so the i-th cached field is unchanged.
            let col = &self.params.interaction().as_slice()[i * d..(i + 1) * d];
            for (f, &c) in self.fields.iter_mut().zip(col) {
                *f += delta * c;
            }
        }
    }

    fn run(&mut self, steps: usize, rng: &mut impl Rng) {
        for _ in 0..steps {
            self.step(rng);
        }
    }
}

/// Draw one approximate sample: a fresh chain from a uniform random start,
/// advanced `cfg.steps(d)` updates. Under Dobrushin's condition the output
/// law is within total variation `cfg.gamma` of the model; otherwise a
/// warning is logged and sampling proceeds without that guarantee.
pub fn sample(params: &IsingParameters, cfg: &ChainConfig, rng: &mut impl Rng) -> Vec<i8> {
    warn_if_outside_dobrushin(params);
    sample_unchecked(params, cfg, rng)
}

fn sample_unchecked(params: &IsingParameters, cfg: &ChainConfig, rng: &mut impl Rng) -> Vec<i8> {
    let mut chain = Chain::from_uniform(params, rng);
    chain.run(cfg.steps(params.dim()), rng);
    chain.state
}

fn warn_if_outside_dobrushin(params: &IsingParameters) {
    if check_dobrushin(params, 1e-6).map_or(true, |ok| !ok) {
        log::warn!(
            "interaction max row l1 = {:.4} >= 1: mixing guarantee void, sampling anyway",
            params.max_row_l1()
        );
    }
}

/// Draw `n` independent samples. Chain `i` derives its seed from
/// `(cfg.master_seed, i)`, so the result is identical for any execution
/// order or thread count.
pub fn sample_batch(params: &IsingParameters, n: usize, cfg: &ChainConfig) -> Result<SampleSet> {
    sample_batch_impl(params, n, cfg, false)
}

/// Single-threaded variant of [`sample_batch`]; output is bit-identical.
pub fn sample_batch_serial(
    params: &IsingParameters,
    n: usize,
    cfg: &ChainConfig,
) -> Result<SampleSet> {
    sample_batch_impl(params, n, cfg, true)
}

fn sample_batch_impl(
    params: &IsingParameters,
    n: usize,
    cfg: &ChainConfig,
    force_serial: bool,
) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::Parameter("sample count must be at least 1".into()));
    }
    let d = params.dim();
    if n.saturating_mul(d) > SAMPLE_BUDGET_ENTRIES {
        return Err(Error::Capacity(format!(
            "batch of {n} samples in dimension {d} exceeds the {SAMPLE_BUDGET_ENTRIES}-entry budget"
        )));
    }
    warn_if_outside_dobrushin(params);
    let draw = |i: usize| {
        let mut rng = unit_rng(cfg.master_seed, i as u64);
        sample_unchecked(params, cfg, &mut rng)
    };
    let rows = if force_serial { map_indexed_serial(n, draw) } else { map_indexed(n, draw) };
    let mut set = SampleSet::with_capacity(d, n);
    for row in &rows {
        set.push_row(row);
    }
    let mut set = set;
    set.seed = Some(cfg.master_seed);
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerate::{exact_probabilities, exact_summary};
    use crate::model::DobrushinSpec;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;

    fn random_dobrushin(d: usize, eta: f64, alpha: f64, seed: u64) -> IsingParameters {
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
        let scale = (1.0 - eta) * 0.9 / max_row;
        m *= scale;
        let f = DVector::from_fn(d, |_, _| alpha * (2.0 * rng.gen::<f64>() - 1.0));
        IsingParameters::new(m, f).unwrap()
    }

    /// TV distance between the empirical law of `samples` and the exact law.
    fn empirical_tv(params: &IsingParameters, samples: &SampleSet) -> f64 {
        let d = params.dim();
        let (probs, _) = exact_probabilities(params).unwrap();
        let mut counts = vec![0usize; 1 << d];
        for row in samples.rows() {
            let mut mask = 0usize;
            for (i, &s) in row.iter().enumerate() {
                if s == 1 {
                    mask |= 1 << i;
                }
            }
            counts[mask] += 1;
        }
        let n = samples.len() as f64;
        0.5 * probs
            .iter()
            .zip(&counts)
            .map(|(&p, &c)| (p - c as f64 / n).abs())
            .sum::<f64>()
    }

    #[test]
    fn update_probabilities_closed_form() {
        // Zero model: probability exactly 1/2 at every site.
        let zero = IsingParameters::zeros(3);
        for i in 0..3 {
            assert_relative_eq!(
                log_update_prob(&zero, &[1, -1, 1], i, 1).exp(),
                0.5,
                epsilon = 1e-15
            );
        }
        // One site with field 0.5: P[+1] = sigmoid(1).
        let p = IsingParameters::new(DMatrix::zeros(1, 1), DVector::from_vec(vec![0.5])).unwrap();
        assert_relative_eq!(
            log_update_prob(&p, &[-1], 0, 1).exp(),
            0.7310585786300049,
            epsilon = 1e-14
        );
    }

    #[test]
    fn detailed_balance_exact() {
        let params = random_dobrushin(5, 0.3, 0.2, 77);
        let mut rng = unit_rng(78, 0);
        for _ in 0..200 {
            let x: Vec<i8> = (0..5).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
            let i = rng.gen_range(0..5);
            let mut y = x.clone();
            y[i] = -y[i];
            let forward = params.unnormalized_log_density(&x).unwrap()
                + log_update_prob(&params, &x, i, y[i]);
            let backward = params.unnormalized_log_density(&y).unwrap()
                + log_update_prob(&params, &y, i, x[i]);
            assert!(
                (forward - backward).abs() <= 1e-12,
                "detailed balance residual {:.3e}",
                (forward - backward).abs()
            );
        }
    }

    #[test]
    fn batch_is_deterministic_and_matches_serial() {
        let params = random_dobrushin(4, 0.5, 0.1, 5);
        let cfg = ChainConfig::new(0.05, 20.0, 123).unwrap();
        let a = sample_batch(&params, 64, &cfg).unwrap();
        let b = sample_batch(&params, 64, &cfg).unwrap();
        let c = sample_batch_serial(&params, 64, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);

        // First chain of a batch is the single-sample draw at derived seed 0.
        let mut rng = unit_rng(123, 0);
        let single = sample(&params, &cfg, &mut rng);
        assert_eq!(a.row(0), &single[..]);
    }

    #[test]
    fn budget_is_enforced() {
        let params = IsingParameters::zeros(4);
        let cfg = ChainConfig::default();
        assert!(matches!(
            sample_batch(&params, SAMPLE_BUDGET_ENTRIES, &cfg),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn two_site_correlation_matches_tanh() {
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 1)] = 0.3;
        m[(1, 0)] = 0.3;
        let params = IsingParameters::new(m, DVector::zeros(2)).unwrap();
        let cfg = ChainConfig::new(0.02, 20.0, 2024).unwrap();
        let samples = sample_batch(&params, 100_000, &cfg).unwrap();
        let mean: f64 = samples
            .rows()
            .map(|r| f64::from(r[0]) * f64::from(r[1]))
            .sum::<f64>()
            / samples.len() as f64;
        assert!((mean - 0.2913126124515909).abs() < 0.01);
    }

    #[test]
    fn stationarity_chi_square() {
        // 2e5 samples against enumerated cell probabilities, d=3.
        let params = random_dobrushin(3, 0.3, 0.2, 31);
        let cfg = ChainConfig::new(0.02, 20.0, 32).unwrap();
        let n = 200_000usize;
        let samples = sample_batch(&params, n, &cfg).unwrap();
        let (probs, _) = exact_probabilities(&params).unwrap();
        let mut counts = vec![0usize; 8];
        for row in samples.rows() {
            let mut mask = 0usize;
            for (i, &s) in row.iter().enumerate() {
                if s == 1 {
                    mask |= 1 << i;
                }
            }
            counts[mask] += 1;
        }
        let stat: f64 = probs
            .iter()
            .zip(&counts)
            .map(|(&p, &c)| {
                let expected = p * n as f64;
                (c as f64 - expected).powi(2) / expected
            })
            .sum();
        // chi-square critical value, 7 degrees of freedom, significance 1e-4.
        assert!(stat < 29.87750390922517, "chi-square statistic {stat:.2}");
    }

    #[test]
    fn empirical_tv_small_under_dobrushin() {
        let params = random_dobrushin(4, 0.5, 0.0, 42);
        assert!(check_dobrushin(&params, 0.5).unwrap());
        let cfg = ChainConfig::new(0.01, 20.0, 7).unwrap();
        let samples = sample_batch(&params, 100_000, &cfg).unwrap();
        let tv = empirical_tv(&params, &samples);
        assert!(tv < 0.02, "empirical TV {tv:.4}");
    }

    #[test]
    fn accuracy_improves_with_mixing_constant() {
        let params = random_dobrushin(3, 0.2, 0.1, 9);
        let n = 20_000usize;
        let mut medians = Vec::new();
        for &c in &[0.25, 2.0, 16.0] {
            let mut tvs: Vec<f64> = (0..20)
                .map(|rep| {
                    let cfg = ChainConfig::new(0.05, c, 1000 + rep).unwrap();
                    let samples = sample_batch(&params, n, &cfg).unwrap();
                    empirical_tv(&params, &samples)
                })
                .collect();
            tvs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            medians.push(tvs[10]);
        }
        assert!(medians[1] <= medians[0] + 0.005, "medians {medians:?}");
        assert!(medians[2] <= medians[1] + 0.005, "medians {medians:?}");
        // The shortest chains are visibly unmixed.
        assert!(medians[0] > medians[2], "medians {medians:?}");
    }

    #[test]
    fn zero_model_batch_is_uniformish() {
        let params = IsingParameters::zeros(3);
        assert!(check_bounded_zero(&params));
        let cfg = ChainConfig::new(0.5, 1.0, 3).unwrap();
        let samples = sample_batch(&params, 100_000, &cfg).unwrap();
        let tv = empirical_tv(&params, &samples);
        assert!(tv < 0.01, "empirical TV from uniform {tv:.4}");
        let s = exact_summary(&params).unwrap();
        assert!(s.mean.amax() < 1e-12);
    }

    fn check_bounded_zero(p: &IsingParameters) -> bool {
        crate::model::check_bounded(p, &DobrushinSpec::from_bounds(0.0, 0.0).unwrap())
    }
}
