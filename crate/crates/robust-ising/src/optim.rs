//! Projected gradient descent for smooth strongly convex objectives, where
//! both the gradient and the projection are supplied by approximate oracles.
//!
//! With a gradient oracle of error at most `delta1` and a projection oracle
//! of error at most `delta2`, the iterates of `x <- proj(x - g/L)` satisfy
//! `dist_{t+1} <= delta2 + delta1/L + sqrt(1 - m/L) * dist_t`, so after
//! `ceil((L/m) ln(diam/delta))` iterations the final point is within
//! `delta + (delta2 + delta1/L) / (1 - sqrt(1 - m/L))` of the constrained
//! minimizer.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Oracle tolerances and problem constants for [`apgd_minimize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApgdConfig {
    /// Smoothness constant `L` (also sets the step size `1/L`).
    pub smoothness: f64,
    /// Strong convexity constant `m`, with `0 < m <= L`.
    pub strong_convexity: f64,
    /// Target distance `delta` driving the planned iteration count.
    pub target_dist: f64,
    /// Gradient oracle error bound `delta1`.
    pub gradient_tol: f64,
    /// Projection oracle error bound `delta2`.
    pub projection_tol: f64,
    /// Hard cap on iterations; exceeding the planned count sets a flag.
    pub max_iters: usize,
    /// Diameter of the feasible set, used in the planned iteration count.
    pub diameter: f64,
    /// Number of trailing extra iterations to average into the returned
    /// point (0 returns the final iterate). Averaging happens after the
    /// planned count, so with exact oracles every averaged iterate already
    /// satisfies the target distance.
    pub tail_average: usize,
}

impl ApgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.strong_convexity > 0.0 && self.strong_convexity <= self.smoothness) {
            return Err(Error::Parameter(format!(
                "need 0 < m <= L, got m={} L={}",
                self.strong_convexity, self.smoothness
            )));
        }
        for (name, v) in [
            ("target_dist", self.target_dist),
            ("gradient_tol", self.gradient_tol),
            ("projection_tol", self.projection_tol),
            ("diameter", self.diameter),
        ] {
            if !(v > 0.0) {
                return Err(Error::Parameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// `ceil((L/m) ln(diam/delta))`, at least 1.
    pub fn planned_iters(&self) -> usize {
        let ratio = self.smoothness / self.strong_convexity;
        let span = (self.diameter / self.target_dist).ln().max(1.0);
        (ratio * span).ceil().max(1.0) as usize
    }

    /// Guaranteed distance of the returned point from the minimizer:
    /// `delta + (delta2 + delta1/L) / (1 - sqrt(1 - m/L))`.
    pub fn guaranteed_dist(&self) -> f64 {
        let contraction = (1.0 - self.strong_convexity / self.smoothness).sqrt();
        self.target_dist + (self.projection_tol + self.gradient_tol / self.smoothness)
            / (1.0 - contraction)
    }
}

/// Outcome of an optimization run.
#[derive(Debug, Clone)]
pub struct ApgdResult {
    pub point: DVector<f64>,
    pub iters: usize,
    /// False when the planned iteration count exceeded `max_iters`; the
    /// returned point is then the iterate with the smallest step.
    pub converged: bool,
}

/// Minimize with approximate oracles: `grad` must return a vector within
/// `gradient_tol` of the true gradient, `proj` a point of the feasible set
/// within `projection_tol` of the true projection. `start` must be feasible.
pub fn apgd_minimize<G, P>(
    mut grad: G,
    mut proj: P,
    start: &DVector<f64>,
    cfg: &ApgdConfig,
) -> Result<ApgdResult>
where
    G: FnMut(&DVector<f64>) -> DVector<f64>,
    P: FnMut(&DVector<f64>) -> DVector<f64>,
{
    cfg.validate()?;
    let planned = cfg.planned_iters();
    let (iters, converged) = if planned > cfg.max_iters {
        (cfg.max_iters, false)
    } else {
        (planned, true)
    };
    let step = 1.0 / cfg.smoothness;

    let mut x = start.clone();
    let mut best = x.clone();
    let mut best_move = f64::INFINITY;
    for _ in 0..iters {
        let g = grad(&x);
        let next = proj(&(&x - step * g));
        let moved = (&next - &x).norm();
        x = next;
        if moved < best_move {
            best_move = moved;
            best.copy_from(&x);
        }
    }
    if !converged {
        return Ok(ApgdResult { point: best, iters, converged });
    }
    if cfg.tail_average > 0 {
        let mut acc = x.clone();
        for _ in 0..cfg.tail_average {
            let g = grad(&x);
            x = proj(&(&x - step * g));
            acc += &x;
        }
        acc /= (cfg.tail_average + 1) as f64;
        return Ok(ApgdResult { point: acc, iters: iters + cfg.tail_average, converged });
    }
    Ok(ApgdResult { point: x, iters, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn box_project(x: &DVector<f64>, lo: f64, hi: f64) -> DVector<f64> {
        x.map(|v| v.clamp(lo, hi))
    }

    fn cfg(delta: f64) -> ApgdConfig {
        ApgdConfig {
            smoothness: 4.0,
            strong_convexity: 1.0,
            target_dist: delta,
            gradient_tol: 1e-12,
            projection_tol: 1e-12,
            max_iters: 10_000,
            diameter: 20.0,
            tail_average: 0,
        }
    }

    /// Quadratic (1/2)(x-a)'H(x-a) with diagonal H.
    fn quad_grad(h: &DVector<f64>, a: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(x.len(), |i, _| h[i] * (x[i] - a[i]))
    }

    #[test]
    fn recovers_interior_minimizer() {
        let a = DVector::from_vec(vec![0.3, -0.2, 0.7]);
        let h = DVector::from_vec(vec![1.0, 2.5, 4.0]);
        let delta = 1e-6;
        let r = apgd_minimize(
            |x| quad_grad(&h, &a, x),
            |x| box_project(x, -1.0, 1.0),
            &DVector::zeros(3),
            &cfg(delta),
        )
        .unwrap();
        assert!(r.converged);
        assert!((&r.point - &a).norm() <= delta, "dist {}", (&r.point - &a).norm());
    }

    #[test]
    fn lands_on_box_projection_of_exterior_minimizer() {
        // Minimizer outside the box: constrained optimum is its projection
        // (H = I makes the quadratic isotropic).
        let a = DVector::from_vec(vec![2.0, -3.0]);
        let h = DVector::from_vec(vec![1.0, 1.0]);
        let expected = DVector::from_vec(vec![1.0, -1.0]);
        let delta = 1e-8;
        let r = apgd_minimize(
            |x| quad_grad(&h, &a, x),
            |x| box_project(x, -1.0, 1.0),
            &DVector::zeros(2),
            &cfg(delta),
        )
        .unwrap();
        assert!((&r.point - &expected).norm() <= cfg(delta).guaranteed_dist());
    }

    #[test]
    fn iterates_satisfy_contraction_recursion() {
        let mut rng = crate::seeding::unit_rng(21, 0);
        let dim = 5;
        let a = DVector::from_fn(dim, |_, _| 3.0 * (rng.gen::<f64>() - 0.5));
        let h = DVector::from_fn(dim, |_, _| 1.0 + 3.0 * rng.gen::<f64>());
        let c = cfg(1e-9);
        let x_star = box_project(&a, -1.0, 1.0);
        let contraction = (1.0 - c.strong_convexity / c.smoothness).sqrt();

        let mut dists = Vec::new();
        let r = apgd_minimize(
            |x| {
                dists.push((x - &x_star).norm());
                quad_grad(&h, &a, x)
            },
            |x| box_project(x, -1.0, 1.0),
            &DVector::zeros(dim),
            &c,
        )
        .unwrap();
        dists.push((&r.point - &x_star).norm());
        for w in dists.windows(2) {
            assert!(
                w[1] <= contraction * w[0] + 1e-12,
                "recursion violated: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn noisy_oracles_stay_within_guarantee() {
        let mut rng = crate::seeding::unit_rng(22, 0);
        let dim = 4;
        let a = DVector::from_fn(dim, |_, _| rng.gen::<f64>() - 0.5);
        let h = DVector::from_fn(dim, |_, _| 1.0 + 3.0 * rng.gen::<f64>());
        let delta1 = 0.05;
        let delta2 = 0.01;
        let mut c = cfg(1e-4);
        c.gradient_tol = delta1;
        c.projection_tol = delta2;
        let noise = |rng: &mut rand_xoshiro::Xoshiro256PlusPlus, scale: f64| {
            let mut v = DVector::from_fn(dim, |_, _| rng.gen::<f64>() - 0.5);
            let n = v.norm();
            if n > 0.0 {
                v *= scale / n;
            }
            v
        };
        let mut rng_g = crate::seeding::unit_rng(23, 0);
        let mut rng_p = crate::seeding::unit_rng(23, 1);
        let r = apgd_minimize(
            |x| quad_grad(&h, &a, x) + noise(&mut rng_g, delta1),
            |x| box_project(x, -1.0, 1.0) + noise(&mut rng_p, delta2),
            &DVector::zeros(dim),
            &c,
        )
        .unwrap();
        let bound = c.guaranteed_dist();
        let dist = (&r.point - &a).norm();
        assert!(dist <= bound, "dist {dist} > guarantee {bound}");
    }

    #[test]
    fn iteration_cap_sets_flag() {
        let a = DVector::from_vec(vec![0.5]);
        let h = DVector::from_vec(vec![1.0]);
        let mut c = cfg(1e-12);
        c.max_iters = 3;
        let r = apgd_minimize(
            |x| quad_grad(&h, &a, x),
            |x| box_project(x, -1.0, 1.0),
            &DVector::zeros(1),
            &c,
        )
        .unwrap();
        assert!(!r.converged);
        assert_eq!(r.iters, 3);
    }

    #[test]
    fn rejects_bad_config() {
        let mut c = cfg(1e-6);
        c.strong_convexity = 0.0;
        assert!(c.validate().is_err());
        let mut c = cfg(1e-6);
        c.strong_convexity = 10.0;
        assert!(c.validate().is_err());
    }
}
