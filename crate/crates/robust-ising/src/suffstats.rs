//! Sufficient-statistic layouts and the affine maps between model parameters
//! and natural-parameter vectors.
//!
//! Two layouts are supported. `ZeroFieldPairs` maps a spin vector to the
//! products `x_i x_j` over the canonical upper-triangle order, matching the
//! density `exp(sum_{i<j} theta_ij x_i x_j)`. `CenteredWithLinear` maps to
//! `((x_i - v_i)(x_j - v_j))_{i<j}` followed by `x_1..x_d`, matching the
//! centered density `exp((1/2)(x-v)' J (x-v) + h' x)`; the corresponding
//! natural parameter is the pair block of `J` followed by `h`, and the
//! standard field is recovered as `theta_i = h_i - sum_j J_ij v_j`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{n_pairs, pair_index, IsingParameters};

/// Which statistic vector a spin configuration is mapped to.
#[derive(Debug, Clone, PartialEq)]
pub enum SuffStatSpec {
    /// Pair products `x_i x_j`, `i < j`; dimension `d(d-1)/2`.
    ZeroFieldPairs { d: usize },
    /// Centered pair products followed by the raw spins; dimension
    /// `d(d-1)/2 + d`.
    CenteredWithLinear { d: usize, center: DVector<f64> },
}

impl SuffStatSpec {
    pub fn zero_field(d: usize) -> Self {
        SuffStatSpec::ZeroFieldPairs { d }
    }

    pub fn centered(center: DVector<f64>) -> Result<Self> {
        if center.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("center entries must be finite".into()));
        }
        Ok(SuffStatSpec::CenteredWithLinear { d: center.len(), center })
    }

    pub fn spin_dim(&self) -> usize {
        match self {
            SuffStatSpec::ZeroFieldPairs { d } => *d,
            SuffStatSpec::CenteredWithLinear { d, .. } => *d,
        }
    }

    /// Dimension of the statistic vector.
    pub fn dim(&self) -> usize {
        match self {
            SuffStatSpec::ZeroFieldPairs { d } => n_pairs(*d),
            SuffStatSpec::CenteredWithLinear { d, .. } => n_pairs(*d) + *d,
        }
    }

    /// Write the statistics of `x` into `out` (length [`Self::dim`]).
    pub fn write_stats(&self, x: &[i8], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.spin_dim());
        debug_assert_eq!(out.len(), self.dim());
        match self {
            SuffStatSpec::ZeroFieldPairs { d } => {
                for i in 0..*d {
                    let xi = f64::from(x[i]);
                    for j in (i + 1)..*d {
                        out[pair_index(*d, i, j)] = xi * f64::from(x[j]);
                    }
                }
            }
            SuffStatSpec::CenteredWithLinear { d, center } => {
                let k = n_pairs(*d);
                for i in 0..*d {
                    let ci = f64::from(x[i]) - center[i];
                    for j in (i + 1)..*d {
                        out[pair_index(*d, i, j)] = ci * (f64::from(x[j]) - center[j]);
                    }
                    out[k + i] = f64::from(x[i]);
                }
            }
        }
    }

    /// Statistics of `x` as a fresh vector.
    pub fn stats(&self, x: &[i8]) -> Result<DVector<f64>> {
        if x.len() != self.spin_dim() {
            return Err(Error::Dimension(format!(
                "state has length {}, spec expects {}",
                x.len(),
                self.spin_dim()
            )));
        }
        if let Some(&bad) = x.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::Domain(format!("state entry {bad} is not +1/-1")));
        }
        let mut out = DVector::zeros(self.dim());
        self.write_stats(x, out.as_mut_slice());
        Ok(out)
    }

    /// Natural-parameter vector of `params` in this layout.
    ///
    /// For the zero-field layout the field of `params` is required to be
    /// identically zero. For the centered layout, the pair block is the
    /// interaction and the linear block is `h_i = theta_i + sum_j J_ij v_j`.
    pub fn natural_from_params(&self, params: &IsingParameters) -> Result<DVector<f64>> {
        let d = self.spin_dim();
        if params.dim() != d {
            return Err(Error::Dimension(format!(
                "model dimension {} does not match spec dimension {d}",
                params.dim()
            )));
        }
        let mut out = DVector::zeros(self.dim());
        let j_mat = params.interaction();
        for i in 0..d {
            for j in (i + 1)..d {
                out[pair_index(d, i, j)] = j_mat[(i, j)];
            }
        }
        match self {
            SuffStatSpec::ZeroFieldPairs { .. } => {
                if params.max_abs_field() != 0.0 {
                    return Err(Error::Parameter(
                        "zero-field layout requires an identically zero field".into(),
                    ));
                }
            }
            SuffStatSpec::CenteredWithLinear { center, .. } => {
                let k = n_pairs(d);
                for i in 0..d {
                    let mut h = params.field()[i];
                    for j in 0..d {
                        h += j_mat[(i, j)] * center[j];
                    }
                    out[k + i] = h;
                }
            }
        }
        Ok(out)
    }

    /// Model parameters of a natural-parameter vector in this layout.
    /// Inverse of [`Self::natural_from_params`] (exact arithmetic both ways).
    pub fn params_from_natural(&self, natural: &DVector<f64>) -> Result<IsingParameters> {
        if natural.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "natural vector has length {}, spec expects {}",
                natural.len(),
                self.dim()
            )));
        }
        let d = self.spin_dim();
        let mut j_mat = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in (i + 1)..d {
                let v = natural[pair_index(d, i, j)];
                j_mat[(i, j)] = v;
                j_mat[(j, i)] = v;
            }
        }
        let field = match self {
            SuffStatSpec::ZeroFieldPairs { .. } => DVector::zeros(d),
            SuffStatSpec::CenteredWithLinear { center, .. } => {
                let k = n_pairs(d);
                DVector::from_fn(d, |i, _| {
                    let mut theta = natural[k + i];
                    for j in 0..d {
                        theta -= j_mat[(i, j)] * center[j];
                    }
                    theta
                })
            }
        };
        IsingParameters::new(j_mat, field)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn zero_field_pair_order() {
        let spec = SuffStatSpec::zero_field(3);
        let t = spec.stats(&[1, 1, -1]).unwrap();
        assert_eq!(t.as_slice(), &[1.0, -1.0, -1.0]);
    }

    #[test]
    fn centered_reduces_to_pairs_at_zero_center() {
        let spec0 = SuffStatSpec::zero_field(4);
        let spec = SuffStatSpec::centered(DVector::zeros(4)).unwrap();
        let x = [1i8, -1, -1, 1];
        let t0 = spec0.stats(&x).unwrap();
        let t = spec.stats(&x).unwrap();
        assert_eq!(&t.as_slice()[..6], t0.as_slice());
        assert_eq!(&t.as_slice()[6..], &[1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn centered_two_site_example() {
        let spec = SuffStatSpec::centered(DVector::from_vec(vec![0.5, 0.5])).unwrap();
        let t = spec.stats(&[1, -1]).unwrap();
        assert_relative_eq!(t[0], 0.5 * (-1.5));
        assert_eq!(t[1], 1.0);
        assert_eq!(t[2], -1.0);
    }

    #[test]
    fn natural_round_trip_is_exact() {
        let mut rng = crate::seeding::unit_rng(3, 0);
        for _ in 0..20 {
            let d = 2 + rng.gen_range(0..4);
            let mut j_mat = DMatrix::zeros(d, d);
            for i in 0..d {
                for j in (i + 1)..d {
                    let v: f64 = rng.gen::<f64>() - 0.5;
                    j_mat[(i, j)] = v;
                    j_mat[(j, i)] = v;
                }
            }
            let field = DVector::from_fn(d, |_, _| rng.gen::<f64>() - 0.5);
            let params = IsingParameters::new(j_mat, field).unwrap();
            let center = DVector::from_fn(d, |_, _| rng.gen::<f64>() - 0.5);
            let spec = SuffStatSpec::centered(center).unwrap();
            let natural = spec.natural_from_params(&params).unwrap();
            let back = spec.params_from_natural(&natural).unwrap();
            assert_relative_eq!(
                (back.interaction() - params.interaction()).norm(),
                0.0,
                epsilon = 1e-14
            );
            assert_relative_eq!((back.field() - params.field()).norm(), 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn zero_field_rejects_nonzero_field() {
        let params = IsingParameters::new(
            DMatrix::zeros(2, 2),
            DVector::from_vec(vec![0.1, 0.0]),
        )
        .unwrap();
        let spec = SuffStatSpec::zero_field(2);
        assert!(spec.natural_from_params(&params).is_err());
    }

    #[test]
    fn centered_density_identity() {
        // The centered exponent differs from the standard one by a constant:
        // <T_c(x), (J,h)> = logdens_theta(x) + (1/2) v' J v with
        // theta = params_from_natural. Check on random inputs.
        let mut rng = crate::seeding::unit_rng(4, 0);
        let d = 4;
        let center = DVector::from_fn(d, |_, _| rng.gen::<f64>() - 0.5);
        let spec = SuffStatSpec::centered(center.clone()).unwrap();
        let natural = DVector::from_fn(spec.dim(), |_, _| rng.gen::<f64>() - 0.5);
        let params = spec.params_from_natural(&natural).unwrap();
        let offset = 0.5 * (center.transpose() * params.interaction() * &center)[(0, 0)];
        for _ in 0..16 {
            let x: Vec<i8> = (0..d).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
            let t = spec.stats(&x).unwrap();
            let lhs = natural.dot(&t);
            let rhs = params.unnormalized_log_density(&x).unwrap() + offset;
            assert_relative_eq!(lhs, rhs, epsilon = 1e-12);
        }
    }
}
