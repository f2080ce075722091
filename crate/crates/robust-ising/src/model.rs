//! Ising model parameters: representation, validity checks, membership tests,
//! conditional models, and the model JSON file format.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pairwise binary model on `{-1,+1}^d` with density proportional to
/// `exp((1/2) x' J x + h' x)`, where `J` is symmetric with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingParameters {
    d: usize,
    interaction: DMatrix<f64>,
    field: DVector<f64>,
}

/// Row-sum / field bounds describing the feasible parameter set.
///
/// Membership as `check_dobrushin` uses `M = 1 - eta` with zero field;
/// membership as `check_bounded` uses `(M, alpha)` directly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DobrushinSpec {
    /// Slack below critical interaction strength, in (0,1).
    pub eta: f64,
    /// Bound on the maximum row l1-norm of the interaction matrix.
    pub m: f64,
    /// Bound on the maximum absolute external-field entry.
    pub alpha: f64,
}

impl DobrushinSpec {
    /// Spec with `M = 1 - eta` and the given field bound.
    pub fn from_eta(eta: f64, alpha: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&eta) || eta == 0.0 {
            return Err(Error::Parameter(format!("eta must be in (0,1), got {eta}")));
        }
        if alpha < 0.0 || !alpha.is_finite() {
            return Err(Error::Parameter(format!("alpha must be >= 0, got {alpha}")));
        }
        Ok(Self { eta, m: 1.0 - eta, alpha })
    }

    /// Spec with explicit `(M, alpha)` bounds; `eta` is set to `1 - M` when
    /// `M < 1` and to a nominal small slack otherwise.
    pub fn from_bounds(m: f64, alpha: f64) -> Result<Self> {
        if m < 0.0 || !m.is_finite() {
            return Err(Error::Parameter(format!("M must be >= 0, got {m}")));
        }
        if alpha < 0.0 || !alpha.is_finite() {
            return Err(Error::Parameter(format!("alpha must be >= 0, got {alpha}")));
        }
        let eta = if m < 1.0 { (1.0 - m).clamp(f64::MIN_POSITIVE, 1.0) } else { 1e-3 };
        Ok(Self { eta, m, alpha })
    }
}

/// Serialized model layout: `{"d": ..., "interaction": [[...]], "field": [...]}`.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    d: usize,
    interaction: Vec<Vec<f64>>,
    field: Vec<f64>,
}

impl IsingParameters {
    /// Build from a symmetric zero-diagonal interaction matrix and a field vector.
    pub fn new(interaction: DMatrix<f64>, field: DVector<f64>) -> Result<Self> {
        let d = field.len();
        if interaction.nrows() != d || interaction.ncols() != d {
            return Err(Error::Dimension(format!(
                "interaction is {}x{}, field has length {d}",
                interaction.nrows(),
                interaction.ncols()
            )));
        }
        if d == 0 {
            return Err(Error::Parameter("dimension must be positive".into()));
        }
        for i in 0..d {
            if interaction[(i, i)] != 0.0 {
                return Err(Error::Parameter(format!("diagonal entry ({i},{i}) must be zero")));
            }
            if !field[i].is_finite() {
                return Err(Error::Parameter(format!("field entry {i} is not finite")));
            }
            for j in 0..d {
                let v = interaction[(i, j)];
                if !v.is_finite() {
                    return Err(Error::Parameter(format!("interaction entry ({i},{j}) is not finite")));
                }
                if v != interaction[(j, i)] {
                    return Err(Error::Parameter(format!("interaction not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self { d, interaction, field })
    }

    /// The zero model (uniform distribution) in dimension `d`.
    pub fn zeros(d: usize) -> Self {
        Self { d, interaction: DMatrix::zeros(d, d), field: DVector::zeros(d) }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn interaction(&self) -> &DMatrix<f64> {
        &self.interaction
    }

    pub fn field(&self) -> &DVector<f64> {
        &self.field
    }

    /// l1 norm of row `i` of the interaction matrix (diagonal is zero).
    pub fn row_l1(&self, i: usize) -> f64 {
        (0..self.d).map(|j| self.interaction[(i, j)].abs()).sum()
    }

    /// Maximum row l1 norm of the interaction matrix.
    pub fn max_row_l1(&self) -> f64 {
        (0..self.d).map(|i| self.row_l1(i)).fold(0.0, f64::max)
    }

    /// Maximum absolute field entry.
    pub fn max_abs_field(&self) -> f64 {
        self.field.iter().fold(0.0_f64, |a, &v| a.max(v.abs()))
    }

    /// `(1/2) x' J x + h' x`, the exponent of the unnormalized density.
    pub fn unnormalized_log_density(&self, x: &[i8]) -> Result<f64> {
        if x.len() != self.d {
            return Err(Error::Dimension(format!("state has length {}, expected {}", x.len(), self.d)));
        }
        if let Some(bad) = x.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::Domain(format!("state entry {bad} is not +1/-1")));
        }
        let mut acc = 0.0;
        for i in 0..self.d {
            let xi = f64::from(x[i]);
            acc += self.field[i] * xi;
            for j in (i + 1)..self.d {
                acc += self.interaction[(i, j)] * xi * f64::from(x[j]);
            }
        }
        Ok(acc)
    }

    /// Local field at site `i`: `h_i + sum_{j != i} J_ij x_j`.
    pub fn local_field(&self, x: &[i8], i: usize) -> f64 {
        let mut f = self.field[i];
        for j in 0..self.d {
            if j != i {
                f += self.interaction[(i, j)] * f64::from(x[j]);
            }
        }
        f
    }

    /// Conditional model on the index set `keep`, with the complement fixed.
    ///
    /// `fixed[j]` supplies the pinned spin for every site `j` not in `keep`
    /// (entries at kept positions are ignored). The result has interaction
    /// `J` restricted to `keep x keep` and field
    /// `h_i + sum_{j fixed} J_ij x_j`.
    pub fn conditional_model(&self, keep: &[usize], fixed: &[i8]) -> Result<IsingParameters> {
        if keep.is_empty() {
            return Err(Error::Parameter("kept index set must be nonempty".into()));
        }
        if fixed.len() != self.d {
            return Err(Error::Dimension(format!(
                "fixed assignment has length {}, expected {}",
                fixed.len(),
                self.d
            )));
        }
        let mut in_keep = vec![false; self.d];
        for &i in keep {
            if i >= self.d {
                return Err(Error::Parameter(format!("kept index {i} out of range")));
            }
            if in_keep[i] {
                return Err(Error::Parameter(format!("kept index {i} repeated")));
            }
            in_keep[i] = true;
        }
        for j in 0..self.d {
            if !in_keep[j] && fixed[j] != 1 && fixed[j] != -1 {
                return Err(Error::Domain(format!("fixed spin at {j} is not +1/-1")));
            }
        }
        let k = keep.len();
        let mut interaction = DMatrix::zeros(k, k);
        let mut field = DVector::zeros(k);
        for (a, &i) in keep.iter().enumerate() {
            let mut h = self.field[i];
            for j in 0..self.d {
                if !in_keep[j] {
                    h += self.interaction[(i, j)] * f64::from(fixed[j]);
                }
            }
            field[a] = h;
            for (b, &j) in keep.iter().enumerate() {
                if a != b {
                    interaction[(a, b)] = self.interaction[(i, j)];
                }
            }
        }
        IsingParameters::new(interaction, field)
    }

    /// Load from the model JSON format, validating symmetry and zero diagonal
    /// within `1e-12`, then symmetrizing exactly.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("model JSON: {e}")))?;
        let d = file.d;
        if d == 0 {
            return Err(Error::Parameter("dimension must be positive".into()));
        }
        if file.interaction.len() != d || file.field.len() != d {
            return Err(Error::Dimension(format!(
                "model declares d={d} but has {} interaction rows and {} field entries",
                file.interaction.len(),
                file.field.len()
            )));
        }
        let mut m = DMatrix::zeros(d, d);
        for (i, row) in file.interaction.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Dimension(format!("interaction row {i} has length {}", row.len())));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::Parameter(format!("interaction entry ({i},{j}) is not finite")));
                }
                m[(i, j)] = v;
            }
        }
        for i in 0..d {
            if m[(i, i)].abs() > 1e-12 {
                return Err(Error::Parameter(format!("diagonal entry ({i},{i}) = {} exceeds 1e-12", m[(i, i)])));
            }
            m[(i, i)] = 0.0;
            for j in (i + 1)..d {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 {
                    return Err(Error::Parameter(format!(
                        "asymmetry at ({i},{j}): {} vs {}",
                        m[(i, j)],
                        m[(j, i)]
                    )));
                }
                let sym = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = sym;
                m[(j, i)] = sym;
            }
        }
        let field = DVector::from_vec(file.field);
        IsingParameters::new(m, field)
    }

    /// Serialize to the model JSON format.
    pub fn to_json(&self) -> String {
        let file = ModelFile {
            d: self.d,
            interaction: (0..self.d)
                .map(|i| (0..self.d).map(|j| self.interaction[(i, j)]).collect())
                .collect(),
            field: self.field.iter().copied().collect(),
        };
        serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
    }
}

/// True iff `max_i sum_{j != i} |J_ij| <= 1 - eta`.
pub fn check_dobrushin(params: &IsingParameters, eta: f64) -> Result<bool> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Parameter(format!("eta must be in (0,1), got {eta}")));
    }
    Ok(params.max_row_l1() <= 1.0 - eta)
}

/// True iff every interaction row has l1 norm at most `spec.m` and every
/// field entry has magnitude at most `spec.alpha`.
pub fn check_bounded(params: &IsingParameters, spec: &DobrushinSpec) -> bool {
    params.max_row_l1() <= spec.m && params.max_abs_field() <= spec.alpha
}

/// Random benchmark model: independent uniform interactions symmetrized and
/// rescaled so the largest row l1-norm equals `max_row_l1` exactly, with
/// fields uniform in `[-alpha, alpha]`. Deterministic in `seed`.
pub fn random_bounded_model(d: usize, max_row_l1: f64, alpha: f64, seed: u64) -> IsingParameters {
    use rand::Rng;
    assert!(d >= 1, "dimension must be positive");
    assert!(max_row_l1 >= 0.0 && alpha >= 0.0);
    let mut rng = crate::seeding::unit_rng(seed, 0);
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in (i + 1)..d {
            let v: f64 = 2.0 * rng.gen::<f64>() - 1.0;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    let worst: f64 = (0..d)
        .map(|i| (0..d).map(|j| m[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    if worst > 0.0 {
        m *= max_row_l1 / worst;
    }
    let field = DVector::from_fn(d, |_, _| alpha * (2.0 * rng.gen::<f64>() - 1.0));
    IsingParameters::new(m, field).expect("construction is valid by design")
}

/// Canonical flattening of the strict upper triangle:
/// `(0,1),(0,2),...,(0,d-1),(1,2),...,(d-2,d-1)`.
#[inline]
pub fn pair_index(d: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < d);
    i * d - i * (i + 1) / 2 + (j - i - 1)
}

/// Number of strict upper-triangle entries.
#[inline]
pub fn n_pairs(d: usize) -> usize {
    d * (d - 1) / 2
}

/// Inverse of [`pair_index`]: the `(i, j)` pair at flat position `p`.
pub fn pair_at(d: usize, p: usize) -> (usize, usize) {
    debug_assert!(p < n_pairs(d));
    let mut i = 0;
    let mut offset = 0;
    loop {
        let row_len = d - i - 1;
        if p < offset + row_len {
            return (i, i + 1 + p - offset);
        }
        offset += row_len;
        i += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn uniform_coupling(d: usize, beta: f64) -> IsingParameters {
        let mut m = DMatrix::from_element(d, d, beta);
        for i in 0..d {
            m[(i, i)] = 0.0;
        }
        IsingParameters::new(m, DVector::zeros(d)).unwrap()
    }

    #[test]
    fn dobrushin_row_sums() {
        // d=3, off-diagonal 0.2 -> row sum 0.4 <= 1 - 0.5.
        assert!(check_dobrushin(&uniform_coupling(3, 0.2), 0.5).unwrap());
        // off-diagonal 0.6 -> row sum 1.2 > 1 - eta for every eta.
        assert!(!check_dobrushin(&uniform_coupling(3, 0.6), 0.01).unwrap());
        assert!(!check_dobrushin(&uniform_coupling(3, 0.6), 0.99).unwrap());
        assert!(check_dobrushin(&IsingParameters::zeros(4), 0.99).unwrap());
        assert!(check_dobrushin(&IsingParameters::zeros(4), 1e-9).unwrap());
        assert!(matches!(
            check_dobrushin(&IsingParameters::zeros(4), 0.0),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            check_dobrushin(&IsingParameters::zeros(4), 1.0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn bounded_membership() {
        let zero = IsingParameters::zeros(3);
        assert!(check_bounded(&zero, &DobrushinSpec::from_bounds(0.0, 0.0).unwrap()));

        let with_field =
            IsingParameters::new(DMatrix::zeros(3, 3), DVector::from_element(3, 0.3)).unwrap();
        assert!(!check_bounded(&with_field, &DobrushinSpec::from_bounds(0.0, 0.2).unwrap()));

        let mut m = DMatrix::zeros(3, 3);
        m[(0, 1)] = 0.25;
        m[(1, 0)] = 0.25;
        m[(1, 2)] = 0.25;
        m[(2, 1)] = 0.25;
        let p = IsingParameters::new(m, DVector::from_vec(vec![0.1, -0.1, 0.1])).unwrap();
        assert!(check_bounded(&p, &DobrushinSpec::from_bounds(0.5, 0.1).unwrap()));
    }

    #[test]
    fn log_density_values() {
        let zero = IsingParameters::zeros(3);
        assert_eq!(zero.unnormalized_log_density(&[1, -1, 1]).unwrap(), 0.0);

        let beta = 0.37;
        let p = uniform_coupling(2, beta);
        assert_relative_eq!(p.unnormalized_log_density(&[1, 1]).unwrap(), beta);
        assert_relative_eq!(p.unnormalized_log_density(&[1, -1]).unwrap(), -beta);

        assert!(matches!(
            p.unnormalized_log_density(&[1, 0]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            p.unnormalized_log_density(&[1]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn conditional_identity_and_two_site() {
        let p = uniform_coupling(2, 0.8);
        // Keeping everything changes nothing.
        let full = p.conditional_model(&[0, 1], &[0, 0]).unwrap();
        assert_eq!(full, p);

        // d=2, keep {0}, fix x_1 = +1: one-dimensional model with field beta.
        let cond = p.conditional_model(&[0], &[0, 1]).unwrap();
        assert_eq!(cond.dim(), 1);
        assert_relative_eq!(cond.field()[0], 0.8);

        assert!(matches!(p.conditional_model(&[0, 0], &[0, 1]), Err(Error::Parameter(_))));
        assert!(matches!(p.conditional_model(&[], &[1, 1]), Err(Error::Parameter(_))));
        assert!(matches!(p.conditional_model(&[0], &[0, 0]), Err(Error::Domain(_))));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 1)] = 0.3;
        m[(1, 0)] = 0.3;
        let p = IsingParameters::new(m, DVector::from_vec(vec![0.1, -0.2])).unwrap();
        let loaded = IsingParameters::from_json(&p.to_json()).unwrap();
        assert_eq!(p, loaded);

        // Asymmetry within tolerance is symmetrized exactly.
        let json = r#"{"d":2,"interaction":[[0.0,0.30000000000000004],[0.3,0.0]],"field":[0.0,0.0]}"#;
        let q = IsingParameters::from_json(json).unwrap();
        assert_eq!(q.interaction()[(0, 1)], q.interaction()[(1, 0)]);

        // Asymmetry beyond tolerance is rejected.
        let bad = r#"{"d":2,"interaction":[[0.0,0.4],[0.3,0.0]],"field":[0.0,0.0]}"#;
        assert!(IsingParameters::from_json(bad).is_err());

        // Nonzero diagonal is rejected.
        let bad = r#"{"d":2,"interaction":[[0.1,0.3],[0.3,0.0]],"field":[0.0,0.0]}"#;
        assert!(IsingParameters::from_json(bad).is_err());
    }

    #[test]
    fn pair_layout_round_trips() {
        for d in 2..=9 {
            let mut seen = 0;
            for i in 0..d {
                for j in (i + 1)..d {
                    let p = pair_index(d, i, j);
                    assert_eq!(p, seen);
                    assert_eq!(pair_at(d, p), (i, j));
                    seen += 1;
                }
            }
            assert_eq!(seen, n_pairs(d));
        }
    }
}
