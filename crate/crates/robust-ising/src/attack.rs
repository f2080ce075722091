//! Contamination adversaries for benchmarking: replace exactly
//! `floor(eps n)` rows (or points) with adversarial content, leaving every
//! kept row bit-identical. Replacement realizes total-variation
//! contamination and dominates purely additive corruption.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::n_pairs;
use crate::samples::SampleSet;
use crate::seeding::unit_rng;
use crate::suffstats::SuffStatSpec;

/// Adversary families. Spin attacks keep every output row in `{-1,+1}^d`;
/// `HeavyTailInjection` applies only to real-valued point sets.
#[derive(Debug, Clone, PartialEq)]
pub enum Attack {
    /// Replace with a fixed configuration (spins `+-1` for sample sets).
    ReplaceWithPoint { point: Vec<f64> },
    /// All-equal spins chosen to maximize a linear functional of the pair
    /// statistics (with optional linear part); `None` means all-ones. For
    /// point sets, places the cluster at `distance` along `direction` from
    /// the empirical mean.
    MeanShiftDirection { direction: Option<Vec<f64>>, distance: f64 },
    /// Random spins with the chosen coordinate pairs forced equal, so the
    /// targeted statistic saturates at +1.
    PairCorrelationBoost { pairs: Vec<(usize, usize)> },
    /// Large-norm vectors at `distance` times a random scale; point sets only.
    HeavyTailInjection { distance: f64 },
}

impl Attack {
    /// CLI-facing name.
    pub fn name(&self) -> &'static str {
        match self {
            Attack::ReplaceWithPoint { .. } => "replace-with-point",
            Attack::MeanShiftDirection { .. } => "mean-shift-direction",
            Attack::PairCorrelationBoost { .. } => "pair-correlation-boost",
            Attack::HeavyTailInjection { .. } => "heavy-tail-injection",
        }
    }
}

/// Attack plus its budget and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackSpec {
    pub kind: Attack,
    /// Fraction of rows replaced, in `[0, 1/2)`.
    pub eps: f64,
    pub seed: u64,
}

impl AttackSpec {
    fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.eps) {
            return Err(Error::Parameter(format!(
                "attack budget must be in [0, 1/2), got {}",
                self.eps
            )));
        }
        Ok(())
    }

    fn chosen_rows(&self, n: usize) -> Vec<usize> {
        let m = (self.eps * n as f64).floor() as usize;
        let mut rng = unit_rng(self.seed, 0);
        // Partial Fisher-Yates over row indices.
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..m {
            let j = rng.gen_range(i..n);
            idx.swap(i, j);
        }
        idx.truncate(m);
        idx.sort_unstable();
        idx
    }
}

fn spin_of(v: f64) -> Result<i8> {
    if v == 1.0 {
        Ok(1)
    } else if v == -1.0 {
        Ok(-1)
    } else {
        Err(Error::Domain(format!("attack payload entry {v} is not +1/-1")))
    }
}

/// All-equal spin row maximizing `<direction, T(x)>`. Both candidates have
/// identical pair statistics, so only a linear part can break the tie.
fn best_uniform_row(d: usize, direction: Option<&[f64]>) -> Result<Vec<i8>> {
    let Some(dir) = direction else {
        return Ok(vec![1i8; d]);
    };
    let k = n_pairs(d);
    let score = |row: &[i8]| -> Result<f64> {
        let spec = SuffStatSpec::zero_field(d);
        let pair_part = spec.stats(row)?;
        let mut s: f64 = pair_part.iter().zip(dir.iter()).map(|(t, w)| t * w).sum();
        if dir.len() == k + d {
            for (i, &x) in row.iter().enumerate() {
                s += f64::from(x) * dir[k + i];
            }
        } else if dir.len() == d {
            // Spin-space functional.
            s = row.iter().zip(dir.iter()).map(|(&x, w)| f64::from(x) * w).sum();
        } else if dir.len() != k {
            return Err(Error::Dimension(format!(
                "direction has length {}, expected {d}, {k} or {}",
                dir.len(),
                k + d
            )));
        }
        Ok(s)
    };
    let plus = vec![1i8; d];
    let minus = vec![-1i8; d];
    Ok(if score(&plus)? >= score(&minus)? { plus } else { minus })
}

/// Replace `floor(eps n)` uniformly chosen rows of a spin sample set.
pub fn corrupt(samples: &SampleSet, attack: &AttackSpec) -> Result<SampleSet> {
    attack.validate()?;
    let d = samples.dim();
    let mut out = samples.clone();
    let rows = attack.chosen_rows(samples.len());
    if rows.is_empty() {
        return Ok(out);
    }
    match &attack.kind {
        Attack::ReplaceWithPoint { point } => {
            if point.len() != d {
                return Err(Error::Dimension(format!(
                    "payload point has length {}, samples have dimension {d}",
                    point.len()
                )));
            }
            let spin_row: Vec<i8> = point.iter().map(|&v| spin_of(v)).collect::<Result<_>>()?;
            for &r in &rows {
                out.row_mut(r).copy_from_slice(&spin_row);
            }
        }
        Attack::MeanShiftDirection { direction, distance: _ } => {
            let row = best_uniform_row(d, direction.as_deref())?;
            for &r in &rows {
                out.row_mut(r).copy_from_slice(&row);
            }
        }
        Attack::PairCorrelationBoost { pairs } => {
            for &(i, j) in pairs {
                if i >= d || j >= d || i == j {
                    return Err(Error::Parameter(format!("invalid pair ({i},{j}) for d={d}")));
                }
            }
            let mut rng = unit_rng(attack.seed, 1);
            for &r in &rows {
                let row = out.row_mut(r);
                for s in row.iter_mut() {
                    *s = if rng.gen::<bool>() { 1 } else { -1 };
                }
                for &(i, j) in pairs {
                    row[j] = row[i];
                }
            }
        }
        Attack::HeavyTailInjection { .. } => {
            return Err(Error::Parameter(
                "heavy-tail injection applies to real-valued point sets, not spin samples".into(),
            ));
        }
    }
    Ok(out)
}

/// Replace `floor(eps n)` uniformly chosen columns of a real point set.
pub fn corrupt_points(points: &DMatrix<f64>, attack: &AttackSpec) -> Result<DMatrix<f64>> {
    attack.validate()?;
    let k = points.nrows();
    let n = points.ncols();
    let mut out = points.clone();
    let cols = attack.chosen_rows(n);
    if cols.is_empty() {
        return Ok(out);
    }
    let mut rng = unit_rng(attack.seed, 1);
    match &attack.kind {
        Attack::ReplaceWithPoint { point } => {
            if point.len() != k {
                return Err(Error::Dimension(format!(
                    "payload point has length {}, points have dimension {k}",
                    point.len()
                )));
            }
            let v = DVector::from_vec(point.clone());
            for &c in &cols {
                out.set_column(c, &v);
            }
        }
        Attack::MeanShiftDirection { direction, distance } => {
            let mut dir = match direction {
                Some(d) => {
                    if d.len() != k {
                        return Err(Error::Dimension(format!(
                            "direction has length {}, points have dimension {k}",
                            d.len()
                        )));
                    }
                    DVector::from_vec(d.clone())
                }
                None => DVector::from_fn(k, |_, _| rng.gen::<f64>() - 0.5),
            };
            let norm = dir.norm();
            if norm == 0.0 {
                return Err(Error::Parameter("direction must be nonzero".into()));
            }
            dir /= norm;
            let mut mean = DVector::zeros(k);
            for c in 0..n {
                mean += points.column(c);
            }
            mean /= n as f64;
            let target = mean + *distance * dir;
            for &c in &cols {
                out.set_column(c, &target);
            }
        }
        Attack::PairCorrelationBoost { .. } => {
            return Err(Error::Parameter(
                "pair-correlation boost applies to spin samples, not point sets".into(),
            ));
        }
        Attack::HeavyTailInjection { distance } => {
            for &c in &cols {
                let mut dir = DVector::from_fn(k, |_, _| rng.gen::<f64>() - 0.5);
                let norm = dir.norm();
                if norm > 0.0 {
                    dir /= norm;
                }
                let scale = *distance * (1.0 + rng.gen::<f64>());
                out.set_column(c, &(scale * dir));
            }
        }
    }
    Ok(out)
}
