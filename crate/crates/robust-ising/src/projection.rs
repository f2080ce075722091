//! Euclidean projection onto the feasible parameter set
//! `Omega = { symmetric, zero diagonal, max row l1 <= M, max |h_i| <= alpha }`.
//!
//! The field box is an independent coordinate block, so it is clamped
//! exactly. The interaction part is projected by Dykstra's alternating
//! projections cycling over the `d` row-l1-ball constraints; each
//! sub-projection is an exact l1-ball projection of one row, written back
//! symmetrically. A final enforcement sweep makes membership exact: an
//! l1-ball projection only shrinks entry magnitudes, so one pass over the
//! violating rows cannot push any other row back out.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{DobrushinSpec, IsingParameters};

/// Exact Euclidean projection of `v` onto the l1 ball of the given radius.
pub fn l1_ball_project(v: &mut [f64], radius: f64) {
    debug_assert!(radius >= 0.0);
    let norm: f64 = v.iter().map(|x| x.abs()).sum();
    if norm <= radius {
        return;
    }
    if radius == 0.0 {
        v.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in mags.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - radius) / (k + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    for x in v.iter_mut() {
        let shrunk = (x.abs() - theta).max(0.0);
        *x = x.signum() * shrunk;
    }
}

fn frobenius_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm()
}

/// Project `raw` onto the set described by `spec`, within `tol` of the true
/// Euclidean projection. Output membership is exact.
pub fn project_parameter_set(
    raw: &IsingParameters,
    spec: &DobrushinSpec,
    tol: f64,
) -> Result<IsingParameters> {
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("tolerance must be positive, got {tol}")));
    }
    let d = raw.dim();
    let m_bound = spec.m;

    // Field block: exact box projection.
    let mut field = raw.field().clone();
    for h in field.iter_mut() {
        *h = h.clamp(-spec.alpha, spec.alpha);
    }

    let mut x = raw.interaction().clone();
    if d > 1 && raw.max_row_l1() > m_bound {
        x = dykstra_rows(x, m_bound, tol)?;
    }

    // Enforcement sweep: exact feasibility.
    enforce_rows(&mut x, m_bound);

    IsingParameters::new(x, field)
}

/// Dykstra's alternating projections over the `d` row-l1 constraints.
fn dykstra_rows(mut x: DMatrix<f64>, m_bound: f64, tol: f64) -> Result<DMatrix<f64>> {
    let d = x.nrows();
    // Correction vectors, one per row constraint, supported on that row.
    let mut corrections = vec![vec![0.0f64; d]; d];
    let diam = 2.0 * (d as f64).sqrt() * m_bound.max(tol);
    let cycles_cap = 10 * ((diam / tol).ln().ceil().max(1.0) as usize);

    let mut row = vec![0.0f64; d];
    let mut prev = x.clone();
    for _cycle in 0..cycles_cap {
        for i in 0..d {
            let corr = &mut corrections[i];
            for j in 0..d {
                row[j] = if j == i { 0.0 } else { x[(i, j)] + corr[j] };
            }
            let before = row.clone();
            l1_ball_project(&mut row[..], m_bound);
            row[i] = 0.0;
            for j in 0..d {
                if j != i {
                    corr[j] = before[j] - row[j];
                    x[(i, j)] = row[j];
                    x[(j, i)] = row[j];
                }
            }
        }
        let moved = frobenius_distance(&x, &prev);
        if moved < tol / 2.0 {
            return Ok(x);
        }
        prev.copy_from(&x);
    }
    let residual = max_row_violation(&x, m_bound);
    Err(Error::Numeric(format!(
        "row projection did not converge within {cycles_cap} cycles (residual {residual:.3e})"
    )))
}

fn max_row_violation(x: &DMatrix<f64>, m_bound: f64) -> f64 {
    let d = x.nrows();
    (0..d)
        .map(|i| ((0..d).map(|j| x[(i, j)].abs()).sum::<f64>() - m_bound).max(0.0))
        .fold(0.0, f64::max)
}

fn enforce_rows(x: &mut DMatrix<f64>, m_bound: f64) {
    let d = x.nrows();
    let mut row = vec![0.0f64; d];
    for i in 0..d {
        let sum: f64 = (0..d).map(|j| x[(i, j)].abs()).sum();
        if sum > m_bound {
            for j in 0..d {
                row[j] = if j == i { 0.0 } else { x[(i, j)] };
            }
            l1_ball_project(&mut row[..], m_bound);
            for j in 0..d {
                if j != i {
                    x[(i, j)] = row[j];
                    x[(j, i)] = row[j];
                }
            }
        }
    }
}
