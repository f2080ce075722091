//! Randomized property tests for the algebraic building blocks.

use proptest::prelude::*;

use nalgebra::{DMatrix, DVector};
use robust_ising::model::{n_pairs, pair_at, pair_index, IsingParameters};
use robust_ising::projection::l1_ball_project;
use robust_ising::suffstats::SuffStatSpec;

fn spin_vec(d: usize) -> impl Strategy<Value = Vec<i8>> {
    proptest::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], d)
}

proptest! {
    #[test]
    fn pair_layout_is_a_bijection(d in 2usize..12, p in 0usize..66) {
        prop_assume!(p < n_pairs(d));
        let (i, j) = pair_at(d, p);
        prop_assert!(i < j && j < d);
        prop_assert_eq!(pair_index(d, i, j), p);
    }

    #[test]
    fn pair_stats_are_products(x in spin_vec(6)) {
        let spec = SuffStatSpec::zero_field(6);
        let t = spec.stats(&x).unwrap();
        for a in 0..t.len() {
            let (i, j) = pair_at(6, a);
            prop_assert_eq!(t[a], f64::from(x[i]) * f64::from(x[j]));
            prop_assert!(t[a] == 1.0 || t[a] == -1.0);
        }
    }

    #[test]
    fn centered_stats_respect_range(x in spin_vec(5), c in proptest::collection::vec(-0.9f64..0.9, 5)) {
        let center = DVector::from_vec(c.clone());
        let sup = 1.0 + c.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let spec = SuffStatSpec::centered(center).unwrap();
        let t = spec.stats(&x).unwrap();
        for a in 0..n_pairs(5) {
            prop_assert!(t[a].abs() <= sup * sup + 1e-12);
        }
        for i in 0..5 {
            prop_assert_eq!(t[n_pairs(5) + i], f64::from(x[i]));
        }
    }

    #[test]
    fn zero_field_density_is_flip_symmetric(x in spin_vec(5), seed in 0u64..1000) {
        let params = robust_ising::model::random_bounded_model(5, 0.8, 0.0, seed);
        let flipped: Vec<i8> = x.iter().map(|&s| -s).collect();
        let a = params.unnormalized_log_density(&x).unwrap();
        let b = params.unnormalized_log_density(&flipped).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn l1_projection_is_feasible_idempotent_and_optimal(
        v in proptest::collection::vec(-3.0f64..3.0, 1..8),
        radius in 0.0f64..2.0,
        probe in proptest::collection::vec(-1.0f64..1.0, 8),
    ) {
        let mut projected = v.clone();
        l1_ball_project(&mut projected, radius);
        let norm: f64 = projected.iter().map(|x| x.abs()).sum();
        prop_assert!(norm <= radius + 1e-9, "outside ball: {norm} > {radius}");

        let mut twice = projected.clone();
        l1_ball_project(&mut twice, radius);
        for (a, b) in projected.iter().zip(&twice) {
            prop_assert!((a - b).abs() <= 1e-12, "not idempotent");
        }

        // Optimality: no feasible probe point is closer to the input.
        // Scale the probe into the ball.
        let mut w: Vec<f64> = probe.iter().take(v.len()).copied().collect();
        while w.len() < v.len() {
            w.push(0.0);
        }
        let wnorm: f64 = w.iter().map(|x| x.abs()).sum();
        if wnorm > 0.0 {
            let scale = radius / wnorm * 0.999;
            for x in &mut w {
                *x *= scale;
            }
        }
        let dist = |a: &[f64], b: &[f64]| -> f64 {
            a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
        };
        prop_assert!(
            dist(&projected, &v) <= dist(&w, &v) + 1e-9,
            "probe point is closer than the projection"
        );
    }

    #[test]
    fn natural_coordinates_round_trip(seed in 0u64..500, d in 2usize..6) {
        let params = robust_ising::model::random_bounded_model(d, 0.9, 0.5, seed);
        let spec = SuffStatSpec::centered(DVector::from_element(d, 0.25)).unwrap();
        let natural = spec.natural_from_params(&params).unwrap();
        let back = spec.params_from_natural(&natural).unwrap();
        prop_assert!((back.interaction() - params.interaction()).norm() <= 1e-13);
        prop_assert!((back.field() - params.field()).norm() <= 1e-12);
    }
}

#[test]
fn model_json_rejects_shape_mismatches() {
    let bad = r#"{"d":3,"interaction":[[0.0,0.1],[0.1,0.0]],"field":[0.0,0.0,0.0]}"#;
    assert!(IsingParameters::from_json(bad).is_err());
    let ok = IsingParameters::new(DMatrix::zeros(2, 2), DVector::zeros(2)).unwrap();
    assert_eq!(ok.dim(), 2);
}
