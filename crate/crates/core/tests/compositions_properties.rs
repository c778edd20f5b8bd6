mod common;

use alphaclust::compositions::{
    alpha_transform, centered_power, helmert_submatrix, ilr, inverse_alpha_transform, log_jacobian,
    CompositionMatrix,
};
use alphaclust::seeding::rng_from_seed;
use common::{fd_log_jacobian, random_composition, rel_close};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn composition(p: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-4.0f64..4.0, p).prop_map(|logs| {
        let raw: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
        let s: f64 = raw.iter().sum();
        raw.iter().map(|v| v / s).collect()
    })
}

fn sized_composition() -> impl Strategy<Value = Vec<f64>> {
    prop_oneof![composition(3), composition(5), composition(10)]
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn inverse_recovers_the_composition(x in sized_composition(), alpha in -1.0f64..=1.0) {
        let m = CompositionMatrix::from_rows(&[x]).unwrap();
        let y = alpha_transform(&m, alpha).unwrap();
        let back = inverse_alpha_transform(&y).unwrap();
        prop_assert!(max_abs_diff(back.values(), m.values()) <= 1e-10);
    }

    #[test]
    fn small_alpha_approaches_ilr(x in sized_composition()) {
        let m = CompositionMatrix::from_rows(&[x]).unwrap();
        let y = alpha_transform(&m, 1e-8).unwrap();
        prop_assert!(max_abs_diff(y.values(), &ilr(&m).unwrap()) <= 1e-6);
    }

    #[test]
    fn centred_power_rows_sum_to_zero_and_respect_bounds(x in sized_composition(), alpha in -1.0f64..=1.0) {
        let m = CompositionMatrix::from_rows(&[x]).unwrap();
        let w = centered_power(&m, alpha).unwrap();
        let p = m.ncols() as f64;
        prop_assert!(w.row(0).sum().abs() <= 1e-10);
        if alpha > 0.0 {
            for &v in w.iter() {
                prop_assert!(v >= -1.0 / alpha - 1e-12 && v <= (p - 1.0) / alpha + 1e-12);
            }
        }
    }

    #[test]
    fn grid_alphas_round_trip(x in sized_composition(), step in 0usize..=20) {
        let alpha = -1.0 + 0.1 * step as f64;
        let m = CompositionMatrix::from_rows(&[x]).unwrap();
        let back = inverse_alpha_transform(&alpha_transform(&m, alpha).unwrap()).unwrap();
        prop_assert!(max_abs_diff(back.values(), m.values()) <= 1e-10);
    }
}

#[test]
fn helmert_rows_are_orthonormal_contrasts() {
    for p in 2..=20 {
        let h = helmert_submatrix(p).unwrap();
        let m = h.matrix();
        let gram = m * m.transpose();
        assert!(max_abs_diff(&gram, &DMatrix::identity(p - 1, p - 1)) <= 1e-12, "p = {p}");
        for r in m.row_iter() {
            assert!(r.sum().abs() <= 1e-12);
        }
    }
}

#[test]
fn log_jacobian_matches_finite_difference_determinant() {
    let mut rng = rng_from_seed(2024);
    for trial in 0..100 {
        let p = if trial % 2 == 0 { 3 } else { 5 };
        let x = random_composition(&mut rng, p);
        let alpha = rng.random_range(-1.0..=1.0);
        let m = CompositionMatrix::from_rows(&[x.clone()]).unwrap();
        let analytic = log_jacobian(&m, alpha).unwrap()[0];
        let numeric = fd_log_jacobian(&x, alpha);
        assert!(
            rel_close(analytic, numeric, 1e-4),
            "x = {x:?}, alpha = {alpha}: {analytic} vs {numeric}"
        );
    }
}

#[test]
fn log_jacobian_worked_values() {
    let u = CompositionMatrix::from_rows(&[vec![1.0 / 3.0; 3]]).unwrap();
    assert!((log_jacobian(&u, 1.0).unwrap()[0] - 2.5 * 3f64.ln()).abs() < 1e-12);
    let x = vec![0.2, 0.3, 0.5];
    let m = CompositionMatrix::from_rows(&[x.clone()]).unwrap();
    assert!(rel_close(log_jacobian(&m, 0.5).unwrap()[0], fd_log_jacobian(&x, 0.5), 1e-6));
    assert!(rel_close(log_jacobian(&m, 0.0).unwrap()[0], fd_log_jacobian(&x, 0.0), 1e-6));
}
