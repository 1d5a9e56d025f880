mod common;

use common::{gaussian_matrix, gaussian_vector};
use nalgebra::{DMatrix, DVector};
use postdantzig::instruments::{
    build_instrument_v, compute_a_eigen, compute_a_row, plan_instruments, thresholded_cross_moments, AMethod,
    OmegaEstimate,
};
use postdantzig::linalg::{center_columns, max_gram_eigenvalue};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// With `Cov(Z*) = I` and a rank-d `Σ_{U,Z*}`, the projection through `A`
/// loses nothing: `Σ A'(AA')⁻¹ A z = Σ z` for every `z`.
#[test]
fn eigen_choice_preserves_population_cross_covariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    for case in 0..100 {
        let d = 1 + case % 3;
        let q = 1 + case % 5;
        let l = d + 2 + case % 4;
        let k = q + d;
        let sigma = gaussian_matrix(&mut rng, l, d) * gaussian_matrix(&mut rng, d, k);
        let omega = OmegaEstimate::from_cross_moments(&sigma, d).unwrap();
        let a = compute_a_eigen(&omega);
        let aat = &a * a.transpose();
        assert!((&aat - DMatrix::identity(d, d)).amax() <= 1e-10, "case {case}");
        let proj = a.transpose() * aat.try_inverse().unwrap() * &a;
        for _ in 0..5 {
            let z = gaussian_vector(&mut rng, k);
            let resid = (&sigma * &proj * &z - &sigma * &z).norm();
            assert!(resid <= 1e-8, "case {case}: residual {resid}");
        }
    }
}

#[test]
fn rank_one_population_gives_unit_direction() {
    let c = DMatrix::from_row_slice(1, 4, &[3.0, 0.0, 0.0, 0.0]);
    let om = OmegaEstimate::from_cross_moments(&c, 1).unwrap();
    let mut expected = DMatrix::zeros(4, 4);
    expected[(0, 0)] = 9.0;
    assert!((&om.omega_hat - expected).amax() < 1e-12);
    let a = compute_a_eigen(&om);
    assert!((a[(0, 0)].abs() - 1.0).abs() < 1e-12);
    assert!(a.columns(1, 3).amax() < 1e-12);
}

/// Independent standard normal columns: each sample moment has sd 1/√n, so
/// it clears the 1/√n threshold with probability P(|N(0,1)| > 1) ≈ 0.3173.
#[test]
fn spurious_moments_survive_at_one_sd_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 5000;
    let (mut kept, mut total) = (0usize, 0usize);
    for _ in 0..10 {
        let u = center_columns(&gaussian_matrix(&mut rng, n, 20));
        let z = center_columns(&gaussian_matrix(&mut rng, n, 10));
        let c = thresholded_cross_moments(&u, &z);
        kept += c.iter().filter(|v| **v != 0.0).count();
        total += c.len();
    }
    let rate = kept as f64 / total as f64;
    assert!((rate - 0.3173).abs() < 0.03, "survival rate {rate}");
}

#[test]
fn assembled_a_has_orthonormal_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..30 {
        let d = 1 + case % 3;
        let n = 80;
        let base = gaussian_matrix(&mut rng, n, 4);
        let z = base.columns(0, 3) + gaussian_matrix(&mut rng, n, 3) * 0.5;
        let u = DMatrix::from_fn(n, 8, |i, j| base[(i, j % 4)] * 0.7 + rng.random_range(-1.0..1.0));
        let alpha = gaussian_vector(&mut rng, 8);
        let star: Vec<usize> = (0..d).collect();
        let plan = plan_instruments(&z, &u, &alpha, d, &star, AMethod::Eigen).unwrap();
        let aat = &plan.a * plan.a.transpose();
        assert!((&aat - DMatrix::identity(d, d)).amax() <= 1e-10, "case {case}");
        let w = plan.z_star(&z, &u) * plan.a.transpose();
        assert!((plan.v.columns(1, d) - w).amax() < 1e-12);
        assert!((plan.rho_scale - alpha.norm() * plan.lambda_m.sqrt()).abs() < 1e-12);
    }
}

#[test]
fn row_method_limits() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let zs = gaussian_matrix(&mut rng, 200, 4);
    let eye = DMatrix::identity(4, 4);
    let a = compute_a_row(&zs, &eye, &[1e-9; 4]).unwrap();
    for v in a.iter() {
        assert!((v.abs() - 0.5).abs() < 1e-6);
    }
    // G = I exactly: Â_k = D_k / (1 + c), uniform shrinkage.
    let g_identity = DMatrix::identity(4, 4) * 2.0;
    let b = compute_a_row(&g_identity, &eye, &[1.0; 4]).unwrap();
    for v in b.iter() {
        assert!((v.abs() - 0.5).abs() < 1e-12);
    }
    assert!(compute_a_row(&zs, &DMatrix::zeros(4, 4), &[1.0; 4]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn row_method_ignores_scale_of_d(seed in any::<u64>(), scale in 0.01f64..100.0, c in 0.01f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let zs = gaussian_matrix(&mut rng, 50, 3);
        let m = gaussian_matrix(&mut rng, 3, 3);
        let d = &m * m.transpose();
        let a = compute_a_row(&zs, &d, &[c; 3]).unwrap();
        let b = compute_a_row(&zs, &(&d * scale), &[c; 3]).unwrap();
        prop_assert!((a - b).amax() < 1e-9);
    }

    #[test]
    fn doubling_alpha_leaves_first_coordinate(seed in any::<u64>(), s in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = gaussian_matrix(&mut rng, 20, 2);
        let u = gaussian_matrix(&mut rng, 20, 4);
        let alpha = gaussian_vector(&mut rng, 4);
        let a = DMatrix::from_row_slice(1, 3, &[0.6, 0.0, 0.8]);
        let p1 = build_instrument_v(&z, &u, &[1], &a, &alpha).unwrap();
        let p2 = build_instrument_v(&z, &u, &[1], &a, &(&alpha * s)).unwrap();
        prop_assert!((p1.v.column(0) - p2.v.column(0)).amax() < 1e-12);
    }
}

#[test]
fn single_column_u_scales_by_top_singular_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let z = gaussian_matrix(&mut rng, 15, 2);
    let u = gaussian_matrix(&mut rng, 15, 1);
    let a = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
    let plan = build_instrument_v(&z, &u, &[0], &a, &DVector::from_element(1, 1.0)).unwrap();
    let sigma_max = u.norm();
    assert!((max_gram_eigenvalue(&u) - sigma_max * sigma_max).abs() < 1e-10);
    assert!((plan.v.column(0) - u.column(0) / sigma_max).amax() < 1e-12);
    assert!((plan.v.column(1) - z.column(0)).amax() < 1e-12);
}

#[test]
fn zero_alpha_rejected() {
    let z = DMatrix::from_fn(5, 1, |i, _| i as f64);
    let u = DMatrix::from_fn(5, 2, |i, j| (i * j) as f64);
    let a = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
    assert!(build_instrument_v(&z, &u, &[0], &a, &DVector::zeros(2)).is_err());
}
