use nalgebra::{DMatrix, DVector};
use postdantzig::datamodel::{
    make_beta, make_toeplitz_cov, sigma_for_r2, signal_zero_mean, simulate_dataset, theoretical_r2, BetaType,
    CoefficientSpec, TrueModel,
};
use postdantzig::linalg::{column_means, covariance, sym_eigen_desc};
use proptest::prelude::*;

#[test]
fn sample_covariance_matches_toeplitz() {
    let p = 8;
    let model = TrueModel::new(DVector::zeros(p), 0.6, DVector::zeros(p), 1.0).unwrap();
    let data = simulate_dataset(&model, 10_000, 42).unwrap();
    let cov = covariance(&data.x);
    let max_err = (&cov - &model.sigma_x).amax();
    assert!(max_err < 0.05, "max entry error {max_err}");
}

#[test]
fn column_means_follow_mu_rule() {
    let spec = CoefficientSpec::from_type(BetaType::I, 5);
    let p = 30;
    let beta = make_beta(&spec, p).unwrap();
    let mu = signal_zero_mean(p, &spec.zero_based_indices(), 2.0);
    let model = TrueModel::new(beta, 0.1, mu.clone(), 0.5).unwrap();
    let n = 400;
    let data = simulate_dataset(&model, n, 9).unwrap();
    let means = column_means(&data.x);
    let tol = 4.0 / (n as f64).sqrt();
    for j in 0..p {
        assert!((means[j] - mu[j]).abs() < tol, "column {j}: {}", means[j]);
    }
    assert_eq!(mu.iter().take(7).sum::<f64>(), 0.0);
}

#[test]
fn empirical_r2_near_theoretical() {
    let spec = CoefficientSpec::from_type(BetaType::II, 77);
    let p = 120;
    let beta = make_beta(&spec, p).unwrap();
    let sx = make_toeplitz_cov(0.3, p).unwrap();
    let sigma = sigma_for_r2(&beta, &sx, 0.8).unwrap();
    let model = TrueModel::new(beta, 0.3, DVector::zeros(p), sigma).unwrap();
    let data = simulate_dataset(&model, 2000, 1).unwrap();
    let ym = data.y.mean();
    let var_y = data.y.iter().map(|v| (v - ym).powi(2)).sum::<f64>() / 1999.0;
    let r2 = (var_y - sigma * sigma) / var_y;
    assert!((r2 - 0.8).abs() < 0.1, "empirical R² {r2}");
}

#[test]
fn tail_zero_fraction() {
    let spec = CoefficientSpec {
        beta_i: vec![1.0],
        index_set: vec![1],
        ..CoefficientSpec::from_type(BetaType::I, 2024)
    };
    let p = 40_001;
    let beta = make_beta(&spec, p).unwrap();
    let zeros = beta.iter().skip(1).filter(|b| **b == 0.0).count() as f64 / (p - 1) as f64;
    assert!((zeros - 0.5 / 0.65).abs() < 0.01, "zero fraction {zeros}");
    assert!(beta.iter().skip(1).all(|b| (0.0..0.15).contains(b)));
}

#[test]
fn noiseless_response_is_exact() {
    let spec = CoefficientSpec::from_type(BetaType::III, 3);
    let beta = make_beta(&spec, 25).unwrap();
    let model = TrueModel::new(beta.clone(), 0.2, DVector::from_element(25, 1.0), 0.0).unwrap();
    let data = simulate_dataset(&model, 30, 8).unwrap();
    assert!((&data.y - &data.x * &beta).amax() < 1e-12);
    assert_eq!(simulate_dataset(&model, 30, 8).unwrap(), data);
}

#[test]
fn type_one_r2_round_trip() {
    let spec = CoefficientSpec::from_type(BetaType::I, 0);
    let mut beta = DVector::zeros(100);
    for (&i, &b) in spec.index_set.iter().zip(&spec.beta_i) {
        beta[i - 1] = b;
    }
    let sx = make_toeplitz_cov(0.1, 100).unwrap();
    let s = sigma_for_r2(&beta, &sx, 0.98).unwrap();
    assert!((theoretical_r2(&beta, &sx, s).unwrap() - 0.98).abs() < 1e-12);
}

proptest! {
    #[test]
    fn toeplitz_is_positive_definite(rho in -0.99f64..0.99, p in 1usize..200) {
        let s = make_toeplitz_cov(rho, p).unwrap();
        let (eig, _) = sym_eigen_desc(&s);
        prop_assert!(eig[p - 1] > 0.0);
        prop_assert_eq!(&s, &s.transpose());
    }

    #[test]
    fn r2_decreases_in_noise(s1 in 0.01f64..5.0, ds in 0.01f64..5.0, seed in any::<u64>()) {
        let spec = CoefficientSpec::from_type(BetaType::I, seed);
        let beta = make_beta(&spec, 20).unwrap();
        let sx: DMatrix<f64> = make_toeplitz_cov(0.1, 20).unwrap();
        prop_assert!(theoretical_r2(&beta, &sx, s1 + ds).unwrap() < theoretical_r2(&beta, &sx, s1).unwrap());
    }
}
