mod common;

use common::*;
use gwb_core::posterior::{bl1_update, bl2_update, equilibrium_drift, gwb1_update};
use gwb_core::{DMatrix, DVector, PriorSpec, SymMatrix, ViewSet, ViewTarget};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scalar_views(nu: f64, var: f64, target: ViewTarget) -> ViewSet {
    ViewSet::new(
        DMatrix::from_element(1, 1, 1.0),
        DVector::from_element(1, nu),
        SymMatrix::from_diagonal(&[var]),
        target,
        0.5,
    )
    .unwrap()
}

#[test]
fn single_asset_formulas() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..1000 {
        let mu: f64 = rng.random_range(-0.2..0.2);
        let s2: f64 = rng.random_range(0.001..0.2);
        let tau: f64 = rng.random_range(0.001..1.0);
        let nu: f64 = rng.random_range(-0.2..0.2);
        let v2: f64 = rng.random_range(0.001..0.2);
        let prior = PriorSpec::new(DVector::from_element(1, mu), SymMatrix::from_diagonal(&[s2]), tau, 2.5, 0.0).unwrap();
        let post = bl1_update(&prior, &scalar_views(nu, v2, ViewTarget::DriftSpace)).unwrap();
        let expected_mu = (v2 * mu + tau * s2 * nu) / (v2 + tau * s2);
        let expected_var = s2 + tau * s2 * v2 / (tau * s2 + v2);
        assert!((post.mean[0] - expected_mu).abs() <= 1e-12);
        assert!((post.cov.as_matrix()[(0, 0)] - expected_var).abs() <= 1e-12);
    }
}

/// The textbook form with explicit inverses.
fn explicit_bl(mu: &DVector<f64>, c: &DMatrix<f64>, v: &ViewSet) -> (DVector<f64>, DMatrix<f64>) {
    let ci = c.clone().try_inverse().unwrap();
    let vi = v.cov.as_matrix().clone().try_inverse().unwrap();
    let h = (&ci + v.pick.transpose() * &vi * &v.pick).try_inverse().unwrap();
    let mean = &h * (&ci * mu + v.pick.transpose() * &vi * &v.nu);
    (mean, h)
}

#[test]
fn woodbury_form_matches_explicit_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for case in 0..100 {
        let n = 2 + case % 6;
        let nv = 1 + case % n;
        let cov = random_spd(n, 0.2, &mut rng);
        let mu = normal_vector(n, &mut rng);
        let tau = 0.05;
        let views = random_views(n, nv, &mut rng).with_target(ViewTarget::DriftSpace);
        let prior = PriorSpec::new(mu.clone(), cov.clone(), tau, 2.5, 0.0).unwrap();
        let post = bl1_update(&prior, &views).unwrap();
        let (mean, h) = explicit_bl(&mu, &(cov.as_matrix() * tau), &views);
        assert!((&post.mean - mean).amax() <= 1e-9, "case {case}");
        assert!((post.cov.as_matrix() - cov.as_matrix() - h).amax() <= 1e-9, "case {case}");

        let views = views.with_target(ViewTarget::ReturnSpace);
        let post = bl2_update(&mu, &cov, &views).unwrap();
        let (mean, h) = explicit_bl(&mu, cov.as_matrix(), &views);
        assert!((&post.mean - mean).amax() <= 1e-9, "case {case}");
        assert!((post.cov.as_matrix() - h).amax() <= 1e-9, "case {case}");
    }
}

#[test]
fn uninformative_views_leave_drift() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for case in 0..20 {
        let n = 3 + case % 3;
        let cov = random_spd(n, 0.2, &mut rng);
        let mu = normal_vector(n, &mut rng);
        let pick = normal_matrix(2, n, &mut rng);
        let nu = normal_vector(2, &mut rng);
        let vague = SymMatrix::identity(2).scaled(1e12);
        let v = ViewSet::new(pick, nu, vague, ViewTarget::DriftSpace, 0.5).unwrap();
        let prior = PriorSpec::new(mu.clone(), cov.clone(), 0.1, 2.5, 0.0).unwrap();
        let m1 = bl1_update(&prior, &v).unwrap().mean;
        assert!((&m1 - &mu).norm() <= 1e-6 * mu.norm());
        let m2 = bl2_update(&mu, &cov, &v.with_target(ViewTarget::ReturnSpace)).unwrap().mean;
        assert!((&m2 - &mu).norm() <= 1e-6 * mu.norm());
    }
}

#[test]
fn neutral_scalar_return_view() {
    let post = bl2_update(
        &DVector::from_element(1, 0.04),
        &SymMatrix::from_diagonal(&[0.09]),
        &scalar_views(0.04, 0.16, ViewTarget::ReturnSpace),
    )
    .unwrap();
    assert_eq!(post.mean[0], 0.04);
    assert!((post.cov.as_matrix()[(0, 0)] - 0.09 * 0.16 / 0.25).abs() <= 1e-16);
}

#[test]
fn equilibrium_drift_inverts_unconstrained_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    for _ in 0..50 {
        let n = 5;
        let cov = random_spd(n, 0.1, &mut rng);
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let w = DVector::from_iterator(n, raw.iter().map(|x| x / total));
        let gamma = 2.5;
        let rf = 0.01;
        let mu = equilibrium_drift(&cov, &w, gamma, rf).unwrap();
        let back = cov.scaled(gamma).solve_vec(&mu.map(|m| m - rf)).unwrap();
        assert!((back - &w).amax() <= 1e-8);
    }
}

#[test]
fn drift_flavour_limits() {
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    let n = 3;
    let cov = random_spd(n, 0.2, &mut rng);
    let mu = normal_vector(n, &mut rng);
    let tau = 0.2;
    let prior = PriorSpec::new(mu.clone(), cov.clone(), tau, 2.5, 0.0).unwrap();
    let vcov = random_spd(n, 0.1, &mut rng);
    let views = ViewSet::new(DMatrix::identity(n, n), normal_vector(n, &mut rng), vcov.clone(), ViewTarget::DriftSpace, 1.0).unwrap();

    let zero = gwb1_update(&prior, &views, 0.0).unwrap();
    assert_eq!(zero.mean, mu);
    assert!((zero.cov.as_matrix() - cov.as_matrix() * (1.0 + tau)).amax() <= 1e-15);

    let full = gwb1_update(&prior, &views, f64::INFINITY).unwrap();
    assert!((&full.mean - &views.nu).amax() <= 1e-12);
    assert!((full.cov.as_matrix() - cov.as_matrix() - vcov.as_matrix()).amax() <= 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn drift_views_only_add_return_uncertainty(seed in any::<u64>(), n in 2usize..6, tau in 0.01f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cov = random_spd(n, 0.1, &mut rng);
        let prior = PriorSpec::new(normal_vector(n, &mut rng), cov.clone(), tau, 2.5, 0.0).unwrap();
        let views = random_views(n, 1 + (seed as usize) % n, &mut rng).with_target(ViewTarget::DriftSpace);
        let post = bl1_update(&prior, &views).unwrap();
        let diff = SymMatrix::new(post.cov.as_matrix() - cov.as_matrix()).unwrap();
        let spec = diff.spectrum();
        prop_assert!(spec.min() >= -1e-12 * cov.spectrum().scale());
    }

    #[test]
    fn return_views_shrink_uncertainty(seed in any::<u64>(), n in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cov = random_spd(n, 0.1, &mut rng);
        let views = random_views(n, 1 + (seed as usize) % n, &mut rng);
        let post = bl2_update(&normal_vector(n, &mut rng), &cov, &views).unwrap();
        let diff = SymMatrix::new(cov.as_matrix() - post.cov.as_matrix()).unwrap();
        prop_assert!(diff.spectrum().min() >= -1e-12 * cov.spectrum().scale());
    }
}
