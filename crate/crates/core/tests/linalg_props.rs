mod common;

use common::*;
use gwb_core::gaussian::wasserstein2_sq;
use gwb_core::linalg::{clip_to_psd, pseudo_det, pseudo_inverse, rank, sym_sqrt};
use gwb_core::{DMatrix, DVector, GaussianMeasure, SymMatrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn penrose_residuals(a: &DMatrix<f64>, x: &DMatrix<f64>) -> [f64; 4] {
    let scale = a.amax().max(1.0);
    let xs = x.amax().max(1.0);
    [
        (a * x * a - a).amax() / scale,
        (x * a * x - x).amax() / xs,
        ((a * x) - (a * x).transpose()).amax(),
        ((x * a) - (x * a).transpose()).amax(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn penrose_conditions(seed in any::<u64>(), n in 2usize..8, which in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = [1, n - 1, n][which];
        let a = random_psd_rank(n, r, &mut rng);
        prop_assert_eq!(rank(&a), r);
        let x = pseudo_inverse(&a, None);
        for res in penrose_residuals(a.as_matrix(), x.as_matrix()) {
            prop_assert!(res <= 1e-9, "residual {:e}", res);
        }
    }

    #[test]
    fn pseudo_det_is_det_when_invertible(seed in any::<u64>(), n in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_spd(n, 0.1, &mut rng);
        let det = a.as_matrix().determinant();
        prop_assert!((pseudo_det(&a, None) - det).abs() <= 1e-9 * det.abs());
    }

    #[test]
    fn square_root_squares_back(seed in any::<u64>(), n in 1usize..8, r in 0usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_psd_rank(n, r.min(n), &mut rng);
        let root = sym_sqrt(&a).unwrap();
        let back = root.as_matrix() * root.as_matrix();
        prop_assert!((back - a.as_matrix()).amax() <= 1e-10 * a.as_matrix().amax().max(1.0));
        prop_assert!(root.spectrum().min() >= -1e-12 * root.spectrum().scale().max(1e-300));
    }

    #[test]
    fn clipping_is_idempotent(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = normal_matrix(n, n, &mut rng);
        let s = SymMatrix::new((&m + m.transpose()) * 0.5).unwrap();
        let once = clip_to_psd(&s);
        prop_assert_eq!(clip_to_psd(&once), once);
    }
}

fn random_gaussian(n: usize, rng: &mut ChaCha8Rng) -> GaussianMeasure {
    let r = rng.random_range(0..=n);
    let cov = if r == n { random_spd(n, 0.01, rng) } else { random_psd_rank(n, r, rng) };
    GaussianMeasure::new(normal_vector(n, rng), cov).unwrap()
}

#[test]
fn wasserstein_metric_axioms() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for case in 0..100 {
        let n = 1 + case % 5;
        let a = random_gaussian(n, &mut rng);
        let b = random_gaussian(n, &mut rng);
        let c = random_gaussian(n, &mut rng);
        let ab = wasserstein2_sq(&a, &b).unwrap();
        let ba = wasserstein2_sq(&b, &a).unwrap();
        assert!((ab - ba).abs() <= 1e-9, "case {case}: symmetry {:e}", ab - ba);
        assert!(ab >= -1e-10);
        assert_eq!(wasserstein2_sq(&a, &a).unwrap(), 0.0);
        assert!(ab > 0.0 || a == b);
        let bc = wasserstein2_sq(&b, &c).unwrap();
        let ac = wasserstein2_sq(&a, &c).unwrap();
        let slack = ab.sqrt() + bc.sqrt() - ac.sqrt();
        assert!(slack >= -1e-7, "case {case}: triangle slack {slack:e}");
    }
}

#[test]
fn wasserstein_distinguishes_close_measures() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..100 {
        let a = random_gaussian(3, &mut rng);
        let (m, c) = a.clone().into_parts();
        let shifted = GaussianMeasure::new(m + DVector::from_element(3, 1e-3), c).unwrap();
        assert!(wasserstein2_sq(&a, &shifted).unwrap() > 0.0);
    }
}

#[test]
fn wasserstein_one_dimensional_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..100 {
        let (m1, m2): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let (s1, s2): (f64, f64) = (rng.random_range(0.0..2.0), rng.random_range(0.0..2.0));
        let a = GaussianMeasure::new(DVector::from_element(1, m1), SymMatrix::from_diagonal(&[s1 * s1])).unwrap();
        let b = GaussianMeasure::new(DVector::from_element(1, m2), SymMatrix::from_diagonal(&[s2 * s2])).unwrap();
        let expected = (m1 - m2).powi(2) + (s1 - s2).powi(2);
        assert!((wasserstein2_sq(&a, &b).unwrap() - expected).abs() <= 1e-12);
    }
}
