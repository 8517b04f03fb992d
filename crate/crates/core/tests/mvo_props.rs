mod common;

use common::*;
use gwb_core::mvo::{min_vol_weights, solve_mvo, solve_mvo_certified, MvoProblem};
use gwb_core::posterior::equilibrium_drift;
use gwb_core::{DVector, SymMatrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

fn random_simplex_point(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let e = DVector::<f64>::from_fn(n, |_, _| Exp1.sample(rng));
    let s = e.sum();
    e / s
}

fn random_problem(seed: u64, n: usize) -> MvoProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cov = if seed.is_multiple_of(4) { random_psd_rank(n, n / 2 + 1, &mut rng) } else { random_spd(n, 0.01, &mut rng) };
    MvoProblem::new(normal_vector(n, &mut rng) * 0.5, cov, rng.random_range(0.5..5.0), 0.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn certified_and_feasible(seed in any::<u64>(), n in 1usize..30) {
        let p = random_problem(seed, n);
        let s = solve_mvo_certified(&p).unwrap();
        prop_assert!(s.weights.is_feasible());
        prop_assert!(s.stationarity <= 1e-7 && s.slackness <= 1e-8);
    }

    #[test]
    fn dominates_random_portfolios(seed in any::<u64>(), n in 2usize..12) {
        let p = random_problem(seed, n);
        let w = solve_mvo(&p).unwrap();
        let best = p.objective(&w.w);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for _ in 0..1000 {
            let x = random_simplex_point(n, &mut rng);
            prop_assert!(best >= p.objective(&x) - 1e-8);
        }
    }

    #[test]
    fn argmax_is_scale_free(seed in any::<u64>(), n in 2usize..12, k in 0.01f64..100.0) {
        let p = random_problem(seed, n);
        let scaled = MvoProblem::new(&p.drift * k, p.cov.clone(), p.gamma * k, 0.0).unwrap();
        let a = solve_mvo(&p).unwrap();
        let b = solve_mvo(&scaled).unwrap();
        prop_assert!((a.w - b.w).amax() <= 1e-8);
    }

    #[test]
    fn min_vol_beats_every_vertex(seed in any::<u64>(), n in 2usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cov = random_spd(n, 0.01, &mut rng);
        let w = min_vol_weights(&cov, 2.5).unwrap();
        let v = cov.quad_form(&w.w);
        for i in 0..n {
            prop_assert!(v <= cov.as_matrix()[(i, i)] + 1e-12);
        }
    }
}

#[test]
fn equilibrium_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    for _ in 0..100 {
        let n = rng.random_range(2..15);
        let cov = random_spd(n, 0.05, &mut rng);
        let w_bm = random_simplex_point(n, &mut rng).map(|x| 0.5 / n as f64 + 0.5 * x);
        let gamma = 2.5;
        let drift = equilibrium_drift(&cov, &w_bm, gamma, 0.0).unwrap();
        let w = solve_mvo(&MvoProblem::new(drift, cov, gamma, 0.0).unwrap()).unwrap();
        assert!((w.w - w_bm).amax() <= 1e-6);
    }
}

#[test]
fn two_asset_analytic_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    for _ in 0..100 {
        let (a, b): (f64, f64) = (rng.random_range(0.1..2.0), rng.random_range(0.1..2.0));
        let w = min_vol_weights(&SymMatrix::from_diagonal(&[a, b]), 1.0).unwrap();
        assert!((w.w[0] - b / (a + b)).abs() <= 1e-8);

        // identity covariance: interior optimum x₀ = 1/2 + (m₀ − m₁)/(2γ)
        let (m0, m1, g): (f64, f64, f64) = (rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(0.5..3.0));
        let p = MvoProblem::new(DVector::from_vec(vec![m0, m1]), SymMatrix::identity(2), g, 0.0).unwrap();
        let expected = (0.5 + (m0 - m1) / (2.0 * g)).clamp(0.0, 1.0);
        assert!((solve_mvo(&p).unwrap().w[0] - expected).abs() <= 1e-8);
    }
}
