mod common;

use common::*;
use gwb_core::linalg::sample_covariance;
use gwb_core::sampling::{generate_views, sample_mvn, sample_wishart, ViewsKind};
use gwb_core::stats::{outperformance, pairwise, sharpe, t_statistic};
use gwb_core::{DMatrix, DVector, SymMatrix};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn gaussian_draws_match_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let mean = DVector::from_vec(vec![0.5, -1.0]);
    let cov = SymMatrix::from_rows(&[vec![1.0, 0.6], vec![0.6, 2.0]]).unwrap();
    let n = 100_000;
    let x = sample_mvn(&mean, &cov, n, &mut rng).unwrap();
    let (m, c) = sample_covariance(&x).unwrap();
    for i in 0..2 {
        let sd = cov.as_matrix()[(i, i)].sqrt();
        assert!((m[i] - mean[i]).abs() <= 4.0 * sd / (n as f64).sqrt());
    }
    assert!((c.as_matrix() - cov.as_matrix()).norm() <= 0.05);
}

#[test]
fn wishart_mean_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(62);
    let scale = SymMatrix::from_rows(&[vec![1.0, 0.3, -0.2], vec![0.3, 0.8, 0.1], vec![-0.2, 0.1, 0.5]]).unwrap();
    let df = 8;
    let draws = 10_000;
    let mut acc = DMatrix::zeros(3, 3);
    for _ in 0..draws {
        let w = sample_wishart(df, &scale, &mut rng).unwrap();
        assert!(w.spectrum().min() >= -1e-12);
        acc += w.as_matrix();
    }
    let avg = acc / (draws as f64 * df as f64);
    assert!((avg - scale.as_matrix()).norm() <= 0.05);
}

#[test]
fn simulated_views_are_centered_by_kind() {
    let mut rng = ChaCha8Rng::seed_from_u64(63);
    let pick = DMatrix::identity(2, 2);
    let mu = DVector::from_vec(vec![0.3, -0.2]);
    let cov = SymMatrix::from_rows(&[vec![0.04, 0.01], vec![0.01, 0.09]]).unwrap();
    let draws = 10_000;
    let mut correct = DVector::zeros(2);
    let mut incorrect = DVector::zeros(2);
    let mut xy = 0.0;
    let mut xx = 0.0;
    let mut yy = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    for _ in 0..draws {
        correct += generate_views(ViewsKind::Correct, &pick, &mu, &cov, 20, &mut rng).unwrap().0;
        incorrect += generate_views(ViewsKind::Incorrect, &pick, &mu, &cov, 20, &mut rng).unwrap().0;
        // ambiguous views against a drift that varies from draw to draw
        let fwd = normal_vector(2, &mut rng) * 0.2;
        let (nu, _) = generate_views(ViewsKind::Ambiguous, &pick, &fwd, &cov, 20, &mut rng).unwrap();
        let (x, y) = (nu[0], fwd[0]);
        xy += x * y;
        xx += x * x;
        yy += y * y;
        sx += x;
        sy += y;
    }
    let n = draws as f64;
    let tol = 4.0 * 0.3 / n.sqrt();
    assert!((correct / n - &mu).amax() <= tol);
    assert!((incorrect / n + &mu).amax() <= tol);
    let corr = (xy / n - sx * sy / (n * n)) / ((xx / n - (sx / n).powi(2)).sqrt() * (yy / n - (sy / n).powi(2)).sqrt());
    assert!(corr.abs() <= 0.05, "corr {corr}");
}

#[test]
fn sharpe_matches_asymptotics() {
    let mut rng = ChaCha8Rng::seed_from_u64(64);
    let (mu, sigma) = (0.0005, 0.01);
    let n = 100_000;
    let x = sample_mvn(&DVector::from_element(1, mu), &SymMatrix::from_diagonal(&[sigma * sigma]), n, &mut rng).unwrap();
    let s = sharpe(x.as_slice(), 252.0).unwrap();
    let true_daily = mu / sigma;
    let se = 3.0 * ((1.0 + true_daily * true_daily / 2.0) / n as f64).sqrt() * 252f64.sqrt();
    assert!((s - true_daily * 252f64.sqrt()).abs() <= se);
}

#[test]
fn t_statistic_sampling_distribution() {
    let mut rng = ChaCha8Rng::seed_from_u64(65);
    let d = sample_mvn(&DVector::from_element(1, 0.5), &SymMatrix::identity(1), 250, &mut rng).unwrap();
    let zeros = vec![0.0; 250];
    let t = t_statistic(d.as_slice(), &zeros).unwrap();
    assert!((t - 0.5 * 250f64.sqrt()).abs() <= 3.0);
}

proptest! {
    #[test]
    fn pairwise_tables_are_antisymmetric(seed in any::<u64>(), paths in 2usize..40, methods in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = normal_matrix(paths, methods, &mut rng);
        let p = pairwise(&s).unwrap();
        prop_assert!((&p.delta_s + p.delta_s.transpose()).amax() <= 1e-12);
        prop_assert!((&p.tstat + p.tstat.transpose()).amax() <= 1e-12);
        for i in 0..methods {
            prop_assert_eq!(p.delta_s[(i, i)], 0.0);
            prop_assert_eq!(p.tstat[(i, i)], 0.0);
        }
    }

    #[test]
    fn outperformance_shift(seed in any::<u64>(), shift in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = normal_vector(30, &mut rng).iter().copied().collect();
        let b: Vec<f64> = a.iter().map(|x| x - shift).collect();
        prop_assert!((outperformance(&a, &b).unwrap() - shift).abs() <= 1e-12);
    }
}
