//! Built-in invariant suite run by `gwb selftest`. Each check draws seeded
//! random instances and reports its worst observed error.

use std::time::{Duration, Instant};

use gwb_core::gaussian::{gwb_lagrangian, wasserstein2_sq};
use gwb_core::linalg::{pseudo_det, pseudo_inverse, SymMatrix};
use gwb_core::mvo::{min_vol_weights, solve_mvo, solve_mvo_certified, MvoProblem};
use gwb_core::oracle::gwb_numeric_oracle;
use gwb_core::posterior::{bl1_update, equilibrium_drift, gwb_core_update, gwb_cross_checks};
use gwb_core::sampling::{sample_mvn, sample_wishart};
use gwb_core::walkforward::{run_walk_forward, EngineParams, MinVolViews};
use gwb_core::{DMatrix, DVector, GaussianMeasure, PriorSpec, ViewSet, ViewTarget};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::json::to_canonical;
use crate::stage1::{run_stage1, Stage1Config};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        format!("[{verdict}] {:>2}. {}: {}", self.id, self.name, self.detail)
    }
}

/// Instance counts for the suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteSize {
    pub instances: usize,
    pub scalar_instances: usize,
    pub wishart_draws: usize,
}

impl SuiteSize {
    pub const FULL: SuiteSize = SuiteSize {
        instances: 100,
        scalar_instances: 1000,
        wishart_draws: 10_000,
    };
    pub const QUICK: SuiteSize = SuiteSize {
        instances: 20,
        scalar_instances: 200,
        wishart_draws: 10_000,
    };
}

fn normal_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn normal_vector<R: Rng>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

fn sym(m: DMatrix<f64>) -> SymMatrix {
    SymMatrix::new((&m + m.transpose()) * 0.5).expect("finite square input")
}

fn random_spd<R: Rng>(n: usize, floor: f64, rng: &mut R) -> SymMatrix {
    let a = normal_matrix(n, n, rng);
    sym(&a * a.transpose() / n as f64 + DMatrix::identity(n, n) * floor)
}

fn random_psd_rank<R: Rng>(n: usize, rank: usize, rng: &mut R) -> SymMatrix {
    let a = normal_matrix(n, rank, rng);
    sym(&a * a.transpose() / rank.max(1) as f64)
}

fn random_views<R: Rng>(n_assets: usize, n_views: usize, pick: Option<DMatrix<f64>>, rng: &mut R) -> ViewSet {
    let pick = pick.unwrap_or_else(|| normal_matrix(n_views, n_assets, rng));
    ViewSet::new(
        pick,
        normal_vector(n_views, rng),
        random_spd(n_views, 0.1, rng),
        ViewTarget::ReturnSpace,
        0.5,
    )
    .expect("consistent shapes")
}

fn gaussian(m: &DVector<f64>, c: &SymMatrix) -> GaussianMeasure {
    GaussianMeasure::new(m.clone(), c.clone()).expect("valid gaussian")
}

fn frob_rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
}

fn outcome(id: usize, name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        id,
        name,
        passed,
        detail,
    }
}

fn failed(id: usize, name: &'static str, err: impl std::fmt::Display) -> CheckOutcome {
    outcome(id, name, false, format!("error: {err}"))
}

/// Closed-form barycenter against the numerical minimizer.
pub fn closed_form_vs_oracle(instances: usize, time_limit: Duration) -> CheckOutcome {
    const NAME: &str = "closed form vs numerical oracle";
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let (mut dm_max, mut dc_max, mut gap_max) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    for case in 0..instances {
        let n = 2 + case % 3;
        let nv = 1 + (case / 3) % n;
        let lambda = [0.25, 1.0, 4.0, 19.0][case % 4];
        let mu = normal_vector(n, &mut rng);
        let cov = random_spd(n, 0.1, &mut rng);
        let views = random_views(n, nv, None, &mut rng);
        let run = || -> gwb_core::Result<(f64, f64, f64)> {
            let (m, c) = gwb_core_update(&mu, &cov, &views, lambda)?;
            let o = gwb_numeric_oracle(&mu, &cov, &views, lambda, 4000, case as u64)?;
            let zero = DVector::zeros(n);
            let dc = wasserstein2_sq(&gaussian(&zero, &c), &gaussian(&zero, &o.cov))?;
            let value = gwb_lagrangian(&gaussian(&m, &c), &gaussian(&mu, &cov), &gaussian(&views.nu, &views.cov), &views.pick, lambda)?;
            Ok(((&m - &o.m).amax(), dc, value - o.value))
        };
        match run() {
            Ok((dm, dc, gap)) => {
                dm_max = dm_max.max(dm);
                dc_max = dc_max.max(dc);
                gap_max = gap_max.max(gap);
            }
            Err(e) => return failed(1, NAME, format!("instance {case}: {e}")),
        }
    }
    let elapsed = start.elapsed();
    let passed = dm_max <= 1e-5 && dc_max <= 1e-4 && gap_max <= 1e-8 && elapsed <= time_limit;
    outcome(
        1,
        NAME,
        passed,
        format!(
            "{instances} instances, max |dm| {dm_max:.2e} (<= 1e-5), max W2 {dc_max:.2e} (<= 1e-4), max L(closed) - L(oracle) {gap_max:.2e} (<= 1e-8), {:.1}s (<= {}s)",
            elapsed.as_secs_f64(),
            time_limit.as_secs()
        ),
    )
}

/// Zero and infinite confidence limits.
pub fn limit_laws(instances: usize) -> CheckOutcome {
    const NAME: &str = "confidence limits";
    let mut rng = ChaCha8Rng::seed_from_u64(1002);
    let (mut zero_gap, mut drift_gap, mut cov_gap) = (0.0f64, 0.0f64, 0.0f64);
    for case in 0..instances {
        let n = 2 + case % 5;
        let nv = 1 + case % n;
        let mu = normal_vector(n, &mut rng);
        let cov = random_spd(n, 0.1, &mut rng);
        let views = random_views(n, nv, None, &mut rng);
        let run = || -> gwb_core::Result<(f64, f64, f64)> {
            let (m0, c0) = gwb_core_update(&mu, &cov, &views, 0.0)?;
            let z = (&m0 - &mu).amax().max((c0.as_matrix() - cov.as_matrix()).amax());
            let (m, c) = gwb_core_update(&mu, &cov, &views, 1e8)?;
            let d = (&views.pick * &m - &views.nu).norm() / views.nu.norm();
            let pc = &views.pick * c.as_matrix() * views.pick.transpose();
            let v = (pc - views.cov.as_matrix()).norm() / views.cov.as_matrix().norm();
            Ok((z, d, v))
        };
        match run() {
            Ok((z, d, v)) => {
                zero_gap = zero_gap.max(z);
                drift_gap = drift_gap.max(d);
                cov_gap = cov_gap.max(v);
            }
            Err(e) => return failed(2, NAME, format!("instance {case}: {e}")),
        }
    }
    outcome(
        2,
        NAME,
        zero_gap <= 1e-12 && drift_gap <= 1e-5 && cov_gap <= 1e-4,
        format!(
            "{instances} instances, lambda=0 gap {zero_gap:.2e} (<= 1e-12), lambda=1e8 rel view drift gap {drift_gap:.2e} (<= 1e-5), rel view cov gap {cov_gap:.2e} (<= 1e-4)"
        ),
    )
}

/// Alternate closed forms on identity views and the diagonal volatility rule.
pub fn alternate_forms(instances: usize) -> CheckOutcome {
    const NAME: &str = "alternate closed forms";
    let mut rng = ChaCha8Rng::seed_from_u64(1003);
    let (mut dev, mut inv, mut diag) = (0.0f64, 0.0f64, 0.0f64);
    for case in 0..instances {
        let n = 2 + case % 4;
        let lambda = [0.25, 1.0, 4.0, 19.0][case % 4];
        let mu = normal_vector(n, &mut rng);
        let cov = random_spd(n, 0.1, &mut rng);
        let views = random_views(n, n, Some(DMatrix::identity(n, n)), &mut rng);
        match gwb_cross_checks(&mu, &cov, &views, lambda) {
            Ok(r) => {
                dev = dev.max(r.max_relative_deviation);
                inv = inv.max(r.inverse_residual);
            }
            Err(e) => return failed(3, NAME, format!("instance {case}: {e}")),
        }

        let sp: Vec<f64> = (0..n).map(|_| 0.05 + rng.random::<f64>()).collect();
        let sv: Vec<f64> = (0..n).map(|_| 0.05 + rng.random::<f64>()).collect();
        let lam = 10.0 * rng.random::<f64>();
        let square = |s: &[f64]| s.iter().map(|x| x * x).collect::<Vec<_>>();
        let vset = ViewSet::new(
            DMatrix::identity(n, n),
            DVector::zeros(n),
            SymMatrix::from_diagonal(&square(&sv)),
            ViewTarget::ReturnSpace,
            0.5,
        )
        .expect("identity views");
        match gwb_core_update(&DVector::zeros(n), &SymMatrix::from_diagonal(&square(&sp)), &vset, lam) {
            Ok((_, c)) => {
                for i in 0..n {
                    let expected = (sp[i] + lam * sv[i]) / (1.0 + lam);
                    diag = diag.max((c.as_matrix()[(i, i)].sqrt() - expected).abs());
                }
            }
            Err(e) => return failed(3, NAME, format!("diagonal instance {case}: {e}")),
        }
    }
    outcome(
        3,
        NAME,
        dev <= 1e-8 && inv <= 1e-8 && diag <= 1e-12,
        format!(
            "{instances} instances, max rel deviation {dev:.2e} (<= 1e-8), inverse residual {inv:.2e} (<= 1e-8), diagonal volatility rule {diag:.2e} (<= 1e-12)"
        ),
    )
}

/// One-asset Black-Litterman against its scalar formulas.
pub fn scalar_black_litterman(instances: usize) -> CheckOutcome {
    const NAME: &str = "one-asset Black-Litterman";
    let mut rng = ChaCha8Rng::seed_from_u64(1004);
    let (mut dmu, mut dvar) = (0.0f64, 0.0f64);
    for case in 0..instances {
        let mu: f64 = rng.random_range(-0.2..0.2);
        let s2: f64 = rng.random_range(0.001..0.2);
        let tau: f64 = rng.random_range(0.001..1.0);
        let nu: f64 = rng.random_range(-0.2..0.2);
        let v2: f64 = rng.random_range(0.001..0.2);
        let run = || -> gwb_core::Result<(f64, f64)> {
            let prior = PriorSpec::new(DVector::from_element(1, mu), SymMatrix::from_diagonal(&[s2]), tau, 2.5, 0.0)?;
            let views = ViewSet::new(
                DMatrix::from_element(1, 1, 1.0),
                DVector::from_element(1, nu),
                SymMatrix::from_diagonal(&[v2]),
                ViewTarget::DriftSpace,
                0.5,
            )?;
            let post = bl1_update(&prior, &views)?;
            let expected_mu = (v2 * mu + tau * s2 * nu) / (v2 + tau * s2);
            let expected_var = s2 + tau * s2 * v2 / (tau * s2 + v2);
            Ok(((post.mean[0] - expected_mu).abs(), (post.cov.as_matrix()[(0, 0)] - expected_var).abs()))
        };
        match run() {
            Ok((a, b)) => {
                dmu = dmu.max(a);
                dvar = dvar.max(b);
            }
            Err(e) => return failed(4, NAME, format!("instance {case}: {e}")),
        }
    }
    outcome(
        4,
        NAME,
        dmu <= 1e-12 && dvar <= 1e-12,
        format!("{instances} instances, max mean error {dmu:.2e}, max variance error {dvar:.2e} (<= 1e-12)"),
    )
}

/// Metric axioms of the Gaussian Wasserstein distance, singular inputs included.
pub fn wasserstein_axioms(instances: usize) -> CheckOutcome {
    const NAME: &str = "Wasserstein metric axioms";
    let mut rng = ChaCha8Rng::seed_from_u64(1005);
    let mut sym_gap = 0.0f64;
    let mut min_value = f64::INFINITY;
    let mut min_slack = f64::INFINITY;
    let mut self_max = 0.0f64;
    let mut distinct_min = f64::INFINITY;
    let mut scalar_gap = 0.0f64;
    for case in 0..instances {
        let n = 2 + case % 4;
        let mut draw = |k: usize| {
            let rank = match (case + k) % 3 {
                0 => n,
                1 => n - 1,
                _ => 1,
            };
            gaussian(&normal_vector(n, &mut rng), &random_psd_rank(n, rank, &mut rng))
        };
        let (a, b, c) = (draw(0), draw(1), draw(2));
        let mut run = || -> gwb_core::Result<()> {
            let ab = wasserstein2_sq(&a, &b)?;
            let ba = wasserstein2_sq(&b, &a)?;
            let bc = wasserstein2_sq(&b, &c)?;
            let ac = wasserstein2_sq(&a, &c)?;
            sym_gap = sym_gap.max((ab - ba).abs());
            min_value = min_value.min(ab).min(bc).min(ac);
            min_slack = min_slack.min(ab.max(0.0).sqrt() + bc.max(0.0).sqrt() - ac.max(0.0).sqrt());
            self_max = self_max.max(wasserstein2_sq(&a, &a)?);
            distinct_min = distinct_min.min(ab);
            Ok(())
        };
        if let Err(e) = run() {
            return failed(5, NAME, format!("instance {case}: {e}"));
        }

        let (m1, m2): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
        let (s1, s2): (f64, f64) = (rng.random_range(0.0..2.0), rng.random_range(0.0..2.0));
        let w = wasserstein2_sq(
            &gaussian(&DVector::from_element(1, m1), &SymMatrix::from_diagonal(&[s1 * s1])),
            &gaussian(&DVector::from_element(1, m2), &SymMatrix::from_diagonal(&[s2 * s2])),
        );
        match w {
            Ok(w) => scalar_gap = scalar_gap.max((w - ((m1 - m2).powi(2) + (s1 - s2).powi(2))).abs()),
            Err(e) => return failed(5, NAME, format!("scalar instance {case}: {e}")),
        }
    }
    let passed = sym_gap <= 1e-9 && min_value >= -1e-10 && min_slack >= -1e-7 && self_max == 0.0 && distinct_min > 0.0 && scalar_gap <= 1e-12;
    outcome(
        5,
        NAME,
        passed,
        format!(
            "{instances} instances, symmetry {sym_gap:.2e} (<= 1e-9), min value {min_value:.2e} (>= -1e-10), triangle slack {min_slack:.2e} (>= -1e-7), W(a,a) max {self_max:.1e}, min W(a,b) {distinct_min:.2e} (> 0), 1-D closed form {scalar_gap:.2e} (<= 1e-12)"
        ),
    )
}

/// Penrose conditions and the pseudo-determinant.
pub fn pseudoinverse(instances: usize) -> CheckOutcome {
    const NAME: &str = "pseudo-inverse";
    let mut rng = ChaCha8Rng::seed_from_u64(1006);
    let mut penrose = 0.0f64;
    let mut det_gap = 0.0f64;
    for case in 0..instances {
        let n = 3 + case % 4;
        for rank in [1, n - 1, n] {
            let a = random_psd_rank(n, rank, &mut rng);
            let am = a.as_matrix();
            let p = pseudo_inverse(&a, None).into_inner();
            let ap = am * &p;
            let pa = &p * am;
            let errs = [
                frob_rel(&(&ap * am), am),
                frob_rel(&(&pa * &p), &p),
                frob_rel(&ap.transpose(), &ap),
                frob_rel(&pa.transpose(), &pa),
            ];
            penrose = errs.iter().fold(penrose, |m, &e| m.max(e));
            if rank == n {
                let det = am.determinant();
                det_gap = det_gap.max((pseudo_det(&a, None) - det).abs() / det.abs());
            }
        }
    }
    outcome(
        6,
        NAME,
        penrose <= 1e-9 && det_gap <= 1e-9,
        format!("{instances} instances x ranks {{1, n-1, n}}, Penrose residual {penrose:.2e} (<= 1e-9), rel pseudo-det error {det_gap:.2e} (<= 1e-9)"),
    )
}

/// Optimizer certificates, the equilibrium round trip and two-asset cases.
pub fn mean_variance(instances: usize) -> CheckOutcome {
    const NAME: &str = "mean-variance optimizer";
    let mut rng = ChaCha8Rng::seed_from_u64(1007);
    let (mut kkt, mut round_trip, mut analytic) = (0.0f64, 0.0f64, 0.0f64);
    for case in 0..instances {
        let n = 2 + case % 14;
        let run = |rng: &mut ChaCha8Rng| -> gwb_core::Result<(f64, f64, f64)> {
            let cov = random_spd(n, 0.05, rng);
            let drift = normal_vector(n, rng) * 0.1;
            let sol = solve_mvo_certified(&MvoProblem::new(drift, cov.clone(), 2.5, 0.0)?)?;
            let k = sol.stationarity.max(sol.slackness);

            let raw: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
            let total: f64 = raw.iter().sum();
            let w_bm = DVector::from_fn(n, |i, _| 0.5 / n as f64 + 0.5 * raw[i] / total);
            let eq = equilibrium_drift(&cov, &w_bm, 2.5, 0.0)?;
            let rt = (solve_mvo(&MvoProblem::new(eq, cov, 2.5, 0.0)?)?.w - w_bm).amax();

            let (a, b): (f64, f64) = (rng.random_range(0.1..2.0), rng.random_range(0.1..2.0));
            let mv = (min_vol_weights(&SymMatrix::from_diagonal(&[a, b]), 1.0)?.w[0] - b / (a + b)).abs();
            let (m0, m1, g): (f64, f64, f64) = (rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(0.5..3.0));
            let p = MvoProblem::new(DVector::from_vec(vec![m0, m1]), SymMatrix::identity(2), g, 0.0)?;
            let expected = (0.5 + (m0 - m1) / (2.0 * g)).clamp(0.0, 1.0);
            let two = (solve_mvo(&p)?.w[0] - expected).abs();
            Ok((k, rt, mv.max(two)))
        };
        match run(&mut rng) {
            Ok((k, rt, an)) => {
                kkt = kkt.max(k);
                round_trip = round_trip.max(rt);
                analytic = analytic.max(an);
            }
            Err(e) => return failed(7, NAME, format!("instance {case}: {e}")),
        }
    }
    outcome(
        7,
        NAME,
        kkt <= 1e-7 && round_trip <= 1e-6 && analytic <= 1e-8,
        format!("{instances} instances, KKT residual {kkt:.2e} (<= 1e-7), equilibrium round trip {round_trip:.2e} (<= 1e-6), two-asset cases {analytic:.2e} (<= 1e-8)"),
    )
}

/// Sample mean of Wishart draws.
pub fn wishart_mean(draws: usize) -> CheckOutcome {
    const NAME: &str = "Wishart sampler mean";
    let scale = SymMatrix::from_rows(&[vec![1.0, 0.3, 0.1], vec![0.3, 0.8, -0.2], vec![0.1, -0.2, 0.5]]).expect("symmetric");
    let df = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(1009);
    let mut acc = DMatrix::<f64>::zeros(3, 3);
    for _ in 0..draws {
        match sample_wishart(df, &scale, &mut rng) {
            Ok(w) => acc += w.as_matrix(),
            Err(e) => return failed(9, NAME, e),
        }
    }
    let err = (acc / (draws as f64 * df as f64) - scale.as_matrix()).norm();
    outcome(9, NAME, err <= 0.05, format!("{draws} draws, dim 3, df {df}, ||E[W]/df - scale||_F = {err:.4} (<= 0.05)"))
}

fn tiny_stage1(seed: u64) -> Stage1Config {
    Stage1Config {
        n_assets: 4,
        horizon: 300,
        n_paths: 6,
        lookback: 40,
        forward: 60,
        rebalance_period: 40,
        master_seed: seed,
        ..Stage1Config::default()
    }
}

/// Two simulations with the same seed render to identical bytes.
pub fn determinism() -> CheckOutcome {
    const NAME: &str = "simulation determinism";
    let cfg = tiny_stage1(77);
    match (run_stage1(&cfg), run_stage1(&cfg)) {
        (Ok(a), Ok(b)) => {
            let (a, b) = (to_canonical(&a), to_canonical(&b));
            outcome(10, NAME, a == b, format!("{} bytes, identical: {}", a.len(), a == b))
        }
        (Err(e), _) | (_, Err(e)) => failed(10, NAME, e),
    }
}

/// Overwriting everything from a rebalance row on leaves that row's weights unchanged.
pub fn no_lookahead() -> CheckOutcome {
    const NAME: &str = "no lookahead";
    let params = EngineParams {
        lookback: 60,
        rebalance_period: 21,
        tau: 1.0 / 60.0,
        gamma: 2.5,
        rf: 0.0,
        periods_per_year: 252.0,
        confidences: vec![0.95, 0.05],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1011);
    let cov = random_spd(5, 0.2, &mut rng).scaled(1e-4);
    let returns = match sample_mvn(&DVector::from_element(5, 3e-4), &cov, 300, &mut rng) {
        Ok(r) => r,
        Err(e) => return failed(11, NAME, e),
    };
    let mut views = MinVolViews { gamma: params.gamma };
    let base = match run_walk_forward(&returns, &params, &mut views) {
        Ok(b) => b,
        Err(e) => return failed(11, NAME, e),
    };
    let mut moved = 0;
    for (k, record) in base.rebalances.iter().enumerate() {
        let mut altered = returns.clone();
        for t in record.row..altered.nrows() {
            for j in 0..altered.ncols() {
                altered[(t, j)] = 0.05 * rng.random::<f64>() - 0.025;
            }
        }
        match run_walk_forward(&altered, &params, &mut MinVolViews { gamma: params.gamma }) {
            Ok(rerun) if rerun.rebalances[k] == *record => {}
            Ok(_) => moved += 1,
            Err(e) => return failed(11, NAME, e),
        }
    }
    outcome(
        11,
        NAME,
        moved == 0,
        format!("5-asset panel, {} rebalances, {moved} with changed weights", base.rebalances.len()),
    )
}

/// Every check except the full-scale simulation scenarios.
pub fn run_suite(size: SuiteSize) -> Vec<CheckOutcome> {
    vec![
        closed_form_vs_oracle(size.instances, Duration::from_secs(120)),
        limit_laws(size.instances),
        alternate_forms(size.instances),
        scalar_black_litterman(size.scalar_instances),
        wasserstein_axioms(size.instances),
        pseudoinverse(size.instances),
        mean_variance(size.instances),
        wishart_mean(size.wishart_draws),
        determinism(),
        no_lookahead(),
    ]
}
