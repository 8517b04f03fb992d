//! Simulated back-validation: Gaussian return paths, views drawn around the
//! realized forward window, every methodology walked forward on each path.

use gwb_core::linalg::SymMatrix;
use gwb_core::sampling::{sample_mvn, sample_wishart, ViewsKind};
use gwb_core::walkforward::{run_walk_forward, EngineParams, ForwardViews, PathOutcome};
use gwb_core::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};
use crate::report::RunReport;
use crate::seeds::path_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewsKindConfig {
    Correct,
    Ambiguous,
    Incorrect,
}

impl From<ViewsKindConfig> for ViewsKind {
    fn from(k: ViewsKindConfig) -> Self {
        match k {
            ViewsKindConfig::Correct => ViewsKind::Correct,
            ViewsKindConfig::Ambiguous => ViewsKind::Ambiguous,
            ViewsKindConfig::Incorrect => ViewsKind::Incorrect,
        }
    }
}

/// Per-path ground truth: drift `N(0, drift_vol²/ppy)` per asset,
/// volatilities log-uniform in `[vol_min, vol_max]` (annualized), and a
/// correlation matrix from a normalized `Wishart(n + corr_extra_df, I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruthModel {
    pub drift_vol: f64,
    pub vol_min: f64,
    pub vol_max: f64,
    pub corr_extra_df: usize,
}

impl Default for TruthModel {
    fn default() -> Self {
        Self {
            drift_vol: 0.08,
            vol_min: 0.10,
            vol_max: 0.40,
            corr_extra_df: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stage1Config {
    pub n_assets: usize,
    /// Defaults to `n_assets`; the views matrix is the first `n_views` rows
    /// of the identity.
    pub n_views: Option<usize>,
    pub horizon: usize,
    pub n_paths: usize,
    pub lookback: usize,
    pub forward: usize,
    /// Defaults to `1/lookback`.
    pub tau: Option<f64>,
    pub gamma: f64,
    pub confidences: Vec<f64>,
    pub views_kind: ViewsKindConfig,
    /// Periods in one unit of the view recipe (see `ForwardViews`).
    pub view_unit_periods: f64,
    pub rebalance_period: usize,
    pub master_seed: u64,
    pub periods_per_year: f64,
    pub truth: TruthModel,
}

impl Default for Stage1Config {
    fn default() -> Self {
        Self {
            n_assets: 50,
            n_views: None,
            horizon: 4000,
            n_paths: 250,
            lookback: 125,
            forward: 750,
            tau: None,
            gamma: 2.5,
            confidences: vec![0.95, 0.05],
            views_kind: ViewsKindConfig::Correct,
            view_unit_periods: 1.0,
            rebalance_period: 63,
            master_seed: 0,
            periods_per_year: 252.0,
            truth: TruthModel::default(),
        }
    }
}

impl Stage1Config {
    pub fn n_views(&self) -> usize {
        self.n_views.unwrap_or(self.n_assets)
    }

    pub fn tau(&self) -> f64 {
        self.tau.unwrap_or(1.0 / self.lookback as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_assets", self.n_assets),
            ("n_views", self.n_views()),
            ("horizon", self.horizon),
            ("n_paths", self.n_paths),
            ("lookback", self.lookback),
            ("forward", self.forward),
            ("rebalance_period", self.rebalance_period),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(AppError::validation(name, "must be positive"));
            }
        }
        if self.n_paths < 2 {
            return Err(AppError::validation("n_paths", "need at least 2 paths for pairwise statistics"));
        }
        if self.n_views() > self.n_assets {
            return Err(AppError::validation("n_views", "cannot exceed n_assets"));
        }
        if self.lookback + self.forward > self.horizon {
            return Err(AppError::validation("horizon", "must be at least lookback + forward"));
        }
        if self.forward < self.n_views() {
            return Err(AppError::validation("forward", "must be at least n_views"));
        }
        if self.lookback <= self.n_assets {
            return Err(AppError::validation("lookback", "must exceed n_assets for a full-rank estimate"));
        }
        if !(self.view_unit_periods >= 1.0 && self.view_unit_periods.is_finite()) {
            return Err(AppError::validation("view_unit_periods", "must be a finite number >= 1"));
        }
        let t = &self.truth;
        if !(t.vol_min > 0.0 && t.vol_max >= t.vol_min) || !(t.drift_vol >= 0.0) {
            return Err(AppError::validation("truth", "need 0 < vol_min <= vol_max and drift_vol >= 0"));
        }
        self.engine().validate().map_err(|e| AppError::core("config", e))
    }

    pub fn engine(&self) -> EngineParams {
        EngineParams {
            lookback: self.lookback,
            rebalance_period: self.rebalance_period,
            tau: self.tau(),
            gamma: self.gamma,
            rf: 0.0,
            periods_per_year: self.periods_per_year,
            confidences: self.confidences.clone(),
        }
    }
}

/// Draw the per-path ground truth `(drift, covariance)`.
pub fn draw_truth<R: Rng>(n: usize, model: &TruthModel, ppy: f64, rng: &mut R) -> Result<(DVector<f64>, SymMatrix)> {
    let drift_sd = model.drift_vol / ppy.sqrt();
    let drift = DVector::from_fn(n, |_, _| drift_sd * rng.sample::<f64, _>(StandardNormal));
    let (lo, hi) = (model.vol_min.ln(), model.vol_max.ln());
    let vols: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            (lo + u * (hi - lo)).exp() / ppy.sqrt()
        })
        .collect();
    let w = sample_wishart(n + model.corr_extra_df, &SymMatrix::identity(n), rng)
        .map_err(|e| AppError::core("truth correlation", e))?;
    let d = w.as_matrix().diagonal().map(|x| 1.0 / x.sqrt());
    let cov = DMatrix::from_fn(n, n, |i, j| w.as_matrix()[(i, j)] * d[i] * d[j] * vols[i] * vols[j]);
    let cov = SymMatrix::new((&cov + cov.transpose()) * 0.5).map_err(|e| AppError::core("truth covariance", e))?;
    Ok((drift, cov))
}

/// Result of one simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub seed: u64,
    pub outcome: PathOutcome,
    pub fallbacks: Vec<usize>,
}

pub fn run_path(cfg: &Stage1Config, path: usize) -> Result<PathResult> {
    let seed = path_seed(cfg.master_seed, path as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ctx = |what: &str| format!("path {path}: {what}");
    let (drift, cov) = draw_truth(cfg.n_assets, &cfg.truth, cfg.periods_per_year, &mut rng)?;
    let returns = sample_mvn(&drift, &cov, cfg.horizon, &mut rng).map_err(|e| AppError::core(ctx("simulation"), e))?;
    let pick = DMatrix::identity(cfg.n_views(), cfg.n_assets);
    let mut views = ForwardViews {
        returns: &returns,
        pick,
        forward: cfg.forward,
        kind: cfg.views_kind.into(),
        unit_periods: cfg.view_unit_periods,
        rng,
        fallbacks: Vec::new(),
    };
    let outcome = run_walk_forward(&returns, &cfg.engine(), &mut views).map_err(|e| AppError::core(ctx("walk-forward"), e))?;
    for row in &views.fallbacks {
        log::info!("path {path}: forward window at row {row} too short, using unsampled view covariance");
    }
    Ok(PathResult {
        seed,
        fallbacks: views.fallbacks,
        outcome,
    })
}

pub fn run_stage1(cfg: &Stage1Config) -> Result<RunReport> {
    cfg.validate()?;
    let results: Vec<PathResult> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| run_path(cfg, p))
        .collect::<Result<_>>()?;
    let methods = cfg.engine().methodologies().iter().map(|m| m.label()).collect();
    let sharpe = results.iter().map(|r| r.outcome.sharpe.clone()).collect();
    let seeds = results.iter().map(|r| r.seed).collect();
    let config = serde_json::to_value(cfg).expect("serializable config");
    RunReport::build(methods, sharpe, config, seeds)
}
