//! Walk-forward backtests on random subsets of a historical universe, with
//! views implied by the trailing minimum-volatility portfolio.

use std::path::PathBuf;

use gwb_core::walkforward::{run_walk_forward, EngineParams, MinVolViews, PathOutcome};
use gwb_core::Error as CoreError;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};
use crate::panel::{subsample_universe, CellKind, ReturnsPanel};
use crate::report::RunReport;
use crate::seeds::path_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stage2Config {
    /// Overridden by `--data` on the command line.
    pub universe_csv: Option<PathBuf>,
    pub cells: CellKind,
    pub n_assets: usize,
    pub n_paths: usize,
    pub lookback: usize,
    /// Defaults to `1/lookback`.
    pub tau: Option<f64>,
    pub gamma: f64,
    pub confidences: Vec<f64>,
    pub rebalance_period: usize,
    pub master_seed: u64,
    /// Defaults to `lookback`.
    pub min_history: Option<usize>,
    pub periods_per_year: f64,
}

impl Default for Stage2Config {
    fn default() -> Self {
        Self {
            universe_csv: None,
            cells: CellKind::Prices,
            n_assets: 50,
            n_paths: 250,
            lookback: 125,
            tau: None,
            gamma: 2.5,
            confidences: vec![0.95, 0.05],
            rebalance_period: 63,
            master_seed: 0,
            min_history: None,
            periods_per_year: 252.0,
        }
    }
}

impl Stage2Config {
    pub fn tau(&self) -> f64 {
        self.tau.unwrap_or(1.0 / self.lookback as f64)
    }

    pub fn min_history(&self) -> usize {
        self.min_history.unwrap_or(self.lookback)
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

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_assets", self.n_assets),
            ("n_paths", self.n_paths),
            ("lookback", self.lookback),
            ("rebalance_period", self.rebalance_period),
        ] {
            if v == 0 {
                return Err(AppError::validation(name, "must be positive"));
            }
        }
        if self.n_paths < 2 {
            return Err(AppError::validation("n_paths", "need at least 2 paths for pairwise statistics"));
        }
        if self.min_history() < self.lookback {
            return Err(AppError::validation("min_history", "must be at least lookback"));
        }
        self.engine().validate().map_err(|e| AppError::core("config", e))
    }

    /// Checks that depend on the loaded universe.
    pub fn validate_panel(&self, panel: &ReturnsPanel) -> Result<()> {
        if panel.n_assets() <= self.n_assets {
            return Err(AppError::validation(
                "n_assets",
                format!("universe has {} usable tickers, need more than {}", panel.n_assets(), self.n_assets),
            ));
        }
        if panel.n_periods() <= self.lookback + 1 {
            return Err(AppError::validation(
                "lookback",
                format!("panel has {} periods, too few for a lookback of {}", panel.n_periods(), self.lookback),
            ));
        }
        Ok(())
    }
}

/// Replace a rebalance row index by the panel date in error messages.
fn annotate(path: usize, panel: &ReturnsPanel, err: CoreError) -> AppError {
    match err {
        CoreError::AtRebalance { row, source } => {
            let date = panel.dates.get(row).map(String::as_str).unwrap_or("?");
            AppError::core(format!("path {path}, rebalance on {date}"), *source)
        }
        other => AppError::core(format!("path {path}"), other),
    }
}

pub fn run_path(cfg: &Stage2Config, panel: &ReturnsPanel, path: usize) -> Result<(u64, ReturnsPanel, PathOutcome)> {
    let seed = path_seed(cfg.master_seed, path as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sub = subsample_universe(panel, cfg.n_assets, &mut rng)?;
    let mut views = MinVolViews { gamma: cfg.gamma };
    let outcome = run_walk_forward(&sub.returns, &cfg.engine(), &mut views).map_err(|e| annotate(path, &sub, e))?;
    Ok((seed, sub, outcome))
}

pub fn run_stage2(cfg: &Stage2Config, panel: &ReturnsPanel) -> Result<RunReport> {
    cfg.validate()?;
    cfg.validate_panel(panel)?;
    let results: Vec<(u64, Vec<f64>)> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| run_path(cfg, panel, p).map(|(seed, _, o)| (seed, o.sharpe)))
        .collect::<Result<_>>()?;
    let methods = cfg.engine().methodologies().iter().map(|m| m.label()).collect();
    let (seeds, sharpe) = results.into_iter().unzip();
    let config = serde_json::to_value(cfg).expect("serializable config");
    RunReport::build(methods, sharpe, config, seeds)
}
