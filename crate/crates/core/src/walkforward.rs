//! Walk-forward evaluation of allocation methodologies on one return path.
//!
//! At each rebalance row the engine estimates the prior from the trailing
//! window only, asks a [`ViewGenerator`] for views, allocates with every
//! methodology and holds the weights until the next rebalance.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{clip_to_psd, sample_covariance, SymMatrix};
use crate::mvo::{min_vol_weights, solve_mvo, MvoProblem, Weights};
use crate::posterior::{bl1_update, bl2_update, equilibrium_drift, gwb1_update, gwb2_update, PosteriorUpdate};
use crate::sampling::{generate_views, sample_mvn, ViewsKind};
use crate::stats::sharpe;
use crate::views::{confidence_to_lambda, PriorSpec, ViewSet, ViewTarget, PRIOR_PD_TOL};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Methodology {
    Benchmark,
    Bl1,
    Bl2,
    Gwb1 { confidence: f64 },
    Gwb2 { confidence: f64 },
}

impl Methodology {
    pub fn label(&self) -> String {
        match self {
            Methodology::Benchmark => "BM".into(),
            Methodology::Bl1 => "BL1".into(),
            Methodology::Bl2 => "BL2".into(),
            Methodology::Gwb1 { confidence } => format!("GWB1(t={confidence})"),
            Methodology::Gwb2 { confidence } => format!("GWB2(t={confidence})"),
        }
    }

    pub fn is_gwb(&self) -> bool {
        matches!(self, Methodology::Gwb1 { .. } | Methodology::Gwb2 { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineParams {
    pub lookback: usize,
    pub rebalance_period: usize,
    pub tau: f64,
    pub gamma: f64,
    pub rf: f64,
    pub periods_per_year: f64,
    pub confidences: Vec<f64>,
}

impl EngineParams {
    /// Benchmark, both Black-Litterman flavours, then each barycenter flavour
    /// at every confidence.
    pub fn methodologies(&self) -> Vec<Methodology> {
        let mut out = alloc::vec![Methodology::Benchmark, Methodology::Bl1, Methodology::Bl2];
        out.extend(self.confidences.iter().map(|&confidence| Methodology::Gwb1 { confidence }));
        out.extend(self.confidences.iter().map(|&confidence| Methodology::Gwb2 { confidence }));
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.lookback < 2 {
            return Err(Error::TooShort(self.lookback));
        }
        if self.rebalance_period == 0 {
            return Err(Error::OutOfRange {
                name: "rebalance_period",
                value: 0.0,
            });
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::OutOfRange {
                name: "tau",
                value: self.tau,
            });
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::OutOfRange {
                name: "gamma",
                value: self.gamma,
            });
        }
        for &t in &self.confidences {
            confidence_to_lambda(t)?;
        }
        Ok(())
    }
}

/// Prior quantities estimated from the trailing window.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorEstimate {
    /// Sample covariance, clipped to PSD and ridged if singular.
    pub cov: SymMatrix,
    /// Equilibrium drift of the equal-weight benchmark.
    pub drift: DVector<f64>,
}

/// Views in return space; drift-space methodologies use `τ·cov`.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewInputs {
    pub pick: DMatrix<f64>,
    pub nu: DVector<f64>,
    pub cov: SymMatrix,
}

pub trait ViewGenerator {
    /// Views for the rebalance at `row`, given the trailing estimate.
    fn views(&mut self, row: usize, estimate: &PriorEstimate) -> Result<ViewInputs>;
}

/// Estimate the prior from a window of returns (rows are periods).
pub fn estimate_prior(window: &DMatrix<f64>, params: &EngineParams) -> Result<PriorEstimate> {
    let (_, cov) = sample_covariance(window)?;
    let mut cov = clip_to_psd(&cov);
    if !cov.is_positive_definite(PRIOR_PD_TOL) {
        let n = cov.dim();
        let ridge = (1e-10 * cov.trace() / n as f64).max(1e-18);
        cov = cov.add(&SymMatrix::identity(n).scaled(ridge));
    }
    let n = cov.dim();
    let w_bm = DVector::from_element(n, 1.0 / n as f64);
    let drift = equilibrium_drift(&cov, &w_bm, params.gamma, params.rf)?;
    Ok(PriorEstimate { cov, drift })
}

fn view_set(v: &ViewInputs, target: ViewTarget, tau: f64, confidence: f64) -> Result<ViewSet> {
    let cov = match target {
        ViewTarget::DriftSpace => v.cov.scaled(tau),
        ViewTarget::ReturnSpace => v.cov.clone(),
    };
    ViewSet::new(v.pick.clone(), v.nu.clone(), cov, target, confidence)
}

/// Posterior for one methodology; `None` for the benchmark.
pub fn posterior_for(
    method: Methodology,
    est: &PriorEstimate,
    views: &ViewInputs,
    params: &EngineParams,
) -> Result<Option<PosteriorUpdate>> {
    let prior = || PriorSpec::new(est.drift.clone(), est.cov.clone(), params.tau, params.gamma, params.rf);
    let post = match method {
        Methodology::Benchmark => return Ok(None),
        Methodology::Bl1 => bl1_update(&prior()?, &view_set(views, ViewTarget::DriftSpace, params.tau, 0.0)?)?,
        Methodology::Bl2 => bl2_update(
            &est.drift,
            &est.cov,
            &view_set(views, ViewTarget::ReturnSpace, params.tau, 0.0)?,
        )?,
        Methodology::Gwb1 { confidence } => gwb1_update(
            &prior()?,
            &view_set(views, ViewTarget::DriftSpace, params.tau, confidence)?,
            confidence_to_lambda(confidence)?,
        )?,
        Methodology::Gwb2 { confidence } => gwb2_update(
            &est.drift,
            &est.cov,
            &view_set(views, ViewTarget::ReturnSpace, params.tau, confidence)?,
            confidence_to_lambda(confidence)?,
        )?,
    };
    Ok(Some(post))
}

/// Weights chosen by one methodology.
pub fn allocate(method: Methodology, est: &PriorEstimate, views: &ViewInputs, params: &EngineParams) -> Result<Weights> {
    match posterior_for(method, est, views, params)? {
        None => Ok(Weights::equal(est.cov.dim())),
        Some(post) => solve_mvo(&MvoProblem::new(post.mean, post.cov, params.gamma, params.rf)?),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RebalanceRecord {
    pub row: usize,
    /// One entry per methodology, in the order of [`PathOutcome::methods`].
    pub weights: Vec<Weights>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathOutcome {
    pub methods: Vec<Methodology>,
    /// Periods × methodologies portfolio returns, starting at the first rebalance.
    pub returns: DMatrix<f64>,
    pub sharpe: Vec<f64>,
    pub rebalances: Vec<RebalanceRecord>,
}

/// Rows at which the portfolio is rebalanced.
pub fn rebalance_rows(n_rows: usize, params: &EngineParams) -> Vec<usize> {
    (params.lookback..n_rows).step_by(params.rebalance_period).collect()
}

/// Run every methodology along a panel of returns (rows are periods).
pub fn run_walk_forward<G: ViewGenerator + ?Sized>(
    returns: &DMatrix<f64>,
    params: &EngineParams,
    generator: &mut G,
) -> Result<PathOutcome> {
    params.validate()?;
    let n_rows = returns.nrows();
    if n_rows <= params.lookback + 1 {
        return Err(Error::TooShort(n_rows));
    }
    let methods = params.methodologies();
    let mut path = DMatrix::<f64>::zeros(n_rows - params.lookback, methods.len());
    let mut rebalances = Vec::new();
    for row in rebalance_rows(n_rows, params) {
        let at = |e: Error| Error::AtRebalance { row, source: Box::new(e) };
        let window = returns.rows(row - params.lookback, params.lookback).into_owned();
        let est = estimate_prior(&window, params).map_err(at)?;
        let views = generator.views(row, &est).map_err(at)?;
        let weights = methods
            .iter()
            .map(|m| allocate(*m, &est, &views, params))
            .collect::<Result<Vec<_>>>()
            .map_err(at)?;
        let end = (row + params.rebalance_period).min(n_rows);
        for t in row..end {
            let r = returns.row(t);
            for (k, w) in weights.iter().enumerate() {
                path[(t - params.lookback, k)] = r.dot(&w.w.transpose());
            }
        }
        rebalances.push(RebalanceRecord { row, weights });
    }
    let sharpe = (0..methods.len())
        .map(|k| sharpe(path.column(k).as_slice(), params.periods_per_year))
        .collect::<Result<Vec<_>>>()?;
    Ok(PathOutcome {
        methods,
        returns: path,
        sharpe,
        rebalances,
    })
}

/// Views implied by the long-only minimum-volatility portfolio of the
/// trailing estimate: `μ_V = γ·C·w_mVol`, `P = I`, `C_V = C`.
///
/// Sees nothing but the trailing estimate.
#[derive(Debug, Clone, Copy)]
pub struct MinVolViews {
    pub gamma: f64,
}

impl ViewGenerator for MinVolViews {
    fn views(&mut self, _row: usize, est: &PriorEstimate) -> Result<ViewInputs> {
        let w = min_vol_weights(&est.cov, self.gamma)?;
        let n = est.cov.dim();
        Ok(ViewInputs {
            pick: DMatrix::identity(n, n),
            nu: est.cov.as_matrix() * &w.w * self.gamma,
            cov: est.cov.clone(),
        })
    }
}

/// Back-validation views drawn around statistics of the forward window
/// `[row, row + ℓ_f)`.
pub struct ForwardViews<'a, R> {
    pub returns: &'a DMatrix<f64>,
    pub pick: DMatrix<f64>,
    pub forward: usize,
    pub kind: ViewsKind,
    /// Periods in one unit of the view recipe. The forward statistics are
    /// scaled up to that unit before sampling and the draws scaled back,
    /// so the sampling noise is that of a unit-length estimate.
    pub unit_periods: f64,
    pub rng: R,
    /// Rebalances where the forward window was too short for a full-rank
    /// covariance; the trailing covariance, unsampled, stood in for it.
    pub fallbacks: Vec<usize>,
}

impl<R: Rng> ViewGenerator for ForwardViews<'_, R> {
    fn views(&mut self, row: usize, est: &PriorEstimate) -> Result<ViewInputs> {
        let len = self.forward.min(self.returns.nrows() - row);
        let nv = self.pick.nrows();
        let window = self.returns.rows(row, len).into_owned();
        let a = self.unit_periods;
        let mu_fwd = DVector::from_fn(window.ncols(), |j, _| a * window.column(j).sum() / len as f64);
        // a full-rank forward covariance needs more rows than assets
        if len > self.returns.ncols() && len >= nv {
            let (_, cov_fwd) = sample_covariance(&window)?;
            let cov_fwd = clip_to_psd(&cov_fwd).scaled(a);
            let (nu, cov) = generate_views(self.kind, &self.pick, &mu_fwd, &cov_fwd, len, &mut self.rng)?;
            return Ok(ViewInputs {
                pick: self.pick.clone(),
                nu: nu / a,
                cov: cov.scaled(1.0 / a),
            });
        }
        self.fallbacks.push(row);
        let cov = est.cov.congruence(&self.pick).scaled(a);
        let center = match self.kind {
            ViewsKind::Correct => &self.pick * &mu_fwd,
            ViewsKind::Ambiguous => DVector::zeros(nv),
            ViewsKind::Incorrect => -(&self.pick * &mu_fwd),
        };
        let nu = sample_mvn(&center, &cov, 1, &mut self.rng)?.row(0).transpose();
        Ok(ViewInputs {
            pick: self.pick.clone(),
            nu: nu / a,
            cov: cov.scaled(1.0 / a),
        })
    }
}
