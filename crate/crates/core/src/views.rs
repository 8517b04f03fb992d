//! Investor views and prior specifications.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix};

/// Whether the views constrain the expected drift or the returns themselves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViewTarget {
    DriftSpace,
    ReturnSpace,
}

/// Views `P·X ~ N(ν, C_V)` with a subjective confidence `t ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSet {
    pub pick: DMatrix<f64>,
    pub nu: DVector<f64>,
    pub cov: SymMatrix,
    pub target: ViewTarget,
    pub confidence: f64,
}

/// A [`ViewSet`] that passed [`validate`] against a universe size.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedViews {
    pub views: ViewSet,
    /// The views distribution or the push-forward onto views space is
    /// singular: `P` has dependent rows or `C_V` is rank deficient.
    pub degenerate: bool,
}

impl ViewSet {
    pub fn new(
        pick: DMatrix<f64>,
        nu: DVector<f64>,
        cov: SymMatrix,
        target: ViewTarget,
        confidence: f64,
    ) -> Result<Self> {
        let v = Self {
            pick,
            nu,
            cov,
            target,
            confidence,
        };
        v.check_shape()?;
        Ok(v)
    }

    pub fn n_views(&self) -> usize {
        self.pick.nrows()
    }

    pub fn n_assets(&self) -> usize {
        self.pick.ncols()
    }

    /// Same views, different target space.
    pub fn with_target(mut self, target: ViewTarget) -> Self {
        self.target = target;
        self
    }

    /// `Pᵀ C_V P`.
    pub fn projected_cov(&self) -> SymMatrix {
        self.cov.congruence(&self.pick.transpose())
    }

    fn check_shape(&self) -> Result<()> {
        let nv = self.pick.nrows();
        if nv == 0 {
            return Err(Error::DimensionMismatch {
                context: "number of views",
                expected: 1,
                found: 0,
            });
        }
        if self.nu.len() != nv {
            return Err(Error::DimensionMismatch {
                context: "view drift length",
                expected: nv,
                found: self.nu.len(),
            });
        }
        if self.cov.dim() != nv {
            return Err(Error::DimensionMismatch {
                context: "view covariance dimension",
                expected: nv,
                found: self.cov.dim(),
            });
        }
        if self.pick.iter().chain(self.nu.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("views"));
        }
        for r in 0..nv {
            if self.pick.row(r).iter().all(|v| *v == 0.0) {
                return Err(Error::EmptyViewRow { row: r });
            }
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::OutOfRange {
                name: "confidence",
                value: self.confidence,
            });
        }
        let spec = self.cov.spectrum();
        if spec.min() < -linalg::PSD_TOL * spec.scale() {
            return Err(Error::NonPsdViewCovariance);
        }
        Ok(())
    }
}

/// Check a view set against a universe of `n_assets` assets.
pub fn validate(views: ViewSet, n_assets: usize) -> Result<CheckedViews> {
    views.check_shape()?;
    if views.n_assets() != n_assets {
        return Err(Error::DimensionMismatch {
            context: "views matrix columns",
            expected: n_assets,
            found: views.n_assets(),
        });
    }
    let nv = views.n_views();
    let gram = SymMatrix::symmetrized(&views.pick * views.pick.transpose());
    let degenerate = linalg::rank(&gram) < nv || linalg::rank(&views.cov) < nv;
    Ok(CheckedViews { views, degenerate })
}

/// Map the confidence `t = λ/(1+λ)` to `λ = t/(1−t)`; `t = 1` maps to `+∞`.
pub fn confidence_to_lambda(t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfRange {
            name: "confidence",
            value: t,
        });
    }
    if t == 1.0 {
        return Ok(f64::INFINITY);
    }
    Ok(t / (1.0 - t))
}

/// Inverse of [`confidence_to_lambda`].
pub fn lambda_to_confidence(lambda: f64) -> f64 {
    if lambda.is_infinite() {
        1.0
    } else {
        lambda / (1.0 + lambda)
    }
}

/// Prior model: reference drift, return covariance estimate, drift
/// uncertainty scale `τ`, risk aversion and risk-free rate.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    pub mu: DVector<f64>,
    pub cov: SymMatrix,
    pub tau: f64,
    pub gamma: f64,
    pub rf: f64,
}

/// Minimum eigenvalue relative to λ_max for a prior covariance.
pub const PRIOR_PD_TOL: f64 = 1e-12;

impl PriorSpec {
    pub fn new(mu: DVector<f64>, cov: SymMatrix, tau: f64, gamma: f64, rf: f64) -> Result<Self> {
        if mu.len() != cov.dim() {
            return Err(Error::DimensionMismatch {
                context: "prior drift vs covariance",
                expected: cov.dim(),
                found: mu.len(),
            });
        }
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::OutOfRange {
                name: "tau",
                value: tau,
            });
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::OutOfRange {
                name: "gamma",
                value: gamma,
            });
        }
        if !cov.is_positive_definite(PRIOR_PD_TOL) {
            return Err(Error::NotPositiveDefinite("prior covariance"));
        }
        Ok(Self {
            mu,
            cov,
            tau,
            gamma,
            rf,
        })
    }

    pub fn n_assets(&self) -> usize {
        self.mu.len()
    }

    /// Covariance of the drift estimate, `τ·Ĉ_R`.
    pub fn drift_cov(&self) -> SymMatrix {
        self.cov.scaled(self.tau)
    }
}
