//! Gaussian measures, linear push-forwards and the L2-Wasserstein (Bures)
//! distance between them.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, clip_to_psd, SymMatrix};

/// `N(mean, cov)` with a PSD, possibly singular, covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMeasure {
    mean: DVector<f64>,
    cov: SymMatrix,
}

impl GaussianMeasure {
    pub fn new(mean: DVector<f64>, cov: SymMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch {
                context: "gaussian mean vs covariance",
                expected: cov.dim(),
                found: mean.len(),
            });
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mean"));
        }
        let spec = cov.spectrum();
        if spec.min() < -linalg::PSD_TOL * spec.scale() {
            return Err(Error::NegativeEigenvalueBeyondTolerance {
                eigenvalue: spec.min(),
                scale: spec.scale(),
            });
        }
        Ok(Self { mean, cov })
    }

    /// Dirac mass at `mean`.
    pub fn point_mass(mean: DVector<f64>) -> Self {
        let n = mean.len();
        Self {
            mean,
            cov: SymMatrix::zeros(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &SymMatrix {
        &self.cov
    }

    pub fn into_parts(self) -> (DVector<f64>, SymMatrix) {
        (self.mean, self.cov)
    }

    /// Image of the measure under `x ↦ P x`: `N(P m, P C Pᵀ)`.
    pub fn pushforward(&self, pick: &DMatrix<f64>) -> Result<GaussianMeasure> {
        if pick.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "pushforward map columns",
                expected: self.dim(),
                found: pick.ncols(),
            });
        }
        Ok(GaussianMeasure {
            mean: pick * &self.mean,
            cov: clip_to_psd(&self.cov.congruence(pick)),
        })
    }
}

/// Eigenvalues below this multiple of `λ_max·n` are treated as round-off
/// when taking square roots inside the distance.
const ROOT_CUTOFF: f64 = 1e-13;

fn truncated_root(c: &SymMatrix) -> DMatrix<f64> {
    let spec = c.spectrum();
    let tol = ROOT_CUTOFF * spec.scale() * c.dim() as f64;
    spec.rebuild(|l| if l > tol { linalg::sqrt(l) } else { 0.0 }).into_inner()
}

/// `tr((C₁^{1/2} C₂ C₁^{1/2})^{1/2})`, evaluated as the nuclear norm of
/// `C₂^{1/2} C₁^{1/2}` so that singular inputs lose no accuracy to square
/// roots of round-off.
pub fn bures_cross_term(c1: &SymMatrix, c2: &SymMatrix) -> Result<f64> {
    for c in [c1, c2] {
        let spec = c.spectrum();
        if spec.min() < -linalg::SQRT_CLIP_TOL * spec.scale() {
            return Err(Error::NegativeEigenvalueBeyondTolerance {
                eigenvalue: spec.min(),
                scale: spec.scale(),
            });
        }
    }
    let product = truncated_root(c2) * truncated_root(c1);
    Ok(product.singular_values().sum())
}

/// Squared L2-Wasserstein distance between two Gaussians.
///
/// Valid for singular covariances, including point masses.
pub fn wasserstein2_sq(g1: &GaussianMeasure, g2: &GaussianMeasure) -> Result<f64> {
    if g1.dim() != g2.dim() {
        return Err(Error::DimensionMismatch {
            context: "wasserstein distance",
            expected: g1.dim(),
            found: g2.dim(),
        });
    }
    if g1 == g2 {
        return Ok(0.0);
    }
    let drift = (&g1.mean - &g2.mean).norm_squared();
    let cross = bures_cross_term(&g1.cov, &g2.cov)?;
    let bures = (g1.cov.trace() + g2.cov.trace() - 2.0 * cross).max(0.0);
    Ok(drift + bures)
}

/// `W2²(f_U, f_P) + λ · W2²(P♯f_U, f_V)`.
pub fn gwb_lagrangian(
    update: &GaussianMeasure,
    prior: &GaussianMeasure,
    views: &GaussianMeasure,
    pick: &DMatrix<f64>,
    lambda: f64,
) -> Result<f64> {
    if lambda < 0.0 {
        return Err(Error::NegativeLambda(lambda));
    }
    if !lambda.is_finite() {
        return Err(Error::OutOfRange {
            name: "lambda",
            value: lambda,
        });
    }
    if update.dim() != prior.dim() {
        return Err(Error::DimensionMismatch {
            context: "update vs prior",
            expected: prior.dim(),
            found: update.dim(),
        });
    }
    if pick.nrows() != views.dim() {
        return Err(Error::DimensionMismatch {
            context: "views matrix rows vs views dimension",
            expected: views.dim(),
            found: pick.nrows(),
        });
    }
    let anchor = wasserstein2_sq(update, prior)?;
    if lambda == 0.0 {
        return Ok(anchor);
    }
    let pushed = update.pushforward(pick)?;
    Ok(anchor + lambda * wasserstein2_sq(&pushed, views)?)
}
