//! Random draws: correlated Gaussian returns, Wishart matrices and
//! simulated investor views.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{psd_factor, SymMatrix};

/// `n` i.i.d. draws of `N(mean, cov)`, one per row.
pub fn sample_mvn<R: Rng + ?Sized>(mean: &DVector<f64>, cov: &SymMatrix, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if mean.len() != cov.dim() {
        return Err(Error::DimensionMismatch {
            context: "sampler mean vs covariance",
            expected: cov.dim(),
            found: mean.len(),
        });
    }
    let factor = psd_factor(cov)?;
    let dim = mean.len();
    let mut z = DMatrix::<f64>::zeros(n, dim);
    for i in 0..n {
        for j in 0..dim {
            z[(i, j)] = StandardNormal.sample(rng);
        }
    }
    let mut x = z * factor.transpose();
    for mut row in x.row_iter_mut() {
        row += mean.transpose();
    }
    Ok(x)
}

/// Wishart draw `W(df, scale)` by the Bartlett decomposition.
pub fn sample_wishart<R: Rng + ?Sized>(df: usize, scale: &SymMatrix, rng: &mut R) -> Result<SymMatrix> {
    let p = scale.dim();
    if df < p || df == 0 {
        return Err(Error::InsufficientDegreesOfFreedom { df, dim: p });
    }
    let factor = psd_factor(scale)?;
    let mut a = DMatrix::<f64>::zeros(p, p);
    for i in 0..p {
        let chi = ChiSquared::new((df - i) as f64).map_err(|_| Error::InsufficientDegreesOfFreedom { df, dim: p })?;
        a[(i, i)] = crate::linalg::sqrt(chi.sample(rng));
        for j in 0..i {
            a[(i, j)] = StandardNormal.sample(rng);
        }
    }
    let la = factor * a;
    Ok(SymMatrix::symmetrized(&la * la.transpose()))
}

/// How simulated views relate to the realized forward drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViewsKind {
    /// Centered on the forward drift.
    Correct,
    /// Centered on zero, unrelated to the forward drift.
    Ambiguous,
    /// Centered on the negated forward drift.
    Incorrect,
}

impl ViewsKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViewsKind::Correct => "correct",
            ViewsKind::Ambiguous => "ambiguous",
            ViewsKind::Incorrect => "incorrect",
        }
    }
}

/// Blurred views from forward-window estimates.
///
/// `C_V = S/ℓ_f` with `S ~ W(ℓ_f, P·cov_fwd·Pᵀ)`, then `ν ~ N(center, C_V)`
/// where the center depends on `kind`.
pub fn generate_views<R: Rng + ?Sized>(
    kind: ViewsKind,
    pick: &DMatrix<f64>,
    mu_fwd: &DVector<f64>,
    cov_fwd: &SymMatrix,
    ell_f: usize,
    rng: &mut R,
) -> Result<(DVector<f64>, SymMatrix)> {
    if pick.ncols() != mu_fwd.len() {
        return Err(Error::DimensionMismatch {
            context: "views matrix columns",
            expected: mu_fwd.len(),
            found: pick.ncols(),
        });
    }
    let scale = cov_fwd.congruence(pick);
    let view_cov = sample_wishart(ell_f, &scale, rng)?.scaled(1.0 / ell_f as f64);
    let center = match kind {
        ViewsKind::Correct => pick * mu_fwd,
        ViewsKind::Ambiguous => DVector::zeros(pick.nrows()),
        ViewsKind::Incorrect => -(pick * mu_fwd),
    };
    let nu = sample_mvn(&center, &view_cov, 1, rng)?.row(0).transpose();
    Ok((nu, view_cov))
}
