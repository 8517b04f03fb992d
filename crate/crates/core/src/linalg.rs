//! Symmetric-matrix kernel: validation, spectral functions, pseudo-inverse
//! and pseudo-determinant.
//!
//! Everything spectral goes through a symmetric eigendecomposition. The
//! dimensions in this crate are at most a few hundred, so the cost is fine
//! and the PSD branch of every matrix function is exact.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative asymmetry accepted (and removed) on construction.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Relative negative-eigenvalue slack accepted for covariance matrices.
pub const PSD_TOL: f64 = 1e-10;
/// Relative negative-eigenvalue slack accepted by [`sym_sqrt`].
pub const SQRT_CLIP_TOL: f64 = 1e-8;

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// A dense real symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

/// Eigenvalues (ascending) and orthonormal eigenvectors (as columns).
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl Spectrum {
    /// Largest eigenvalue magnitude.
    pub fn scale(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |acc, v| acc.max(abs(*v)))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Rebuild `V diag(f(λ)) Vᵀ`.
    pub fn rebuild(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let mapped = self.values.map(f);
        let scaled = &self.vectors * DMatrix::from_diagonal(&mapped);
        SymMatrix::symmetrized(scaled * self.vectors.transpose())
    }
}

impl SymMatrix {
    /// Validate symmetry (relative tolerance [`SYMMETRY_TOL`]) and symmetrize.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        let scale = m.iter().fold(0.0_f64, |acc, v| acc.max(abs(*v)));
        let n = m.nrows();
        let mut asym = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                asym = asym.max(abs(m[(i, j)] - m[(j, i)]));
            }
        }
        let allowed = SYMMETRY_TOL * scale;
        if asym > allowed {
            return Err(Error::NotSymmetric {
                asymmetry: asym,
                allowed,
            });
        }
        Ok(Self::symmetrized(m))
    }

    /// Symmetric and PSD up to round-off: eigenvalues ≥ −[`PSD_TOL`]·λ_max.
    pub fn covariance(m: DMatrix<f64>) -> Result<Self> {
        let s = Self::new(m)?;
        let spec = s.spectrum();
        if spec.min() < -PSD_TOL * spec.scale() {
            return Err(Error::NegativeEigenvalueBeyondTolerance {
                eigenvalue: spec.min(),
                scale: spec.scale(),
            });
        }
        Ok(s)
    }

    /// Build from row-major nested rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        for r in rows {
            if r.len() != n {
                return Err(Error::NotSquare {
                    rows: n,
                    cols: r.len(),
                });
            }
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// `(M + Mᵀ)/2` without any check. Internal results only.
    pub(crate) fn symmetrized(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        Self((m + t) * 0.5)
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| self.0.row(i).iter().copied().collect())
            .collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(&self.0 * factor)
    }

    pub fn add(&self, other: &SymMatrix) -> Self {
        Self::symmetrized(&self.0 + &other.0)
    }

    /// `X · self · Xᵀ` for a general `X`.
    pub fn congruence(&self, x: &DMatrix<f64>) -> Self {
        Self::symmetrized(x * &self.0 * x.transpose())
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn spectrum(&self) -> Spectrum {
        let eig = SymmetricEigen::new(self.0.clone());
        // nalgebra returns eigenvalues unordered; sort ascending for stable
        // downstream behaviour.
        let n = self.dim();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
        let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        Spectrum { values, vectors }
    }

    /// Default rank cutoff `1e-12 · λ_max · dim`.
    pub fn default_tol(&self) -> f64 {
        default_tol(&self.spectrum(), self.dim())
    }

    /// Smallest eigenvalue is above `rel · λ_max`.
    pub fn is_positive_definite(&self, rel: f64) -> bool {
        if self.dim() == 0 {
            return true;
        }
        let spec = self.spectrum();
        spec.min() > rel * spec.scale() && spec.min() > 0.0
    }

    /// Cholesky solve `self · X = B`. Fails if `self` is not numerically PD.
    pub fn solve(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let chol = nalgebra::Cholesky::new(self.0.clone())
            .ok_or(Error::NotPositiveDefinite("Cholesky factorization failed"))?;
        Ok(chol.solve(b))
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let chol = nalgebra::Cholesky::new(self.0.clone())
            .ok_or(Error::NotPositiveDefinite("Cholesky factorization failed"))?;
        Ok(chol.solve(b))
    }

    pub fn quad_form(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.0 * x))
    }
}

fn default_tol(spec: &Spectrum, dim: usize) -> f64 {
    1e-12 * spec.scale() * dim as f64
}

/// Unique PSD square root by symmetric eigendecomposition.
///
/// Eigenvalues in `[−1e-8·λ_max, 0)` are treated as round-off and clipped.
pub fn sym_sqrt(m: &SymMatrix) -> Result<SymMatrix> {
    let spec = m.spectrum();
    let floor = -SQRT_CLIP_TOL * spec.scale();
    if spec.min() < floor {
        return Err(Error::NegativeEigenvalueBeyondTolerance {
            eigenvalue: spec.min(),
            scale: spec.scale(),
        });
    }
    Ok(spec.rebuild(|l| sqrt(l.max(0.0))))
}

/// Pseudo-inverse square root: `λ^{-1/2}` on eigenvalues above `tol`, zero elsewhere.
pub fn pinv_sqrt(m: &SymMatrix, tol: Option<f64>) -> SymMatrix {
    let spec = m.spectrum();
    let tol = tol.unwrap_or_else(|| default_tol(&spec, m.dim()));
    spec.rebuild(|l| if l > tol { 1.0 / sqrt(l) } else { 0.0 })
}

/// Square root and pseudo-inverse square root from a single decomposition.
pub fn sqrt_and_pinv_sqrt(m: &SymMatrix) -> Result<(SymMatrix, SymMatrix)> {
    let spec = m.spectrum();
    if spec.min() < -SQRT_CLIP_TOL * spec.scale() {
        return Err(Error::NegativeEigenvalueBeyondTolerance {
            eigenvalue: spec.min(),
            scale: spec.scale(),
        });
    }
    let tol = default_tol(&spec, m.dim());
    Ok((
        spec.rebuild(|l| sqrt(l.max(0.0))),
        spec.rebuild(|l| if l > tol { 1.0 / sqrt(l) } else { 0.0 }),
    ))
}

/// Spectral Moore-Penrose pseudo-inverse. `tol` defaults to `1e-12·λ_max·dim`.
pub fn pseudo_inverse(m: &SymMatrix, tol: Option<f64>) -> SymMatrix {
    let spec = m.spectrum();
    let tol = tol.unwrap_or_else(|| default_tol(&spec, m.dim()));
    spec.rebuild(|l| if abs(l) > tol { 1.0 / l } else { 0.0 })
}

/// Product of the eigenvalues above `tol`; the empty product is 1.
pub fn pseudo_det(m: &SymMatrix, tol: Option<f64>) -> f64 {
    let spec = m.spectrum();
    let tol = tol.unwrap_or_else(|| default_tol(&spec, m.dim()));
    spec.values.iter().filter(|l| **l > tol).product()
}

/// Clip eigenvalues below zero. PSD inputs come back untouched, so the
/// operation is exactly idempotent.
pub fn clip_to_psd(m: &SymMatrix) -> SymMatrix {
    let mut current = m.clone();
    for _ in 0..4 {
        let spec = current.spectrum();
        let noise = 8.0 * f64::EPSILON * spec.scale() * current.dim().max(1) as f64;
        if spec.min() >= -noise {
            return current;
        }
        current = spec.rebuild(|l| l.max(0.0));
    }
    current
}

/// Numerical rank with the default cutoff.
pub fn rank(m: &SymMatrix) -> usize {
    let spec = m.spectrum();
    let tol = default_tol(&spec, m.dim());
    spec.values.iter().filter(|l| abs(**l) > tol).count()
}

/// Spectral factor `F` with `F Fᵀ = M` for PSD `M` (negative round-off clipped).
pub fn psd_factor(m: &SymMatrix) -> Result<DMatrix<f64>> {
    let spec = m.spectrum();
    if spec.min() < -SQRT_CLIP_TOL * spec.scale() {
        return Err(Error::NegativeEigenvalueBeyondTolerance {
            eigenvalue: spec.min(),
            scale: spec.scale(),
        });
    }
    let roots = spec.values.map(|l| sqrt(l.max(0.0)));
    Ok(&spec.vectors * DMatrix::from_diagonal(&roots))
}

/// Unbiased sample covariance of the rows of `x` (observations × variables).
pub fn sample_covariance(x: &DMatrix<f64>) -> Result<(DVector<f64>, SymMatrix)> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::TooShort(n));
    }
    let mean = DVector::from_fn(x.ncols(), |j, _| x.column(j).sum() / n as f64);
    let mut centered = x.clone();
    for j in 0..x.ncols() {
        for i in 0..n {
            centered[(i, j)] -= mean[j];
        }
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    Ok((mean, SymMatrix::symmetrized(cov)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
        (a - b).amax() <= tol
    }

    #[test]
    fn sqrt_identity_and_diagonal() {
        let i3 = SymMatrix::identity(3);
        assert!(close(sym_sqrt(&i3).unwrap().as_matrix(), i3.as_matrix(), 1e-15));
        let d = SymMatrix::from_diagonal(&[4.0, 9.0]);
        let r = sym_sqrt(&d).unwrap();
        assert!(close(r.as_matrix(), SymMatrix::from_diagonal(&[2.0, 3.0]).as_matrix(), 1e-14));
    }

    #[test]
    fn sqrt_rejects_clearly_negative() {
        let d = SymMatrix::from_diagonal(&[1.0, -1e-3]);
        assert!(matches!(
            sym_sqrt(&d),
            Err(Error::NegativeEigenvalueBeyondTolerance { .. })
        ));
        // round-off sized negatives are clipped
        let d = SymMatrix::from_diagonal(&[1.0, -1e-12]);
        let r = sym_sqrt(&d).unwrap();
        assert_eq!(r.as_matrix()[(1, 1)], 0.0);
    }

    #[test]
    fn pinv_examples() {
        let d = SymMatrix::from_diagonal(&[2.0, 0.0]);
        let p = pseudo_inverse(&d, None);
        assert!(close(p.as_matrix(), SymMatrix::from_diagonal(&[0.5, 0.0]).as_matrix(), 1e-15));

        let ones = SymMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let p = pseudo_inverse(&ones, None);
        assert!(close(p.as_matrix(), &DMatrix::from_element(2, 2, 0.25), 1e-14));
    }

    #[test]
    fn pinv_matches_regularized_limit() {
        // Z^T (Z Z^T + δ² I)^{-1} at δ = 1e-6 for Z = [[1,1],[1,1]]
        let z = DMatrix::from_element(2, 2, 1.0);
        let delta2 = 1e-12;
        let reg = &z * z.transpose() + DMatrix::identity(2, 2) * delta2;
        let limit = z.transpose() * reg.try_inverse().unwrap();
        let p = pseudo_inverse(&SymMatrix::new(z).unwrap(), None);
        assert!(close(p.as_matrix(), &limit, 1e-9));
    }

    #[test]
    fn pdet_examples() {
        assert!((pseudo_det(&SymMatrix::from_diagonal(&[2.0, 0.0, 3.0]), None) - 6.0).abs() < 1e-14);
        assert_eq!(pseudo_det(&SymMatrix::identity(4), None), 1.0);
        assert_eq!(pseudo_det(&SymMatrix::zeros(3), None), 1.0);
    }

    #[test]
    fn clip_examples() {
        let c = clip_to_psd(&SymMatrix::from_diagonal(&[1.0, -1e-12]));
        assert_eq!(c.as_matrix(), SymMatrix::from_diagonal(&[1.0, 0.0]).as_matrix());
        let c = clip_to_psd(&SymMatrix::from_diagonal(&[1.0, -0.5]));
        assert!(close(c.as_matrix(), SymMatrix::from_diagonal(&[1.0, 0.0]).as_matrix(), 1e-15));
        let psd = SymMatrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        assert_eq!(clip_to_psd(&psd), psd);
    }

    #[test]
    fn construction_checks() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(SymMatrix::new(asym), Err(Error::NotSymmetric { .. })));
        let tiny = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5 + 1e-12, 1.0]);
        let s = SymMatrix::new(tiny).unwrap();
        assert_eq!(s.as_matrix()[(0, 1)], s.as_matrix()[(1, 0)]);
        assert!(matches!(
            SymMatrix::new(DMatrix::zeros(2, 3)),
            Err(Error::NotSquare { .. })
        ));
        assert!(SymMatrix::covariance(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -0.1]))).is_err());
    }

    #[test]
    fn sample_covariance_is_unbiased_estimator() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 9.0]);
        let (mean, cov) = sample_covariance(&x).unwrap();
        assert_eq!(mean.as_slice(), &[2.0, 5.0]);
        assert!((cov.as_matrix()[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((cov.as_matrix()[(0, 1)] - 3.5).abs() < 1e-15);
        assert!((cov.as_matrix()[(1, 1)] - 13.0).abs() < 1e-13);
    }
}
