//! Posterior updates: Black-Litterman (drift views and return views) and the
//! generalized Wasserstein barycenter update in both flavours.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, pinv_sqrt, sqrt_and_pinv_sqrt, sym_sqrt, SymMatrix};
use crate::views::{PriorSpec, ViewSet, ViewTarget};

/// Relative eigenvalue floor below which a view covariance counts as singular.
pub const VIEW_COV_PD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Bl1,
    Bl2,
    Gwb1,
    Gwb2,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Bl1 => "bl1",
            Method::Bl2 => "bl2",
            Method::Gwb1 => "gwb1",
            Method::Gwb2 => "gwb2",
        }
    }
}

impl core::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bl1" => Ok(Method::Bl1),
            "bl2" => Ok(Method::Bl2),
            "gwb1" => Ok(Method::Gwb1),
            "gwb2" => Ok(Method::Gwb2),
            _ => Err(Error::NotApplicable("unknown method")),
        }
    }
}

/// Updated return distribution fed to the optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorUpdate {
    pub mean: DVector<f64>,
    pub cov: SymMatrix,
    pub method: Method,
    /// `λ` used by the geometric updates (`+∞` allowed); 0 for Black-Litterman.
    pub lambda_used: f64,
}

/// Reverse-optimized drift `r_f·e + γ·C·w`.
pub fn equilibrium_drift(cov: &SymMatrix, w_bm: &DVector<f64>, gamma: f64, rf: f64) -> Result<DVector<f64>> {
    if w_bm.len() != cov.dim() {
        return Err(Error::DimensionMismatch {
            context: "benchmark weights",
            expected: cov.dim(),
            found: w_bm.len(),
        });
    }
    let total: f64 = w_bm.sum();
    if linalg::abs(total - 1.0) > 1e-8 {
        return Err(Error::OutOfRange {
            name: "sum of benchmark weights",
            value: total,
        });
    }
    Ok(cov.as_matrix() * w_bm * gamma + DVector::from_element(w_bm.len(), rf))
}

fn check_views(views: &ViewSet, n_assets: usize, target: ViewTarget) -> Result<()> {
    if views.target != target {
        return Err(Error::TargetMismatch);
    }
    if views.n_assets() != n_assets {
        return Err(Error::DimensionMismatch {
            context: "views matrix columns",
            expected: n_assets,
            found: views.n_assets(),
        });
    }
    Ok(())
}

/// Gaussian conditioning of `N(μ, C)` on `P x ~ N(ν, C_V)`, written in
/// Woodbury form so that only `P C Pᵀ + C_V` is ever factorized.
fn bayes_blend(mu: &DVector<f64>, cov: &SymMatrix, views: &ViewSet) -> Result<(DVector<f64>, SymMatrix)> {
    if !views.cov.is_positive_definite(VIEW_COV_PD_TOL) {
        return Err(Error::SingularViewCovariance);
    }
    let pick = &views.pick;
    let cp_t = cov.as_matrix() * pick.transpose();
    let innovation = cov.congruence(pick).add(&views.cov);
    let residual = &views.nu - pick * mu;
    let gain_t = innovation.solve(&cp_t.transpose())?;
    let mean = mu + gain_t.transpose() * residual;
    let shrink = &cp_t * gain_t;
    let post = SymMatrix::symmetrized(cov.as_matrix() - shrink);
    Ok((mean, linalg::clip_to_psd(&post)))
}

/// Black-Litterman update with views on the drift.
///
/// Returns the posterior drift and the return covariance `Ĉ_R + C_BL`.
pub fn bl1_update(prior: &PriorSpec, views: &ViewSet) -> Result<PosteriorUpdate> {
    check_views(views, prior.n_assets(), ViewTarget::DriftSpace)?;
    let (mean, drift_cov) = bayes_blend(&prior.mu, &prior.drift_cov(), views)?;
    Ok(PosteriorUpdate {
        mean,
        cov: prior.cov.add(&drift_cov),
        method: Method::Bl1,
        lambda_used: 0.0,
    })
}

/// Black-Litterman update with views on the returns; `τ` plays no role.
pub fn bl2_update(mu_hat: &DVector<f64>, cov_hat: &SymMatrix, views: &ViewSet) -> Result<PosteriorUpdate> {
    if mu_hat.len() != cov_hat.dim() {
        return Err(Error::DimensionMismatch {
            context: "prior drift vs covariance",
            expected: cov_hat.dim(),
            found: mu_hat.len(),
        });
    }
    check_views(views, mu_hat.len(), ViewTarget::ReturnSpace)?;
    let (mean, cov) = bayes_blend(mu_hat, cov_hat, views)?;
    Ok(PosteriorUpdate {
        mean,
        cov,
        method: Method::Bl2,
        lambda_used: 0.0,
    })
}

/// Building blocks of the barycenter update.
///
/// * `w = (I + λPᵀP)⁻¹`
/// * `gain = λ·w·Pᵀ`, computed as `Pᵀ(I/λ + PPᵀ)⁻¹` so it stays bounded as
///   `λ → ∞`, where it becomes the Moore-Penrose inverse of `P`.
/// * `b = λ·w·A^{-1/2}(A^{1/2}PᵀC_V P A^{1/2})^{1/2}A^{-1/2}·w` with
///   `A = w C_P w`, evaluated through the factorization `A = (w C_P^{1/2})(w C_P^{1/2})ᵀ`
///   as `C_P^{-1/2}(C_P^{1/2}·gain·C_V·gainᵀ·C_P^{1/2})^{1/2}C_P^{-1/2}`.
#[derive(Debug, Clone)]
pub struct GwbFactors {
    pub w: SymMatrix,
    pub gain: DMatrix<f64>,
    pub b: SymMatrix,
}

impl GwbFactors {
    /// `(W + s·B) C (W + s·B)` for a branch sign `s ∈ {+1, −1}`.
    pub fn covariance(&self, cov_p: &SymMatrix, sign: f64) -> SymMatrix {
        let t = self.w.as_matrix() + self.b.as_matrix() * sign;
        cov_p.congruence(&t)
    }

    pub fn drift(&self, mu_p: &DVector<f64>, nu: &DVector<f64>) -> DVector<f64> {
        self.w.as_matrix() * mu_p + &self.gain * nu
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_nan() {
        return Err(Error::OutOfRange {
            name: "lambda",
            value: lambda,
        });
    }
    if lambda < 0.0 {
        return Err(Error::NegativeLambda(lambda));
    }
    Ok(())
}

fn check_prior_cov(cov_p: &SymMatrix) -> Result<()> {
    let spec = cov_p.spectrum();
    if spec.min() < -linalg::PSD_TOL * spec.scale() {
        return Err(Error::NonPsdPrior);
    }
    Ok(())
}

/// `λ·(I + λPᵀP)⁻¹Pᵀ` through the spectrum of `PPᵀ`; directions in the
/// kernel of `Pᵀ` contribute nothing.
fn view_gain(pick: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let gram = SymMatrix::symmetrized(pick * pick.transpose());
    let spec = gram.spectrum();
    let tol = 1e-12 * spec.scale() * gram.dim() as f64;
    let weights = spec.values.map(|s| {
        if s <= tol {
            0.0
        } else if lambda.is_infinite() {
            1.0 / s
        } else {
            lambda / (1.0 + lambda * s)
        }
    });
    pick.transpose() * (&spec.vectors * DMatrix::from_diagonal(&weights) * spec.vectors.transpose())
}

pub fn gwb_factors(cov_p: &SymMatrix, pick: &DMatrix<f64>, view_cov: &SymMatrix, lambda: f64) -> Result<GwbFactors> {
    check_lambda(lambda)?;
    check_prior_cov(cov_p)?;
    let n = cov_p.dim();
    if pick.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "views matrix columns",
            expected: n,
            found: pick.ncols(),
        });
    }
    if view_cov.dim() != pick.nrows() {
        return Err(Error::DimensionMismatch {
            context: "view covariance dimension",
            expected: pick.nrows(),
            found: view_cov.dim(),
        });
    }
    if lambda == 0.0 {
        return Ok(GwbFactors {
            w: SymMatrix::identity(n),
            gain: DMatrix::zeros(n, pick.nrows()),
            b: SymMatrix::zeros(n),
        });
    }
    let gain = view_gain(pick, lambda);
    let w = SymMatrix::symmetrized(DMatrix::identity(n, n) - &gain * pick);
    let target = view_cov.congruence(&gain);
    let (root, inv_root) = sqrt_and_pinv_sqrt(cov_p)?;
    let middle = sym_sqrt(&target.congruence(root.as_matrix()))?;
    let b = middle.congruence(inv_root.as_matrix());
    Ok(GwbFactors { w, gain, b })
}

/// Closed-form minimizer `(m*, C*)` of the barycenter Lagrangian.
///
/// `λ = 0` returns the prior unchanged; `λ = +∞` returns the exact limit, in
/// which `P m* = ν` and `P C* Pᵀ = C_V` whenever `P` has full row rank.
pub fn gwb_core_update(
    mu_p: &DVector<f64>,
    cov_p: &SymMatrix,
    views: &ViewSet,
    lambda: f64,
) -> Result<(DVector<f64>, SymMatrix)> {
    if mu_p.len() != cov_p.dim() {
        return Err(Error::DimensionMismatch {
            context: "prior drift vs covariance",
            expected: cov_p.dim(),
            found: mu_p.len(),
        });
    }
    check_lambda(lambda)?;
    check_prior_cov(cov_p)?;
    if lambda == 0.0 {
        return Ok((mu_p.clone(), cov_p.clone()));
    }
    let f = gwb_factors(cov_p, &views.pick, &views.cov, lambda)?;
    Ok((f.drift(mu_p, &views.nu), f.covariance(cov_p, 1.0)))
}

/// Geometric update with views on the drift: the barycenter is computed on
/// the drift distribution `N(μ_d, τĈ_R)` and `Ĉ_R` is added back.
pub fn gwb1_update(prior: &PriorSpec, views: &ViewSet, lambda: f64) -> Result<PosteriorUpdate> {
    check_views(views, prior.n_assets(), ViewTarget::DriftSpace)?;
    let (mean, core_cov) = gwb_core_update(&prior.mu, &prior.drift_cov(), views, lambda)?;
    Ok(PosteriorUpdate {
        mean,
        cov: prior.cov.add(&core_cov),
        method: Method::Gwb1,
        lambda_used: lambda,
    })
}

/// Geometric update with views on the returns; the barycenter is the posterior.
pub fn gwb2_update(mu_hat: &DVector<f64>, cov_hat: &SymMatrix, views: &ViewSet, lambda: f64) -> Result<PosteriorUpdate> {
    check_views(views, mu_hat.len(), ViewTarget::ReturnSpace)?;
    let (mean, cov) = gwb_core_update(mu_hat, cov_hat, views, lambda)?;
    Ok(PosteriorUpdate {
        mean,
        cov,
        method: Method::Gwb2,
        lambda_used: lambda,
    })
}

/// Alternate closed forms of the updated covariance and how far apart they are.
#[derive(Debug, Clone)]
pub struct CrossCheckReport {
    /// Production evaluation ([`gwb_core_update`]).
    pub primary: SymMatrix,
    /// `(W+B) C (W+B)` with `A^{±1/2}` taken literally and `W` inverted explicitly.
    pub direct: SymMatrix,
    /// `(λW + Γ) PᵀC_V P (λW + Γ)`.
    pub interpolant: SymMatrix,
    /// `A + λ²W Q W + λ(AQ)^{1/2}W + λW(QA)^{1/2}`.
    pub expanded: SymMatrix,
    /// Inverse-covariance form, which never inverts `C_P`.
    pub precision: DMatrix<f64>,
    /// Largest pairwise relative Frobenius deviation between the covariance
    /// forms (the precision form enters through its inverse).
    pub max_relative_deviation: f64,
    /// `‖precision · primary − I‖_max`.
    pub inverse_residual: f64,
}

fn rel_dev(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = a.norm().max(b.norm()).max(f64::MIN_POSITIVE);
    (a - b).norm() / scale
}

/// Evaluate `C*` through every available closed form.
///
/// Needs `PᵀC_V P` invertible and a finite `λ`; otherwise `NotApplicable`.
pub fn gwb_cross_checks(
    mu_p: &DVector<f64>,
    cov_p: &SymMatrix,
    views: &ViewSet,
    lambda: f64,
) -> Result<CrossCheckReport> {
    check_lambda(lambda)?;
    if lambda.is_infinite() {
        return Err(Error::NotApplicable("alternate forms need a finite lambda"));
    }
    let n = cov_p.dim();
    let q = views.projected_cov();
    if !q.is_positive_definite(1e-12) {
        return Err(Error::NotApplicable("P^T C_V P is singular"));
    }
    if !cov_p.is_positive_definite(1e-12) {
        return Err(Error::NotApplicable("prior covariance is singular"));
    }
    let (_, primary) = gwb_core_update(mu_p, cov_p, views, lambda)?;

    let pick = &views.pick;
    let eye = DMatrix::<f64>::identity(n, n);
    let w_inv = eye.clone() + pick.transpose() * pick * lambda;
    let w_mat = w_inv
        .clone()
        .try_inverse()
        .ok_or(Error::NotPositiveDefinite("I + lambda P^T P"))?;
    let w = SymMatrix::symmetrized(w_mat);
    let a = cov_p.congruence(w.as_matrix());
    let (a_root, a_inv_root) = sqrt_and_pinv_sqrt(&a)?;
    let inner = sym_sqrt(&q.congruence(a_root.as_matrix()))?;

    // literal (W + B) C (W + B)
    let b = SymMatrix::symmetrized(
        w.as_matrix() * a_inv_root.as_matrix() * inner.as_matrix() * a_inv_root.as_matrix() * w.as_matrix() * lambda,
    );
    let direct = cov_p.congruence(&(w.as_matrix() + b.as_matrix()));

    // (λW + Γ) Q (λW + Γ)
    let c_root = sym_sqrt(cov_p)?;
    let x = q.congruence(&(c_root.as_matrix() * w.as_matrix()));
    let x_inv_root = pinv_sqrt(&x, None);
    let gamma = SymMatrix::symmetrized(
        w.as_matrix() * c_root.as_matrix() * x_inv_root.as_matrix() * c_root.as_matrix() * w.as_matrix(),
    );
    let interpolant = q.congruence(&(w.as_matrix() * lambda + gamma.as_matrix()));

    // A + λ² WQW + λ (AQ)^{1/2} W + λ W (QA)^{1/2}
    let aq_root = a_root.as_matrix() * inner.as_matrix() * a_inv_root.as_matrix();
    let cross = &aq_root * w.as_matrix() * lambda;
    let expanded = SymMatrix::symmetrized(
        a.as_matrix() + q.congruence(w.as_matrix()).as_matrix() * (lambda * lambda) + &cross + cross.transpose(),
    );

    // W⁻¹ A^{1/2} K⁻² A^{1/2} W⁻¹ with K = A^{1/2} W⁻¹ A^{1/2} + λ (A^{1/2} Q A^{1/2})^{1/2}
    let k = SymMatrix::symmetrized(a_root.as_matrix() * &w_inv * a_root.as_matrix() + inner.as_matrix() * lambda);
    let k2 = SymMatrix::symmetrized(k.as_matrix() * k.as_matrix());
    let outer = &w_inv * a_root.as_matrix();
    let precision = &outer * k2.solve(&outer.transpose())?;
    let precision = (&precision + precision.transpose()) * 0.5;
    let from_precision = precision
        .clone()
        .try_inverse()
        .ok_or(Error::NotPositiveDefinite("precision form"))?;

    let forms: Vec<&DMatrix<f64>> = alloc::vec![
        primary.as_matrix(),
        direct.as_matrix(),
        interpolant.as_matrix(),
        expanded.as_matrix(),
        &from_precision,
    ];
    let mut worst = 0.0_f64;
    for i in 0..forms.len() {
        for j in (i + 1)..forms.len() {
            worst = worst.max(rel_dev(forms[i], forms[j]));
        }
    }
    let inverse_residual = (&precision * primary.as_matrix() - eye).amax();
    Ok(CrossCheckReport {
        primary,
        direct,
        interpolant,
        expanded,
        precision,
        max_relative_deviation: worst,
        inverse_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn scalar_views(nu: f64, var: f64, target: ViewTarget) -> ViewSet {
        ViewSet::new(
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, nu),
            SymMatrix::from_diagonal(&[var]),
            target,
            0.5,
        )
        .unwrap()
    }

    #[test]
    fn equilibrium_examples() {
        let w = DVector::from_element(4, 0.25);
        let mu = equilibrium_drift(&SymMatrix::identity(4), &w, 2.5, 0.0).unwrap();
        assert!(mu.iter().all(|v| (*v - 0.625).abs() < 1e-15));
        let mu = equilibrium_drift(&SymMatrix::identity(4), &w, 0.0, 0.01).unwrap();
        assert!(mu.iter().all(|v| *v == 0.01));
        assert!(equilibrium_drift(&SymMatrix::identity(4), &DVector::from_element(4, 0.3), 1.0, 0.0).is_err());
    }

    #[test]
    fn bl1_scalar() {
        let (mu, s2, tau, nu, v2) = (0.03, 0.04, 0.2, 0.08, 0.01);
        let prior = PriorSpec::new(DVector::from_element(1, mu), SymMatrix::from_diagonal(&[s2]), tau, 2.5, 0.0).unwrap();
        let post = bl1_update(&prior, &scalar_views(nu, v2, ViewTarget::DriftSpace)).unwrap();
        let expected_mu = (v2 * mu + tau * s2 * nu) / (v2 + tau * s2);
        let expected_var = s2 + tau * (s2 * v2 / (tau * s2 + v2));
        assert!((post.mean[0] - expected_mu).abs() < 1e-15);
        assert!((post.cov.as_matrix()[(0, 0)] - expected_var).abs() < 1e-15);
    }

    #[test]
    fn bl_rejects_wrong_target_and_singular_views() {
        let prior = PriorSpec::new(DVector::zeros(1), SymMatrix::identity(1), 0.1, 2.5, 0.0).unwrap();
        let ret = scalar_views(0.1, 1.0, ViewTarget::ReturnSpace);
        assert_eq!(bl1_update(&prior, &ret).unwrap_err(), Error::TargetMismatch);
        let sing = scalar_views(0.1, 0.0, ViewTarget::DriftSpace);
        assert_eq!(bl1_update(&prior, &sing).unwrap_err(), Error::SingularViewCovariance);
    }

    #[test]
    fn bl2_equal_precision_average() {
        let cov = SymMatrix::from_rows(&[vec![0.04, 0.01], vec![0.01, 0.09]]).unwrap();
        let mu = DVector::from_vec(vec![0.01, 0.02]);
        let nu = DVector::from_vec(vec![0.05, -0.03]);
        let views = ViewSet::new(DMatrix::identity(2, 2), nu.clone(), cov.clone(), ViewTarget::ReturnSpace, 0.5).unwrap();
        let post = bl2_update(&mu, &cov, &views).unwrap();
        assert!((post.mean.clone() - (&mu + &nu) * 0.5).amax() < 1e-15);
        assert!((post.cov.as_matrix() - cov.as_matrix() * 0.5).amax() < 1e-15);
    }

    #[test]
    fn bl2_scalar_neutral_view() {
        let post = bl2_update(
            &DVector::from_element(1, 0.07),
            &SymMatrix::from_diagonal(&[0.04]),
            &scalar_views(0.07, 0.01, ViewTarget::ReturnSpace),
        )
        .unwrap();
        assert_eq!(post.mean[0], 0.07);
        assert!((post.cov.as_matrix()[(0, 0)] - 0.04 * 0.01 / 0.05).abs() < 1e-16);
    }

    #[test]
    fn gwb_lambda_zero_is_identity() {
        let cov = SymMatrix::from_rows(&[vec![0.04, 0.01], vec![0.01, 0.09]]).unwrap();
        let mu = DVector::from_vec(vec![0.01, 0.02]);
        let views = ViewSet::new(
            DMatrix::from_row_slice(1, 2, &[1.0, -1.0]),
            DVector::from_element(1, 0.3),
            SymMatrix::from_diagonal(&[0.5]),
            ViewTarget::ReturnSpace,
            0.0,
        )
        .unwrap();
        let (m, c) = gwb_core_update(&mu, &cov, &views, 0.0).unwrap();
        assert_eq!(m, mu);
        assert_eq!(c, cov);
    }

    #[test]
    fn gwb_diagonal_volatility_interpolation() {
        let sp = [0.1, 0.2, 0.3];
        let sv = [0.4, 0.05, 0.3];
        let cov = SymMatrix::from_diagonal(&sp.map(|s| s * s));
        let vcov = SymMatrix::from_diagonal(&sv.map(|s| s * s));
        let views = ViewSet::new(DMatrix::identity(3, 3), DVector::zeros(3), vcov, ViewTarget::ReturnSpace, 0.5).unwrap();
        for lambda in [0.25, 1.0, 4.0, 19.0] {
            let (_, c) = gwb_core_update(&DVector::zeros(3), &cov, &views, lambda).unwrap();
            for i in 0..3 {
                let expected = (sp[i] + lambda * sv[i]) / (1.0 + lambda);
                assert!((c.as_matrix()[(i, i)].sqrt() - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gwb_infinite_lambda_matches_views() {
        let cov = SymMatrix::from_rows(&[vec![0.04, 0.01], vec![0.01, 0.09]]).unwrap();
        let vcov = SymMatrix::from_rows(&[vec![0.02, -0.005], vec![-0.005, 0.03]]).unwrap();
        let nu = DVector::from_vec(vec![0.1, -0.2]);
        let views = ViewSet::new(DMatrix::identity(2, 2), nu.clone(), vcov.clone(), ViewTarget::ReturnSpace, 1.0).unwrap();
        let post = gwb2_update(&DVector::zeros(2), &cov, &views, f64::INFINITY).unwrap();
        assert!((post.mean - nu).amax() < 1e-15);
        assert!((post.cov.as_matrix() - vcov.as_matrix()).amax() < 1e-15);
    }

    #[test]
    fn gwb_rejects_bad_inputs() {
        let views = scalar_views(0.0, 1.0, ViewTarget::ReturnSpace);
        let mu = DVector::zeros(1);
        assert_eq!(
            gwb_core_update(&mu, &SymMatrix::identity(1), &views, -1.0).unwrap_err(),
            Error::NegativeLambda(-1.0)
        );
        let bad = SymMatrix::from_diagonal(&[-1.0]);
        assert_eq!(gwb_core_update(&mu, &bad, &views, 1.0).unwrap_err(), Error::NonPsdPrior);
    }

    #[test]
    fn gwb1_scalar_neutral_view() {
        let prior = PriorSpec::new(DVector::from_element(1, 0.05), SymMatrix::identity(1), 0.2, 2.5, 0.0).unwrap();
        let post = gwb1_update(&prior, &scalar_views(0.05, 1.0, ViewTarget::DriftSpace), 1.0).unwrap();
        assert!((post.mean[0] - 0.05).abs() < 1e-15);
        // σ* = (√0.2 + 1)/2, C = 1 + σ*²
        let s = (0.2_f64.sqrt() + 1.0) / 2.0;
        assert!((post.cov.as_matrix()[(0, 0)] - (1.0 + s * s)).abs() < 1e-14);
    }

    #[test]
    fn cross_checks_not_applicable_for_rank_deficient_views() {
        let views = ViewSet::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::zeros(1),
            SymMatrix::identity(1),
            ViewTarget::ReturnSpace,
            0.5,
        )
        .unwrap();
        let r = gwb_cross_checks(&DVector::zeros(2), &SymMatrix::identity(2), &views, 1.0);
        assert!(matches!(r, Err(Error::NotApplicable(_))));
    }
}
