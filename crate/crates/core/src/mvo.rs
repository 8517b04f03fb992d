//! Long-only, fully invested mean-variance allocation.
//!
//! Maximizes `(m − r_f e)ᵀx − (γ/2)·xᵀCx` over the unit simplex. A primal
//! active-set method on the bordered KKT system does the work; accelerated
//! projected gradient takes over when the equality subproblems are
//! inconsistent (flat directions of a singular covariance). Every answer is
//! certified by its KKT residuals.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix};

pub const STATIONARITY_TOL: f64 = 1e-7;
pub const SLACKNESS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct MvoProblem {
    pub drift: DVector<f64>,
    pub cov: SymMatrix,
    pub gamma: f64,
    pub rf: f64,
}

impl MvoProblem {
    pub fn new(drift: DVector<f64>, cov: SymMatrix, gamma: f64, rf: f64) -> Result<Self> {
        if drift.len() != cov.dim() {
            return Err(Error::DimensionMismatch {
                context: "drift vs covariance",
                expected: cov.dim(),
                found: drift.len(),
            });
        }
        if drift.is_empty() {
            return Err(Error::DimensionMismatch {
                context: "number of assets",
                expected: 1,
                found: 0,
            });
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::OutOfRange {
                name: "gamma",
                value: gamma,
            });
        }
        if drift.iter().any(|v| !v.is_finite()) || !rf.is_finite() {
            return Err(Error::NonFinite("drift"));
        }
        Ok(Self { drift, cov, gamma, rf })
    }

    pub fn n_assets(&self) -> usize {
        self.drift.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        let excess = self.drift.dot(x) - self.rf * x.sum();
        excess - 0.5 * self.gamma * self.cov.quad_form(x)
    }

    fn linear_term(&self) -> DVector<f64> {
        self.drift.map(|m| m - self.rf)
    }

    fn hessian(&self) -> DMatrix<f64> {
        self.cov.as_matrix() * self.gamma
    }
}

/// Portfolio weights on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub w: DVector<f64>,
}

impl Weights {
    pub fn equal(n: usize) -> Self {
        Self {
            w: DVector::from_element(n, 1.0 / n as f64),
        }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// Sums to one within `1e-8` and no entry below `−1e-10`.
    pub fn is_feasible(&self) -> bool {
        linalg::abs(self.w.sum() - 1.0) <= 1e-8 && self.w.iter().all(|v| *v >= -1e-10)
    }
}

/// Solution together with its optimality certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct MvoSolution {
    pub weights: Weights,
    pub objective: f64,
    /// `max_j (g_j − ν)⁺` where `g = c − Qx` and `ν = xᵀg`.
    pub stationarity: f64,
    /// `max_i x_i·|g_i − ν|`.
    pub slackness: f64,
    pub iterations: usize,
}

/// KKT residuals `(stationarity, slackness)` of a simplex point.
pub fn kkt_residuals(p: &MvoProblem, x: &DVector<f64>) -> (f64, f64) {
    residuals(&p.hessian(), &p.linear_term(), x)
}

fn residuals(q: &DMatrix<f64>, c: &DVector<f64>, x: &DVector<f64>) -> (f64, f64) {
    let g = c - q * x;
    let nu = x.dot(&g);
    let mut stat = 0.0_f64;
    let mut slack = 0.0_f64;
    for i in 0..x.len() {
        stat = stat.max(g[i] - nu);
        slack = slack.max(x[i] * linalg::abs(g[i] - nu));
    }
    (stat, slack)
}

/// Euclidean projection onto `{x ≥ 0, Σx = 1}`.
pub fn project_to_simplex(v: &DVector<f64>) -> DVector<f64> {
    let mut sorted: Vec<f64> = v.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.map(|x| (x - theta).max(0.0))
}

fn normalize(mut x: DVector<f64>) -> DVector<f64> {
    x.apply(|v| *v = v.max(0.0));
    let s = x.sum();
    x / s
}

/// Solve `[Q_SS e; eᵀ 0][z; ν] = [c_S; 1]`. `None` when the system is
/// inconsistent, which happens when the objective is unbounded along the
/// affine hull of the face.
fn face_solve(q: &DMatrix<f64>, c: &DVector<f64>, idx: &[usize]) -> Option<(DVector<f64>, f64)> {
    let k = idx.len();
    let mut kkt = DMatrix::<f64>::zeros(k + 1, k + 1);
    let mut rhs = DVector::<f64>::zeros(k + 1);
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            kkt[(a, b)] = q[(i, j)];
        }
        kkt[(a, k)] = 1.0;
        kkt[(k, a)] = 1.0;
        rhs[a] = c[i];
    }
    rhs[k] = 1.0;
    let scale = kkt.amax().max(rhs.amax());
    let consistent = |sol: &DVector<f64>| {
        let r = (&kkt * sol - &rhs).amax();
        sol.iter().all(|v| v.is_finite()) && r <= 1e-11 * scale * (1.0 + sol.amax())
    };
    let sol = match kkt.clone().lu().solve(&rhs) {
        Some(s) if consistent(&s) => s,
        _ => {
            let svd = kkt.clone().svd(true, true);
            let eps = 1e-13 * svd.singular_values.max();
            let s = svd.solve(&rhs, eps).ok()?;
            if !consistent(&s) {
                return None;
            }
            s
        }
    };
    Some((sol.rows(0, k).into_owned(), sol[k]))
}

/// Primal active-set iteration from a feasible `x`.
fn active_set(q: &DMatrix<f64>, c: &DVector<f64>, mut x: DVector<f64>, max_iter: usize) -> Option<(DVector<f64>, usize)> {
    let n = x.len();
    let mut on: Vec<bool> = x.iter().map(|v| *v > 0.0).collect();
    let add_tol = 1e-13 * c.amax().max(q.amax()).max(f64::MIN_POSITIVE);
    for it in 0..max_iter {
        let idx: Vec<usize> = (0..n).filter(|i| on[*i]).collect();
        let (z, nu) = face_solve(q, c, &idx)?;
        if z.iter().all(|v| *v >= 0.0) {
            x.fill(0.0);
            for (a, &i) in idx.iter().enumerate() {
                x[i] = z[a];
            }
            let g = c - q * &x;
            let entering = (0..n)
                .filter(|j| !on[*j])
                .map(|j| (j, g[j] - nu))
                .fold(None, |best: Option<(usize, f64)>, cand| match best {
                    Some(b) if b.1 >= cand.1 => Some(b),
                    _ => Some(cand),
                });
            match entering {
                Some((j, gap)) if gap > add_tol => on[j] = true,
                _ => return Some((x, it + 1)),
            }
        } else {
            let mut alpha = 1.0_f64;
            let mut leaving = idx[0];
            for (a, &i) in idx.iter().enumerate() {
                if z[a] < 0.0 {
                    let step = x[i] / (x[i] - z[a]);
                    if step < alpha {
                        alpha = step;
                        leaving = i;
                    }
                }
            }
            for (a, &i) in idx.iter().enumerate() {
                x[i] += alpha * (z[a] - x[i]);
            }
            x[leaving] = 0.0;
            on[leaving] = false;
            for &i in &idx {
                if x[i] <= 0.0 {
                    x[i] = 0.0;
                    on[i] = false;
                }
            }
            if !on.iter().any(|b| *b) {
                return None;
            }
        }
    }
    None
}

/// Accelerated projected gradient ascent with adaptive restart.
fn projected_gradient(q: &DMatrix<f64>, c: &DVector<f64>, x0: DVector<f64>, lipschitz: f64, cap: usize) -> (DVector<f64>, usize) {
    let value = |x: &DVector<f64>| c.dot(x) - 0.5 * (q * x).dot(x);
    let mut x = x0.clone();
    let mut y = x0;
    let mut t = 1.0_f64;
    let mut fx = value(&x);
    for it in 0..cap {
        let g = c - q * &y;
        let next = project_to_simplex(&(&y + g / lipschitz));
        let fnext = value(&next);
        if fnext < fx {
            // momentum overshot: restart from the last iterate
            y = x.clone();
            t = 1.0;
            continue;
        }
        let t_next = 0.5 * (1.0 + linalg::sqrt(1.0 + 4.0 * t * t));
        y = &next + (&next - &x) * ((t - 1.0) / t_next);
        x = next;
        fx = fnext;
        t = t_next;
        if it % 32 == 31 {
            let (s, k) = residuals(q, c, &x);
            if s <= 1e-12 && k <= 1e-12 {
                return (x, it + 1);
            }
        }
    }
    (x, cap)
}

fn certify(p: &MvoProblem, x: DVector<f64>, iterations: usize) -> MvoSolution {
    let x = normalize(x);
    let (stationarity, slackness) = kkt_residuals(p, &x);
    MvoSolution {
        objective: p.objective(&x),
        weights: Weights { w: x },
        stationarity,
        slackness,
        iterations,
    }
}

fn certified(s: &MvoSolution) -> bool {
    s.stationarity <= STATIONARITY_TOL && s.slackness <= SLACKNESS_TOL
}

/// Solve and return the KKT certificate.
pub fn solve_mvo_certified(p: &MvoProblem) -> Result<MvoSolution> {
    let n = p.n_assets();
    let q = p.hessian();
    let c = p.linear_term();
    let start = DVector::from_element(n, 1.0 / n as f64);
    let lipschitz = SymMatrix::symmetrized(q.clone()).spectrum().scale();

    if lipschitz <= 1e-300 {
        // linear objective: spread evenly over the best assets
        let top = c.max();
        let tie = 1e-14 * c.amax().max(f64::MIN_POSITIVE);
        let x = c.map(|v| if v >= top - tie { 1.0 } else { 0.0 });
        return Ok(certify(p, x, 0));
    }

    let max_iter = 10 * n + 50;
    if let Some((x, it)) = active_set(&q, &c, start.clone(), max_iter) {
        let sol = certify(p, x, it);
        if certified(&sol) {
            return Ok(sol);
        }
    }

    let cap = 50 * n * n;
    let (x_pg, it_pg) = projected_gradient(&q, &c, start, lipschitz, cap.max(1000));
    let mut best = certify(p, x_pg.clone(), it_pg);
    if let Some((x, it)) = active_set(&q, &c, x_pg, max_iter) {
        let polished = certify(p, x, it_pg + it);
        if polished.stationarity.max(polished.slackness) < best.stationarity.max(best.slackness) {
            best = polished;
        }
    }
    if certified(&best) {
        Ok(best)
    } else {
        Err(Error::NonConvergence {
            iterations: best.iterations,
            residual: best.stationarity.max(best.slackness),
        })
    }
}

pub fn solve_mvo(p: &MvoProblem) -> Result<Weights> {
    solve_mvo_certified(p).map(|s| s.weights)
}

/// Long-only minimum-variance weights.
pub fn min_vol_weights(cov: &SymMatrix, gamma: f64) -> Result<Weights> {
    solve_mvo(&MvoProblem::new(DVector::zeros(cov.dim()), cov.clone(), gamma, 0.0)?)
}
