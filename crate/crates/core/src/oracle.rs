//! Brute-force minimizer of the barycenter Lagrangian, used to check the
//! closed-form update on small problems.
//!
//! The covariance is parametrized by a lower-triangular factor, `C = LLᵀ`,
//! and the Lagrangian is minimized by L-BFGS with analytic gradients from
//! several seeded starting points.

use alloc::boxed::Box;
use alloc::collections::VecDeque;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{self, sym_sqrt, SymMatrix};
use crate::views::ViewSet;

/// Best point found by [`gwb_numeric_oracle`].
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub m: DVector<f64>,
    pub cov: SymMatrix,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

const STARTS: usize = 6;
const MEMORY: usize = 12;
const GRAD_TOL: f64 = 1e-10;
/// Gradient norm, relative to `1 + |L|`, accepted once the objective stops
/// moving at round-off level.
const STALL_TOL: f64 = 1e-6;
/// Consecutive round-off-sized decreases before a start is abandoned.
const STALL_STEPS: usize = 8;

struct Problem<'a> {
    mu: &'a DVector<f64>,
    prior_root: SymMatrix,
    prior_trace: f64,
    pick: &'a DMatrix<f64>,
    nu: &'a DVector<f64>,
    view_root: SymMatrix,
    view_trace: f64,
    lambda: f64,
    n: usize,
}

/// `tr((R C R)^{1/2})` and `R (R C R)^{-1/2} R`.
fn bures_term(root: &SymMatrix, c: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
    let inner = SymMatrix::symmetrized(root.as_matrix() * c * root.as_matrix());
    let spec = inner.spectrum();
    let floor = 1e-14 * spec.scale().max(f64::MIN_POSITIVE);
    let trace = spec.values.iter().map(|v| linalg::sqrt(v.max(0.0))).sum();
    let inv = spec.rebuild(|v| if v > floor { 1.0 / linalg::sqrt(v) } else { 0.0 });
    let transport = root.as_matrix() * inv.as_matrix() * root.as_matrix();
    (trace, transport)
}

impl Problem<'_> {
    fn dim(&self) -> usize {
        self.n + self.n * (self.n + 1) / 2
    }

    fn unpack(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.n;
        let m = x.rows(0, n).into_owned();
        let mut l = DMatrix::zeros(n, n);
        let mut k = n;
        for i in 0..n {
            for j in 0..=i {
                l[(i, j)] = x[k];
                k += 1;
            }
        }
        (m, l)
    }

    fn pack(&self, m: &DVector<f64>, l: &DMatrix<f64>) -> DVector<f64> {
        let n = self.n;
        let mut x = DVector::zeros(self.dim());
        x.rows_mut(0, n).copy_from(m);
        let mut k = n;
        for i in 0..n {
            for j in 0..=i {
                x[k] = l[(i, j)];
                k += 1;
            }
        }
        x
    }

    fn eval(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let (m, l) = self.unpack(x);
        let c = &l * l.transpose();
        let dm = &m - self.mu;
        let (tp, transport_p) = bures_term(&self.prior_root, &c);
        let mut value = dm.norm_squared() + c.trace() + self.prior_trace - 2.0 * tp;
        let mut gm = dm * 2.0;
        let mut gc = DMatrix::identity(self.n, self.n) - transport_p;
        if self.lambda > 0.0 {
            let dv = self.pick * &m - self.nu;
            let pc = self.pick * &c * self.pick.transpose();
            let (tv, transport_v) = bures_term(&self.view_root, &pc);
            value += self.lambda * (dv.norm_squared() + pc.trace() + self.view_trace - 2.0 * tv);
            gm += self.pick.transpose() * dv * (2.0 * self.lambda);
            let eye = DMatrix::identity(self.pick.nrows(), self.pick.nrows());
            gc += self.pick.transpose() * (eye - transport_v) * self.pick * self.lambda;
        }
        let gl = (&gc + gc.transpose()) * &l;
        (value, self.pack(&gm, &gl))
    }
}

struct Run {
    x: DVector<f64>,
    value: f64,
    grad_norm: f64,
    iterations: usize,
}

fn lbfgs(p: &Problem<'_>, mut x: DVector<f64>, budget: usize) -> Run {
    let (mut f, mut g) = p.eval(&x);
    let mut hist: VecDeque<(DVector<f64>, DVector<f64>, f64)> = VecDeque::with_capacity(MEMORY);
    let mut it = 0;
    let mut flat = 0;
    while it < budget && flat < STALL_STEPS {
        if g.norm() <= GRAD_TOL {
            break;
        }
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * s.dot(&q);
            q -= y * a;
            alphas.push(a);
        }
        if let Some((s, y, _)) = hist.back() {
            q *= s.dot(y) / y.norm_squared();
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * y.dot(&q);
            q += s * (a - b);
        }
        let mut dir = -q;
        let mut slope = g.dot(&dir);
        if !(slope < 0.0) {
            hist.clear();
            dir = -g.clone();
            slope = -g.norm_squared();
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &x + &dir * step;
            let (ft, gt) = p.eval(&trial);
            if ft.is_finite() && ft <= f + 1e-4 * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        it += 1;
        let Some((xn, fnew, gnew)) = accepted else {
            if hist.is_empty() {
                break;
            }
            hist.clear();
            continue;
        };
        let s = &xn - &x;
        let y = &gnew - &g;
        let sy = s.dot(&y);
        if sy > 1e-16 * s.norm() * y.norm() {
            if hist.len() == MEMORY {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        if f - fnew <= 4.0 * f64::EPSILON * f.abs().max(1.0) {
            flat += 1;
        } else {
            flat = 0;
        }
        x = xn;
        f = fnew;
        g = gnew;
    }
    Run {
        grad_norm: g.norm(),
        x,
        value: f,
        iterations: it,
    }
}

/// Numerically minimize `W2²(N(m, C), prior) + λ·W2²(P♯N(m, C), views)`.
///
/// `budget` bounds the iterations of each start. Returns `BudgetExhausted`,
/// carrying the best point, when no start reaches a stationary point.
pub fn gwb_numeric_oracle(
    mu_p: &DVector<f64>,
    cov_p: &SymMatrix,
    views: &ViewSet,
    lambda: f64,
    budget: usize,
    seed: u64,
) -> Result<OracleSolution> {
    if lambda < 0.0 {
        return Err(Error::NegativeLambda(lambda));
    }
    if !lambda.is_finite() {
        return Err(Error::OutOfRange {
            name: "lambda",
            value: lambda,
        });
    }
    let n = mu_p.len();
    if cov_p.dim() != n || views.n_assets() != n {
        return Err(Error::DimensionMismatch {
            context: "oracle inputs",
            expected: n,
            found: views.n_assets(),
        });
    }
    let problem = Problem {
        mu: mu_p,
        prior_root: sym_sqrt(cov_p)?,
        prior_trace: cov_p.trace(),
        pick: &views.pick,
        nu: &views.nu,
        view_root: sym_sqrt(&views.cov)?,
        view_trace: views.cov.trace(),
        lambda,
        n,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spread = linalg::sqrt(cov_p.trace().max(views.projected_cov().trace()) / n as f64).max(1e-3);
    let mut best: Option<Run> = None;
    let mut total = 0;
    for start in 0..STARTS {
        let mut m = mu_p.clone();
        let mut l = DMatrix::<f64>::identity(n, n) * spread;
        if start > 0 {
            for v in m.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += spread * z;
            }
            for i in 0..n {
                for j in 0..i {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    l[(i, j)] = 0.5 * spread * z;
                }
                let z: f64 = StandardNormal.sample(&mut rng);
                l[(i, i)] = spread * (0.5 + linalg::abs(z));
            }
        }
        let run = lbfgs(&problem, problem.pack(&m, &l), budget);
        total += run.iterations;
        let better = match &best {
            None => true,
            Some(b) => run.value < b.value,
        };
        if better {
            best = Some(run);
        }
    }
    let best = best.expect("at least one start");
    let (m, l) = problem.unpack(&best.x);
    let solution = OracleSolution {
        m,
        cov: SymMatrix::symmetrized(&l * l.transpose()),
        value: best.value,
        grad_norm: best.grad_norm,
        iterations: total,
    };
    if best.grad_norm > STALL_TOL * (1.0 + best.value.abs()) {
        return Err(Error::BudgetExhausted {
            best_value: solution.value,
            gradient_norm: solution.grad_norm,
            best: Box::new(solution),
        });
    }
    Ok(solution)
}
