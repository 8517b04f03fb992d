#![allow(dead_code)]

use gwb_core::{DMatrix, DVector, SymMatrix, ViewSet, ViewTarget};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn normal_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn normal_vector<R: Rng>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// `A Aᵀ/n + floor·I` with Gaussian `A`.
pub fn random_spd<R: Rng>(n: usize, floor: f64, rng: &mut R) -> SymMatrix {
    let a = normal_matrix(n, n, rng);
    let m = &a * a.transpose() / n as f64 + DMatrix::identity(n, n) * floor;
    SymMatrix::new((&m + m.transpose()) * 0.5).unwrap()
}

/// PSD matrix of the given rank.
pub fn random_psd_rank<R: Rng>(n: usize, rank: usize, rng: &mut R) -> SymMatrix {
    let a = normal_matrix(n, rank, rng);
    let m = &a * a.transpose();
    SymMatrix::new((&m + m.transpose()) * 0.5).unwrap()
}

pub fn random_views<R: Rng>(n_assets: usize, n_views: usize, rng: &mut R) -> ViewSet {
    ViewSet::new(
        normal_matrix(n_views, n_assets, rng),
        normal_vector(n_views, rng),
        random_spd(n_views, 0.1, rng),
        ViewTarget::ReturnSpace,
        0.5,
    )
    .unwrap()
}

pub fn identity_views<R: Rng>(n: usize, rng: &mut R) -> ViewSet {
    ViewSet::new(
        DMatrix::identity(n, n),
        normal_vector(n, rng),
        random_spd(n, 0.1, rng),
        ViewTarget::ReturnSpace,
        0.5,
    )
    .unwrap()
}

pub fn frob_rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
}
