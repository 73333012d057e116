#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

/// Random `J × P` Jacobian with entries `N(0, 1)`.
pub fn random_g<R: Rng>(r: &mut R, j: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(j, p, |_, _| r.sample(StandardNormal))
}

/// Random positive definite matrix `AA'/J + 0.2·I`.
pub fn random_pd<R: Rng>(r: &mut R, j: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(j, j, |_, _| r.sample::<f64, _>(StandardNormal));
    (&a * a.transpose()) / j as f64 + DMatrix::identity(j, j) * 0.2
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}
