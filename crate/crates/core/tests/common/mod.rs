#![allow(dead_code)]

use amopt_core::smallmat::{ColMatrix, SymMatrix};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn random_col(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ColMatrix {
    ColMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn to_na(a: &ColMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(a.rows(), a.cols(), |i, j| a.get(i, j))
}

pub fn sym_to_na(a: &SymMatrix) -> DMatrix<f64> {
    to_na(a.as_dense())
}

/// `(X, R)` with `R = −A X` for a random SPD `A` (as on a quadratic).
pub fn quadratic_history(rng: &mut ChaCha8Rng, d: usize, m: usize) -> (ColMatrix, ColMatrix) {
    let b = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let a = &b * b.transpose() + DMatrix::identity(d, d);
    let x = random_col(rng, d, m);
    let r = -(&a * to_na(&x));
    (x, ColMatrix::from_fn(d, m, |i, j| r[(i, j)]))
}

/// Largest real part among the eigenvalues of a general square matrix.
pub fn max_real_eig(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn sym_min_eig(m: &DMatrix<f64>) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    s.symmetric_eigen().eigenvalues.min()
}

pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            xp[i] = x[i] + h;
            let up = f(&xp);
            xp[i] = x[i] - h;
            let down = f(&xp);
            xp[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}
