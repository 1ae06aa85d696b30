use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{check_batch, GradientOracle};
use crate::error::Result;
use crate::krylov::LinearSystem;
use crate::rng::{stream_rng, Stream};
use crate::smallmat::{ColMatrix, SymMatrix};
use crate::vecops;

/// How the eigenvalues of `A` are spread over `[1, cond]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Spectrum {
    #[default]
    Log,
    Linear,
}

impl Spectrum {
    pub fn eigenvalues(&self, dim: usize, cond: f64) -> Vec<f64> {
        if dim == 1 {
            return vec![1.0];
        }
        (0..dim)
            .map(|i| {
                let t = i as f64 / (dim - 1) as f64;
                match self {
                    Spectrum::Log => cond.powf(t),
                    Spectrum::Linear => 1.0 + (cond - 1.0) * t,
                }
            })
            .collect()
    }
}

/// `f(x) = (1/T) Σ (½xᵀAx − b_iᵀx)` where `b_i = b + σ ξ_i` and the `ξ_i`
/// are centred so that `(1/T) Σ b_i = b`.
#[derive(Debug, Clone)]
pub struct QuadraticOracle {
    a: SymMatrix,
    b: Vec<f64>,
    /// `σ ξ_i`, row-major `T x d`; empty when noise-free.
    shifts: Vec<f64>,
    samples: usize,
    eigenvalues: Vec<f64>,
}

impl QuadraticOracle {
    /// Random rotation of a prescribed spectrum; `b ~ N(0, I)`.
    pub fn generate(
        dim: usize,
        cond: f64,
        spectrum: Spectrum,
        samples: usize,
        noise_sigma: f64,
        seed: u64,
    ) -> Result<(Self, LinearSystem)> {
        let mut rng = stream_rng(seed, Stream::Data);
        let q = random_orthogonal(dim, &mut rng);
        let eigenvalues = spectrum.eigenvalues(dim, cond);
        let a = SymMatrix::from_upper(dim, |i, j| {
            (0..dim)
                .map(|k| q.get(i, k) * eigenvalues[k] * q.get(j, k))
                .sum()
        });
        let b: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let oracle = Self::with_noise(a, b, eigenvalues, samples, noise_sigma, &mut rng);
        let system = LinearSystem::new(oracle.a.clone(), oracle.b.clone())?;
        Ok((oracle, system))
    }

    /// Deterministic quadratic from an explicit `(A, b)`.
    pub fn from_parts(a: SymMatrix, b: Vec<f64>) -> Result<Self> {
        let eig = crate::smallmat::sym_eig(&a)?;
        Ok(QuadraticOracle {
            a,
            b,
            shifts: Vec::new(),
            samples: 1,
            eigenvalues: eig.values,
        })
    }

    fn with_noise(
        a: SymMatrix,
        b: Vec<f64>,
        eigenvalues: Vec<f64>,
        samples: usize,
        noise_sigma: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let dim = b.len();
        let shifts = if noise_sigma > 0.0 && samples > 1 {
            let scale = noise_sigma / (dim as f64).sqrt();
            let mut s: Vec<f64> = (0..samples * dim)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            center_rows(&mut s, samples, dim);
            s
        } else {
            Vec::new()
        };
        QuadraticOracle {
            a,
            b,
            shifts,
            samples,
            eigenvalues,
        }
    }

    pub fn a(&self) -> &SymMatrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Eigenvalues of `A`, in the order they were generated.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    fn shift(&self, i: usize) -> Option<&[f64]> {
        if self.shifts.is_empty() {
            None
        } else {
            let d = self.b.len();
            Some(&self.shifts[i * d..(i + 1) * d])
        }
    }
}

/// Subtracts the column means of a row-major `rows x cols` block.
pub(super) fn center_rows(data: &mut [f64], rows: usize, cols: usize) {
    let mut mean = vec![0.0; cols];
    for row in data.chunks(cols) {
        vecops::axpy(1.0 / rows as f64, row, &mut mean);
    }
    for row in data.chunks_mut(cols) {
        vecops::axpy(-1.0, &mean, row);
    }
}

/// Orthonormalised Gaussian matrix (modified Gram–Schmidt, two passes).
pub(super) fn random_orthogonal(dim: usize, rng: &mut impl Rng) -> ColMatrix {
    let mut q = ColMatrix::from_fn(dim, dim, |_, _| rng.sample(StandardNormal));
    for j in 0..dim {
        for _ in 0..2 {
            for k in 0..j {
                let proj = vecops::dot(q.col(k), q.col(j));
                let qk = q.col(k).to_vec();
                vecops::axpy(-proj, &qk, q.col_mut(j));
            }
        }
        let n = vecops::norm(q.col(j));
        q.col_mut(j).iter_mut().for_each(|v| *v /= n);
    }
    q
}

impl GradientOracle for QuadraticOracle {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn num_samples(&self) -> usize {
        self.samples
    }

    fn loss(&self, x: &[f64]) -> f64 {
        let ax = self.a.mul_vec(x).expect("dimension");
        0.5 * vecops::dot(x, &ax) - vecops::dot(&self.b, x)
    }

    fn add_sample_gradient(&self, x: &[f64], i: usize, weight: f64, out: &mut [f64]) {
        let ax = self.a.mul_vec(x).expect("dimension");
        vecops::axpy(weight, &ax, out);
        vecops::axpy(-weight, &self.b, out);
        if let Some(s) = self.shift(i) {
            vecops::axpy(-weight, s, out);
        }
    }

    fn minibatch_gradient(&self, x: &[f64], batch: &[usize]) -> Result<Vec<f64>> {
        check_batch(batch, self.samples)?;
        let mut g = vecops::sub(&self.a.mul_vec(x)?, &self.b);
        if !self.shifts.is_empty() {
            let w = 1.0 / batch.len() as f64;
            for &i in batch {
                vecops::axpy(-w, self.shift(i).expect("noisy"), &mut g);
            }
        }
        Ok(g)
    }

    fn full_gradient(&self, x: &[f64]) -> Vec<f64> {
        vecops::sub(&self.a.mul_vec(x).expect("dimension"), &self.b)
    }
}
