use rand::Rng;
use rand_distr::StandardNormal;

use super::csv_data::Dataset;
use super::quadratic::center_rows;
use super::GradientOracle;
use crate::rng::{stream_rng, Stream};
use crate::vecops;

/// `log(1 + e^z)` without overflow.
pub(super) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub(super) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ℓ2-regularised binary logistic regression with labels in `{-1, +1}`:
/// `f_i(x) = log(1 + exp(-y_i a_iᵀx)) + (l2/2)‖x‖² + σ ξ_iᵀx`.
///
/// The optional perturbations `σ ξ_i` are centred over the samples, so they
/// change every per-sample gradient but not the full objective.
#[derive(Debug, Clone)]
pub struct LogisticOracle {
    features: Vec<f64>,
    labels: Vec<f64>,
    dim: usize,
    l2: f64,
    shifts: Vec<f64>,
}

impl LogisticOracle {
    /// Two Gaussian blobs with unit covariance centred at `±(separation/2) u`
    /// for a random unit vector `u`; labels alternate so classes are balanced.
    pub fn synthetic(
        samples: usize,
        dim: usize,
        separation: f64,
        l2: f64,
        noise_sigma: f64,
        seed: u64,
    ) -> Self {
        let mut rng = stream_rng(seed, Stream::Data);
        let mut u: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = vecops::norm(&u);
        u.iter_mut().for_each(|v| *v /= n);
        let mut features = Vec::with_capacity(samples * dim);
        let mut labels = Vec::with_capacity(samples);
        for i in 0..samples {
            let y = if i % 2 == 0 { 1.0 } else { -1.0 };
            for &uj in &u {
                let z: f64 = rng.sample(StandardNormal);
                features.push(y * 0.5 * separation * uj + z);
            }
            labels.push(y);
        }
        let mut oracle = LogisticOracle {
            features,
            labels,
            dim,
            l2,
            shifts: Vec::new(),
        };
        if noise_sigma > 0.0 && samples > 1 {
            let scale = noise_sigma / (dim as f64).sqrt();
            let mut s: Vec<f64> = (0..samples * dim)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            center_rows(&mut s, samples, dim);
            oracle.shifts = s;
        }
        oracle
    }

    pub fn from_dataset(data: &Dataset, l2: f64) -> Self {
        LogisticOracle {
            features: data.features.clone(),
            labels: data.labels.clone(),
            dim: data.dim,
            l2,
            shifts: Vec::new(),
        }
    }

    pub fn l2(&self) -> f64 {
        self.l2
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }
}

impl GradientOracle for LogisticOracle {
    fn dim(&self) -> usize {
        self.dim
    }

    fn num_samples(&self) -> usize {
        self.labels.len()
    }

    fn loss(&self, x: &[f64]) -> f64 {
        let t = self.labels.len();
        let data: f64 = (0..t)
            .map(|i| softplus(-self.labels[i] * vecops::dot(self.row(i), x)))
            .sum::<f64>()
            / t as f64;
        data + 0.5 * self.l2 * vecops::norm_sq(x)
    }

    fn add_sample_gradient(&self, x: &[f64], i: usize, weight: f64, out: &mut [f64]) {
        let y = self.labels[i];
        let a = self.row(i);
        let coeff = -y * sigmoid(-y * vecops::dot(a, x));
        vecops::axpy(weight * coeff, a, out);
        vecops::axpy(weight * self.l2, x, out);
        if !self.shifts.is_empty() {
            vecops::axpy(weight, &self.shifts[i * self.dim..(i + 1) * self.dim], out);
        }
    }
}
