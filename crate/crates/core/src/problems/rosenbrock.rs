use super::GradientOracle;

/// Chained Rosenbrock `Σ_{i<d−1} 100(x_{i+1} − x_i²)² + (1 − x_i)²`, `T = 1`.
#[derive(Debug, Clone, Copy)]
pub struct Rosenbrock {
    dim: usize,
}

impl Rosenbrock {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 2, "rosenbrock needs d >= 2");
        Rosenbrock { dim }
    }
}

impl GradientOracle for Rosenbrock {
    fn dim(&self) -> usize {
        self.dim
    }

    fn num_samples(&self) -> usize {
        1
    }

    fn loss(&self, x: &[f64]) -> f64 {
        x.windows(2)
            .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
            .sum()
    }

    fn add_sample_gradient(&self, x: &[f64], _i: usize, weight: f64, out: &mut [f64]) {
        for i in 0..self.dim - 1 {
            let t = x[i + 1] - x[i] * x[i];
            out[i] += weight * (-400.0 * x[i] * t - 2.0 * (1.0 - x[i]));
            out[i + 1] += weight * 200.0 * t;
        }
    }
}
