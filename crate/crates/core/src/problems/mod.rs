//! Gradient oracles for finite-sum objectives `f(x) = (1/T) Σ f_i(x)`.
//!
//! Every problem implements [`GradientOracle`]. Mini-batch gradients are the
//! arithmetic mean of per-sample gradients over the batch; one per-sample
//! gradient evaluation is one SFO call.

mod csv_data;
mod logistic;
mod mlp;
mod quadratic;
mod rosenbrock;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use csv_data::{load_csv, Dataset};
pub use logistic::LogisticOracle;
pub use mlp::MlpOracle;
pub use quadratic::{QuadraticOracle, Spectrum};
pub use rosenbrock::Rosenbrock;

use crate::error::{Error, Result};
use crate::krylov::LinearSystem;

/// A finite-sum objective with per-sample gradients.
pub trait GradientOracle: Send + Sync {
    fn dim(&self) -> usize;

    /// Number of terms `T` in the finite sum.
    fn num_samples(&self) -> usize;

    /// Full objective value `f(x)`.
    fn loss(&self, x: &[f64]) -> f64;

    /// `out += weight * ∇f_i(x)`.
    fn add_sample_gradient(&self, x: &[f64], i: usize, weight: f64, out: &mut [f64]);

    fn sample_gradient(&self, x: &[f64], i: usize) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.add_sample_gradient(x, i, 1.0, &mut g);
        g
    }

    /// Mean of the per-sample gradients over `batch`.
    fn minibatch_gradient(&self, x: &[f64], batch: &[usize]) -> Result<Vec<f64>> {
        check_batch(batch, self.num_samples())?;
        let w = 1.0 / batch.len() as f64;
        let mut g = vec![0.0; self.dim()];
        for &i in batch {
            self.add_sample_gradient(x, i, w, &mut g);
        }
        Ok(g)
    }

    fn full_gradient(&self, x: &[f64]) -> Vec<f64> {
        let t = self.num_samples();
        let w = 1.0 / t as f64;
        let mut g = vec![0.0; self.dim()];
        for i in 0..t {
            self.add_sample_gradient(x, i, w, &mut g);
        }
        g
    }
}

pub(crate) fn check_batch(batch: &[usize], samples: usize) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if let Some(&index) = batch.iter().find(|&&i| i >= samples) {
        return Err(Error::SampleIndex { index, samples });
    }
    Ok(())
}

fn default_samples() -> usize {
    1
}
fn default_separation() -> f64 {
    1.0
}
fn default_l2() -> f64 {
    1e-3
}
fn default_input_dim() -> usize {
    2
}

/// Declarative problem description used by experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// `½xᵀAx − bᵀx` with `A = QΛQᵀ`, `Λ` spread over `[1, cond]`.
    Quadratic {
        dim: usize,
        cond: f64,
        #[serde(default)]
        spectrum: Spectrum,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default)]
        noise_sigma: f64,
    },
    /// ℓ2-regularised logistic regression on two Gaussian blobs.
    Logistic {
        samples: usize,
        dim: usize,
        #[serde(default = "default_separation")]
        separation: f64,
        #[serde(default = "default_l2")]
        l2: f64,
        #[serde(default)]
        noise_sigma: f64,
    },
    Rosenbrock {
        dim: usize,
    },
    /// One-hidden-layer tanh network on two-class spiral data.
    Mlp {
        hidden: usize,
        samples: usize,
        #[serde(default = "default_input_dim")]
        dim: usize,
    },
    /// Logistic regression on a user-supplied CSV file.
    Csv {
        path: PathBuf,
        #[serde(default)]
        label_column: usize,
        #[serde(default)]
        header: bool,
        #[serde(default = "default_l2")]
        l2: f64,
    },
}

/// A constructed problem. Quadratics also carry the equivalent linear system.
#[derive(Clone)]
pub struct Problem {
    pub oracle: Arc<dyn GradientOracle>,
    pub system: Option<LinearSystem>,
    /// Extreme Hessian eigenvalues when known analytically.
    pub curvature: Option<(f64, f64)>,
}

impl ProblemSpec {
    pub fn validate(&self, path: &str) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::config(format!("{path}.{field}"), msg));
        match self {
            ProblemSpec::Quadratic {
                dim,
                cond,
                samples,
                noise_sigma,
                ..
            } => {
                if *dim == 0 {
                    return bad("dim", "must be positive");
                }
                if !(*cond >= 1.0 && cond.is_finite()) {
                    return bad("cond", "must be at least 1");
                }
                if *samples == 0 {
                    return bad("samples", "must be positive");
                }
                if !(*noise_sigma >= 0.0) {
                    return bad("noise_sigma", "must be non-negative");
                }
            }
            ProblemSpec::Logistic {
                samples,
                dim,
                l2,
                noise_sigma,
                ..
            } => {
                if *samples == 0 {
                    return bad("samples", "must be positive");
                }
                if *dim == 0 {
                    return bad("dim", "must be positive");
                }
                if !(*l2 >= 0.0) {
                    return bad("l2", "must be non-negative");
                }
                if !(*noise_sigma >= 0.0) {
                    return bad("noise_sigma", "must be non-negative");
                }
            }
            ProblemSpec::Rosenbrock { dim } => {
                if *dim < 2 {
                    return bad("dim", "must be at least 2");
                }
            }
            ProblemSpec::Mlp {
                hidden,
                samples,
                dim,
            } => {
                if *hidden == 0 {
                    return bad("hidden", "must be positive");
                }
                if *samples < 2 {
                    return bad("samples", "must be at least 2");
                }
                if *dim < 2 {
                    return bad("dim", "must be at least 2");
                }
            }
            ProblemSpec::Csv { l2, .. } => {
                if !(*l2 >= 0.0) {
                    return bad("l2", "must be non-negative");
                }
            }
        }
        Ok(())
    }

    pub fn build(&self, seed: u64) -> Result<Problem> {
        self.validate("problem")?;
        Ok(match self {
            ProblemSpec::Quadratic {
                dim,
                cond,
                spectrum,
                samples,
                noise_sigma,
            } => {
                let (q, sys) = QuadraticOracle::generate(
                    *dim,
                    *cond,
                    *spectrum,
                    *samples,
                    *noise_sigma,
                    seed,
                )?;
                Problem {
                    curvature: Some((1.0, *cond)),
                    oracle: Arc::new(q),
                    system: Some(sys),
                }
            }
            ProblemSpec::Logistic {
                samples,
                dim,
                separation,
                l2,
                noise_sigma,
            } => Problem {
                oracle: Arc::new(LogisticOracle::synthetic(
                    *samples,
                    *dim,
                    *separation,
                    *l2,
                    *noise_sigma,
                    seed,
                )),
                system: None,
                curvature: None,
            },
            ProblemSpec::Rosenbrock { dim } => Problem {
                oracle: Arc::new(Rosenbrock::new(*dim)),
                system: None,
                curvature: None,
            },
            ProblemSpec::Mlp {
                hidden,
                samples,
                dim,
            } => Problem {
                oracle: Arc::new(MlpOracle::spiral(*hidden, *samples, *dim, seed)),
                system: None,
                curvature: None,
            },
            ProblemSpec::Csv {
                path,
                label_column,
                header,
                l2,
            } => {
                let data = load_csv(path, *label_column, *header)?;
                Problem {
                    oracle: Arc::new(LogisticOracle::from_dataset(&data, *l2)),
                    system: None,
                    curvature: None,
                }
            }
        })
    }

    pub fn num_samples(&self) -> Option<usize> {
        match self {
            ProblemSpec::Quadratic { samples, .. }
            | ProblemSpec::Logistic { samples, .. }
            | ProblemSpec::Mlp { samples, .. } => Some(*samples),
            ProblemSpec::Rosenbrock { .. } => Some(1),
            ProblemSpec::Csv { .. } => None,
        }
    }
}
