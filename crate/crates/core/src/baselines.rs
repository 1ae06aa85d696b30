//! First-order reference optimizers: SGD, SGD with momentum, and Adam.
//!
//! Besides serving as comparison baselines they plug into the mixers as the
//! fallback step (descent check, alternating iteration) and as the
//! preconditioner of the mixing step in pAdaSAM.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecops;

/// An optimizer that maps `(x, g)` to a new point, possibly updating its
/// own internal state.
pub trait BaselineOptimizer: Send {
    fn step(&mut self, x: &[f64], g: &[f64]) -> Result<Vec<f64>>;

    fn name(&self) -> &'static str;
}

fn check_inputs(x: &[f64], g: &[f64]) -> Result<()> {
    if x.len() != g.len() {
        return Err(Error::DimensionMismatch {
            op: "optimizer step",
            expected: x.len(),
            got: g.len(),
        });
    }
    if !vecops::all_finite(x) || !vecops::all_finite(g) {
        return Err(Error::NonFinite("optimizer input"));
    }
    Ok(())
}

/// Gradient with `weight_decay * x` added, as the coupled L2 variant.
fn decayed(x: &[f64], g: &[f64], weight_decay: f64) -> Vec<f64> {
    if weight_decay == 0.0 {
        return g.to_vec();
    }
    g.iter()
        .zip(x)
        .map(|(gi, xi)| gi + weight_decay * xi)
        .collect()
}

#[derive(Debug, Clone)]
pub struct Sgd {
    pub lr: f64,
}

impl Sgd {
    pub fn new(lr: f64) -> Self {
        Sgd { lr }
    }
}

impl BaselineOptimizer for Sgd {
    fn step(&mut self, x: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        check_inputs(x, g)?;
        Ok(x.iter().zip(g).map(|(xi, gi)| xi - self.lr * gi).collect())
    }

    fn name(&self) -> &'static str {
        "sgd"
    }
}

/// Heavy-ball SGD: `v = μ v + g`, `x = x - lr v`.
#[derive(Debug, Clone)]
pub struct Sgdm {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    velocity: Option<Vec<f64>>,
}

impl Sgdm {
    pub fn new(lr: f64, momentum: f64, weight_decay: f64) -> Self {
        Sgdm {
            lr,
            momentum,
            weight_decay,
            velocity: None,
        }
    }
}

impl BaselineOptimizer for Sgdm {
    fn step(&mut self, x: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        check_inputs(x, g)?;
        let g = decayed(x, g, self.weight_decay);
        let v = match self.velocity.as_mut() {
            Some(v) if v.len() == g.len() => {
                for (vi, gi) in v.iter_mut().zip(&g) {
                    *vi = self.momentum * *vi + gi;
                }
                v
            }
            _ => self.velocity.insert(g),
        };
        Ok(x.iter()
            .zip(v.iter())
            .map(|(xi, vi)| xi - self.lr * vi)
            .collect())
    }

    fn name(&self) -> &'static str {
        "sgdm"
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(lr: f64, beta1: f64, beta2: f64, eps: f64, weight_decay: f64) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            eps,
            weight_decay,
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        }
    }

    pub fn with_lr(lr: f64) -> Self {
        Self::new(lr, 0.9, 0.999, 1e-8, 0.0)
    }
}

impl BaselineOptimizer for Adam {
    fn step(&mut self, x: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        check_inputs(x, g)?;
        let g = decayed(x, g, self.weight_decay);
        if self.m.len() != g.len() {
            self.m = vec![0.0; g.len()];
            self.v = vec![0.0; g.len()];
            self.t = 0;
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        let mut out = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g[i] * g[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            out.push(x[i] - self.lr * m_hat / (v_hat.sqrt() + self.eps));
        }
        Ok(out)
    }

    fn name(&self) -> &'static str {
        "adam"
    }
}

/// Fixed diagonal preconditioner: `x - M⁻¹ g` with `M = diag(m)`.
#[derive(Debug, Clone)]
pub struct DiagonalPreconditioner {
    inv_diag: Vec<f64>,
}

impl DiagonalPreconditioner {
    pub fn new(diag: &[f64]) -> Result<Self> {
        if diag.iter().any(|&d| d == 0.0 || !d.is_finite()) {
            return Err(Error::Singular("diagonal preconditioner"));
        }
        Ok(DiagonalPreconditioner {
            inv_diag: diag.iter().map(|d| 1.0 / d).collect(),
        })
    }
}

impl BaselineOptimizer for DiagonalPreconditioner {
    fn step(&mut self, x: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        check_inputs(x, g)?;
        if x.len() != self.inv_diag.len() {
            return Err(Error::DimensionMismatch {
                op: "DiagonalPreconditioner::step",
                expected: self.inv_diag.len(),
                got: x.len(),
            });
        }
        Ok(x.iter()
            .zip(g)
            .zip(&self.inv_diag)
            .map(|((xi, gi), di)| xi - di * gi)
            .collect())
    }

    fn name(&self) -> &'static str {
        "diag"
    }
}

fn default_momentum() -> f64 {
    0.9
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_adam_eps() -> f64 {
    1e-8
}

/// Declarative description of a baseline, as it appears in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaselineSpec {
    Sgd {
        lr: f64,
    },
    Sgdm {
        lr: f64,
        #[serde(default = "default_momentum")]
        momentum: f64,
        #[serde(default)]
        weight_decay: f64,
    },
    Adam {
        lr: f64,
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_adam_eps")]
        eps: f64,
        #[serde(default)]
        weight_decay: f64,
    },
}

impl BaselineSpec {
    pub fn build(&self) -> Box<dyn BaselineOptimizer> {
        match *self {
            BaselineSpec::Sgd { lr } => Box::new(Sgd::new(lr)),
            BaselineSpec::Sgdm {
                lr,
                momentum,
                weight_decay,
            } => Box::new(Sgdm::new(lr, momentum, weight_decay)),
            BaselineSpec::Adam {
                lr,
                beta1,
                beta2,
                eps,
                weight_decay,
            } => Box::new(Adam::new(lr, beta1, beta2, eps, weight_decay)),
        }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        let lr = match *self {
            BaselineSpec::Sgd { lr } => lr,
            BaselineSpec::Sgdm { lr, momentum, .. } => {
                if !(0.0..1.0).contains(&momentum) {
                    return Err(Error::config(
                        format!("{path}.momentum"),
                        "must lie in [0, 1)",
                    ));
                }
                lr
            }
            BaselineSpec::Adam {
                lr,
                beta1,
                beta2,
                eps,
                ..
            } => {
                if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
                    return Err(Error::config(
                        format!("{path}.beta1"),
                        "betas must lie in [0, 1)",
                    ));
                }
                if eps <= 0.0 {
                    return Err(Error::config(format!("{path}.eps"), "must be positive"));
                }
                lr
            }
        };
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::config(format!("{path}.lr"), "must be positive"));
        }
        Ok(())
    }

    pub fn label(&self) -> &'static str {
        match self {
            BaselineSpec::Sgd { .. } => "sgd",
            BaselineSpec::Sgdm { .. } => "sgdm",
            BaselineSpec::Adam { .. } => "adam",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_single_step() {
        let x = Sgd::new(0.1).step(&[1.0], &[2.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn sgdm_without_momentum_is_sgd() {
        let mut a = Sgd::new(0.05);
        let mut b = Sgdm::new(0.05, 0.0, 0.0);
        let mut xa = vec![1.0, -2.0, 0.5];
        let mut xb = xa.clone();
        for k in 0..5 {
            let g: Vec<f64> = xa.iter().map(|v| v * (k as f64 + 1.0) - 0.3).collect();
            let gb: Vec<f64> = xb.iter().map(|v| v * (k as f64 + 1.0) - 0.3).collect();
            xa = a.step(&xa, &g).unwrap();
            xb = b.step(&xb, &gb).unwrap();
            assert_eq!(xa, xb);
        }
    }

    #[test]
    fn sgdm_accumulates_velocity() {
        let mut o = Sgdm::new(1.0, 0.5, 0.0);
        let x = o.step(&[0.0], &[1.0]).unwrap();
        assert_eq!(x, vec![-1.0]);
        // v = 0.5 * 1 + 1
        let x = o.step(&x, &[1.0]).unwrap();
        assert_eq!(x, vec![-2.5]);
    }

    #[test]
    fn weight_decay_adds_to_gradient() {
        let mut o = Sgdm::new(0.1, 0.0, 0.5);
        let x = o.step(&[2.0], &[0.0]).unwrap();
        assert!((x[0] - 1.9).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_is_sign_like() {
        // After bias correction m̂ = g and v̂ = g², so the update is lr·c/(|c| + eps).
        let (lr, eps) = (0.01, 1e-8);
        for c in [3.0, -0.5, 1e-3] {
            let mut o = Adam::new(lr, 0.9, 0.999, eps, 0.0);
            let x = o.step(&[1.0, 2.0], &[c, c]).unwrap();
            let expected = lr * c / (f64::abs(c) + eps);
            assert!((1.0 - x[0] - expected).abs() < 1e-15);
            assert!((2.0 - x[1] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            Sgd::new(0.1).step(&[f64::NAN], &[1.0]),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            Adam::with_lr(0.1).step(&[0.0], &[f64::INFINITY]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn diagonal_preconditioner_scales() {
        let mut p = DiagonalPreconditioner::new(&[2.0, 4.0]).unwrap();
        assert_eq!(p.step(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), vec![-0.5, -0.25]);
        assert!(DiagonalPreconditioner::new(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn spec_parses_with_defaults() {
        let spec: BaselineSpec = toml::from_str("kind = \"adam\"\nlr = 0.001").unwrap();
        assert_eq!(
            spec,
            BaselineSpec::Adam {
                lr: 0.001,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
                weight_decay: 0.0
            }
        );
        assert!(BaselineSpec::Sgd { lr: -1.0 }
            .validate("optimizer")
            .is_err());
    }
}
