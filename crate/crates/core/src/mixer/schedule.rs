use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Learning-rate schedule for the damping `α_k` and mixing `β_k` parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    #[default]
    Constant,
    /// Multiplies both `α` and `β` by `factor` at each milestone iteration.
    StepDecay { milestones: Vec<usize>, factor: f64 },
    /// `β_k = scale (k + 1)^{-r}` and `α_k = min(α_0, β_k^{1/2})`.
    Polynomial { r: f64, scale: f64 },
}

impl ScheduleSpec {
    /// `(α_k, β_k)` at iteration `k`.
    pub fn rates(&self, k: usize, alpha0: f64, beta0: f64) -> (f64, f64) {
        match self {
            ScheduleSpec::Constant => (alpha0, beta0),
            ScheduleSpec::StepDecay { milestones, factor } => {
                let passed = milestones.iter().filter(|&&m| m <= k).count();
                let f = factor.powi(passed as i32);
                (alpha0 * f, beta0 * f)
            }
            ScheduleSpec::Polynomial { r, scale } => {
                let beta = scale * ((k + 1) as f64).powf(-r);
                (alpha0.min(beta.sqrt()), beta)
            }
        }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        match self {
            ScheduleSpec::Constant => Ok(()),
            ScheduleSpec::StepDecay { factor, .. } => {
                if *factor > 0.0 && *factor <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::config(
                        format!("{path}.factor"),
                        "must lie in (0, 1]",
                    ))
                }
            }
            ScheduleSpec::Polynomial { r, scale } => {
                if !(*r > 0.5 && *r < 1.0) {
                    return Err(Error::config(format!("{path}.r"), "must lie in (0.5, 1)"));
                }
                if !(*scale > 0.0 && scale.is_finite()) {
                    return Err(Error::config(format!("{path}.scale"), "must be positive"));
                }
                Ok(())
            }
        }
    }
}
