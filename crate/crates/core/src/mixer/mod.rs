//! The stochastic Anderson mixing update family.
//!
//! One [`SamState`] carries an iterate, its step counter and the history
//! window. Each call to [`SamState::sam_step`] or [`SamState::psam_step`]
//! consumes the residual `r_k = −∇f_{S_k}(x_k)` at the current iterate and
//! moves to `x_{k+1}`:
//!
//! ```text
//! Γ_k     = (RᵀR + δ_k XᵀX)† Rᵀ r_k
//! x̄_k     = x_k − α_k X Γ_k                 (damped projection)
//! r̄_k     = r_k − α_k R Γ_k
//! x_{k+1} = x̄_k + β_k r̄_k                   (mixing; or optim(x̄_k, −r̄_k))
//! ```
//!
//! The regularization (`none`, Tikhonov, adaptive) and the positive
//! definiteness safeguard (descent check, explicit `λ_k` damping, or none)
//! are selected by [`MixerConfig`].

mod kernels;
mod schedule;

pub use kernels::{
    adaptive_delta, apply_h, assemble_dense_h, damp_alpha, normal_matrix, pd_lambda, solve_gamma,
    Penalty,
};
pub use schedule::ScheduleSpec;

use serde::{Deserialize, Serialize};

use crate::baselines::BaselineOptimizer;
use crate::error::{Error, Result};
use crate::history::HistoryBuffer;
use crate::smallmat::ColMatrix;
use crate::vecops;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegMode {
    None,
    Tikhonov {
        delta: f64,
    },
    Adaptive {
        #[serde(default = "default_c1")]
        c1: f64,
        #[serde(default)]
        c2: f64,
    },
}

fn default_c1() -> f64 {
    1e-2
}

impl Default for RegMode {
    fn default() -> Self {
        RegMode::Adaptive {
            c1: default_c1(),
            c2: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PdMode {
    /// Accept the step only if `Δxᵀr > 0`, otherwise take the fallback step.
    #[default]
    DescentCheck,
    /// Shrink `α_k` so that the symmetric part of `H_k` stays above `β_k μ`.
    EigenDamp,
    Off,
}

/// Hyperparameters of the SAM family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixerConfig {
    /// History length.
    pub m: usize,
    pub alpha: f64,
    pub beta: f64,
    pub reg: RegMode,
    pub eps: f64,
    /// Moving-average weight for the history; `0` disables averaging.
    pub gamma: f64,
    /// Mixing is applied every `period`-th step, the fallback otherwise.
    pub period: usize,
    pub mu: f64,
    pub pd_mode: PdMode,
    pub rank_rtol: f64,
    pub schedule: ScheduleSpec,
}

impl Default for MixerConfig {
    fn default() -> Self {
        MixerConfig {
            m: 10,
            alpha: 1.0,
            beta: 1.0,
            reg: RegMode::default(),
            eps: 1e-8,
            gamma: 0.9,
            period: 1,
            mu: 1e-8,
            pd_mode: PdMode::default(),
            rank_rtol: 1e-12,
            schedule: ScheduleSpec::Constant,
        }
    }
}

impl MixerConfig {
    /// Undamped, unregularized Anderson mixing with raw history of length `m`.
    pub fn plain_am(m: usize) -> Self {
        MixerConfig {
            m,
            reg: RegMode::None,
            gamma: 0.0,
            pd_mode: PdMode::Off,
            ..Self::default()
        }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        let field = |name: &str| format!("{path}.{name}");
        if self.m < 1 {
            return Err(Error::config(field("m"), "must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::config(field("alpha"), "must be positive"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::config(field("beta"), "must be positive"));
        }
        if !(0.0..1.0).contains(&self.mu) {
            return Err(Error::config(field("mu"), "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config(field("gamma"), "must lie in [0, 1)"));
        }
        if self.period < 1 {
            return Err(Error::config(field("period"), "must be at least 1"));
        }
        if !(self.eps > 0.0) {
            return Err(Error::config(field("eps"), "must be positive"));
        }
        if !(self.rank_rtol > 0.0) {
            return Err(Error::config(field("rank_rtol"), "must be positive"));
        }
        match self.reg {
            RegMode::None => {}
            RegMode::Tikhonov { delta } => {
                if !(delta >= 0.0) {
                    return Err(Error::config(field("reg.delta"), "must be non-negative"));
                }
            }
            RegMode::Adaptive { c1, c2 } => {
                if !(c1 >= 0.0) || !(c2 >= 0.0) {
                    return Err(Error::config(
                        field("reg"),
                        "c1 and c2 must be non-negative",
                    ));
                }
            }
        }
        self.schedule.validate(&field("schedule"))
    }

    /// Whether any step can be routed to a fallback optimizer.
    pub fn needs_fallback(&self) -> bool {
        self.pd_mode == PdMode::DescentCheck || self.period > 1
    }
}

/// Diagnostics of a single step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Applied update `x_{k+1} − x_k`.
    pub dx: Vec<f64>,
    /// Intermediate point `x̄_k` (equals `x_k` on pure mixing and fallback steps).
    pub projected: Vec<f64>,
    /// `‖r̄_k‖`, or `‖r_k‖` when no projection took place.
    pub projected_residual_norm: f64,
    pub delta_k: f64,
    pub lambda_k: Option<f64>,
    pub alpha_used: f64,
    pub beta_used: f64,
    pub fell_back: bool,
    pub gamma_norm: f64,
}

/// Iterate, step counter and history of one SAM run.
#[derive(Debug, Clone)]
pub struct SamState {
    cfg: MixerConfig,
    x: Vec<f64>,
    k: usize,
    history: HistoryBuffer,
    /// `(x_{k−1}, r_{k−1})` from the previous step.
    prev: Option<(Vec<f64>, Vec<f64>)>,
}

/// Outcome of the projection part of a mixing step.
struct Projection {
    delta: f64,
    penalty: Penalty,
    x_mat: ColMatrix,
    r_mat: ColMatrix,
    gamma: Vec<f64>,
}

impl SamState {
    pub fn new(cfg: MixerConfig, x0: Vec<f64>) -> Result<Self> {
        cfg.validate("optimizer")?;
        if !vecops::all_finite(&x0) {
            return Err(Error::NonFinite("initial iterate"));
        }
        let history = HistoryBuffer::with_moving_average(x0.len(), cfg.m, cfg.gamma);
        Ok(SamState {
            cfg,
            x: x0,
            k: 0,
            history,
            prev: None,
        })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn config(&self) -> &MixerConfig {
        &self.cfg
    }

    /// Number of steps taken so far.
    pub fn step_count(&self) -> usize {
        self.k
    }

    pub fn history(&self) -> &HistoryBuffer {
        &self.history
    }

    /// `(α_k, β_k)` for the next step.
    pub fn rates(&self) -> (f64, f64) {
        self.cfg
            .schedule
            .rates(self.k, self.cfg.alpha, self.cfg.beta)
    }

    /// Empties the history; the next step starts a new window.
    pub fn clear_history(&mut self) {
        self.history.clear();
        self.prev = None;
    }

    /// Replaces the current iterate without touching the history. Used when
    /// an outer loop moves the point (e.g. snapshot restarts).
    pub fn reset_iterate(&mut self, x: Vec<f64>) {
        self.x = x;
        self.prev = None;
    }

    fn check_residual(&self, r: &[f64]) -> Result<()> {
        if r.len() != self.x.len() {
            return Err(Error::DimensionMismatch {
                op: "mixer step",
                expected: self.x.len(),
                got: r.len(),
            });
        }
        if !vecops::all_finite(r) {
            return Err(Error::NonFinite("residual"));
        }
        Ok(())
    }

    fn record_differences(&mut self, r: &[f64]) -> Result<()> {
        if let Some((xp, rp)) = &self.prev {
            let dx = vecops::sub(&self.x, xp);
            let dr = vecops::sub(r, rp);
            self.history.push(&dx, &dr)?;
        }
        Ok(())
    }

    fn project(&self, r: &[f64], beta: f64) -> Result<Projection> {
        let delta = match self.cfg.reg {
            RegMode::None => 0.0,
            RegMode::Tikhonov { delta } => delta,
            RegMode::Adaptive { c1, c2 } => {
                let dx = self.history.newest_dx().unwrap_or(&[]);
                adaptive_delta(r, dx, c1, c2, beta, self.cfg.eps)
            }
        };
        let penalty = match self.cfg.reg {
            RegMode::None => Penalty::None,
            RegMode::Tikhonov { .. } => Penalty::Identity(delta),
            RegMode::Adaptive { .. } => Penalty::Gram(delta),
        };
        let (x_mat, r_mat) = self.history.matrices();
        let gamma = solve_gamma(&x_mat, &r_mat, r, penalty, self.cfg.rank_rtol)?;
        Ok(Projection {
            delta,
            penalty,
            x_mat,
            r_mat,
            gamma,
        })
    }

    fn advance(&mut self, r: &[f64], dx: &[f64]) {
        let x_new = vecops::add(&self.x, dx);
        let x_old = std::mem::replace(&mut self.x, x_new);
        self.prev = Some((x_old, r.to_vec()));
        self.k += 1;
    }

    fn fallback_step(
        &self,
        r: &[f64],
        fallback: Option<&mut (dyn BaselineOptimizer + '_)>,
    ) -> Result<Vec<f64>> {
        let fb = fallback.ok_or(Error::MissingFallback)?;
        let g = vecops::scale(-1.0, r);
        let x_new = fb.step(&self.x, &g)?;
        Ok(vecops::sub(&x_new, &self.x))
    }

    /// One SAM update with residual `r` at the current iterate.
    ///
    /// The first step, and any step with an empty history, is the pure
    /// mixing step `x + β r`. Off-period steps and steps rejected by the
    /// descent check go through `fallback`. On error the state should be
    /// discarded: the history may already hold the new difference pair.
    pub fn sam_step(
        &mut self,
        r: &[f64],
        mut fallback: Option<&mut (dyn BaselineOptimizer + '_)>,
    ) -> Result<StepReport> {
        self.check_residual(r)?;
        self.record_differences(r)?;
        let (alpha, beta) = self.rates();
        let r_norm = vecops::norm(r);

        let plain = |dx: Vec<f64>, x: &[f64], fell_back: bool| StepReport {
            dx,
            projected: x.to_vec(),
            projected_residual_norm: r_norm,
            delta_k: 0.0,
            lambda_k: None,
            alpha_used: alpha,
            beta_used: beta,
            fell_back,
            gamma_norm: 0.0,
        };

        let report = if self.k == 0 || self.history.is_empty() {
            plain(vecops::scale(beta, r), &self.x, false)
        } else if !self.k.is_multiple_of(self.cfg.period) {
            let dx = self.fallback_step(r, fallback.as_deref_mut())?;
            plain(dx, &self.x, true)
        } else {
            let proj = self.project(r, beta)?;
            let mut alpha_used = alpha;
            let mut lambda_k = None;
            if self.cfg.pd_mode == PdMode::EigenDamp {
                let l = pd_lambda(
                    &proj.x_mat,
                    &proj.r_mat,
                    beta,
                    proj.penalty,
                    self.cfg.rank_rtol,
                )?;
                alpha_used = damp_alpha(alpha, beta, self.cfg.mu, l);
                lambda_k = Some(l);
            }
            let x_step = proj.x_mat.mul_vec(&proj.gamma)?;
            let r_step = proj.r_mat.mul_vec(&proj.gamma)?;
            let mut projected = self.x.clone();
            vecops::axpy(-alpha_used, &x_step, &mut projected);
            let mut r_bar = r.to_vec();
            vecops::axpy(-alpha_used, &r_step, &mut r_bar);
            // Δx = β r̄ − α XΓ
            let mut dx = vecops::scale(beta, &r_bar);
            vecops::axpy(-alpha_used, &x_step, &mut dx);

            let gamma_norm = vecops::norm(&proj.gamma);
            if !vecops::all_finite(&dx) {
                return Err(Error::NonFiniteStep {
                    step: self.k,
                    delta: proj.delta,
                    lambda: lambda_k,
                    gamma_norm,
                });
            }

            let rejected = self.cfg.pd_mode == PdMode::DescentCheck && vecops::dot(&dx, r) <= 0.0;
            if rejected {
                let fb_dx = self.fallback_step(r, fallback)?;
                StepReport {
                    delta_k: proj.delta,
                    gamma_norm,
                    ..plain(fb_dx, &self.x, true)
                }
            } else {
                StepReport {
                    dx,
                    projected,
                    projected_residual_norm: vecops::norm(&r_bar),
                    delta_k: proj.delta,
                    lambda_k,
                    alpha_used,
                    beta_used: beta,
                    fell_back: false,
                    gamma_norm,
                }
            }
        };

        self.advance(r, &report.dx);
        Ok(report)
    }

    /// One preconditioned update: the mixing step is delegated to `precond`
    /// applied to the extragradient at the intermediate point,
    /// `x_{k+1} = precond(x̄_k, −r̄_k)`.
    ///
    /// The first step, off-period steps and rejected steps are
    /// `precond(x_k, −r_k)`. `pd_mode = eigen_damp` is not defined here
    /// because the implicit preconditioner has no closed form.
    pub fn psam_step(
        &mut self,
        r: &[f64],
        precond: &mut (dyn BaselineOptimizer + '_),
    ) -> Result<StepReport> {
        if self.cfg.pd_mode == PdMode::EigenDamp {
            return Err(Error::config(
                "optimizer.pd_mode",
                "eigen_damp is not available with preconditioned mixing",
            ));
        }
        self.check_residual(r)?;
        self.record_differences(r)?;
        let (alpha, beta) = self.rates();
        let r_norm = vecops::norm(r);
        let neg_r = vecops::scale(-1.0, r);

        let plain = |dx: Vec<f64>, x: &[f64], fell_back: bool| StepReport {
            dx,
            projected: x.to_vec(),
            projected_residual_norm: r_norm,
            delta_k: 0.0,
            lambda_k: None,
            alpha_used: alpha,
            beta_used: beta,
            fell_back,
            gamma_norm: 0.0,
        };

        let report = if self.k == 0 || self.history.is_empty() {
            let x_new = precond.step(&self.x, &neg_r)?;
            plain(vecops::sub(&x_new, &self.x), &self.x, false)
        } else if !self.k.is_multiple_of(self.cfg.period) {
            let x_new = precond.step(&self.x, &neg_r)?;
            plain(vecops::sub(&x_new, &self.x), &self.x, true)
        } else {
            let proj = self.project(r, beta)?;
            let gamma_norm = vecops::norm(&proj.gamma);
            let mut projected = self.x.clone();
            vecops::axpy(-alpha, &proj.x_mat.mul_vec(&proj.gamma)?, &mut projected);
            let mut r_bar = r.to_vec();
            vecops::axpy(-alpha, &proj.r_mat.mul_vec(&proj.gamma)?, &mut r_bar);
            if !vecops::all_finite(&projected) || !vecops::all_finite(&r_bar) {
                return Err(Error::NonFiniteStep {
                    step: self.k,
                    delta: proj.delta,
                    lambda: None,
                    gamma_norm,
                });
            }
            let x_new = precond.step(&projected, &vecops::scale(-1.0, &r_bar))?;
            let dx = vecops::sub(&x_new, &self.x);

            let rejected = self.cfg.pd_mode == PdMode::DescentCheck && vecops::dot(&dx, r) <= 0.0;
            if rejected {
                let x_new = precond.step(&self.x, &neg_r)?;
                StepReport {
                    delta_k: proj.delta,
                    gamma_norm,
                    ..plain(vecops::sub(&x_new, &self.x), &self.x, true)
                }
            } else {
                StepReport {
                    dx,
                    projected,
                    projected_residual_norm: vecops::norm(&r_bar),
                    delta_k: proj.delta,
                    lambda_k: None,
                    alpha_used: alpha,
                    beta_used: beta,
                    fell_back: false,
                    gamma_norm,
                }
            }
        };

        self.advance(r, &report.dx);
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::Sgd;

    fn quad_residual(a: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
        // diagonal A
        x.iter()
            .zip(a)
            .zip(b)
            .map(|((xi, ai), bi)| bi - ai * xi)
            .collect()
    }

    #[test]
    fn first_step_is_pure_mixing() {
        let mut s = SamState::new(MixerConfig::default(), vec![0.0, 0.0]).unwrap();
        let rep = s.sam_step(&[1.0, 1.0], None).unwrap();
        assert_eq!(s.x(), &[1.0, 1.0]);
        assert!(!rep.fell_back);
        assert_eq!(rep.projected, vec![0.0, 0.0]);
    }

    #[test]
    fn two_projection_steps_solve_two_by_two() {
        let (a, b) = ([1.0, 2.0], [1.0, 1.0]);
        let mut s = SamState::new(MixerConfig::plain_am(10), vec![0.0, 0.0]).unwrap();
        let mut projected = Vec::new();
        for _ in 0..3 {
            let r = quad_residual(&a, &b, s.x());
            projected.push(s.sam_step(&r, None).unwrap().projected);
        }
        let xbar2 = &projected[2];
        assert!((xbar2[0] - 1.0).abs() < 1e-12 && (xbar2[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn descent_check_falls_back_to_sgd() {
        // Build a history in which the mixing direction opposes r.
        let cfg = MixerConfig {
            reg: RegMode::None,
            gamma: 0.0,
            ..MixerConfig::default()
        };
        let mut s = SamState::new(cfg, vec![0.0]).unwrap();
        let mut sgd = Sgd::new(0.05);
        s.sam_step(&[1.0], Some(&mut sgd)).unwrap();
        // x = 1; Δx = 1, Δr = 2 - 1 = 1 so Γ = 2, Δx_cand = 2 - (1 + 1)·2 = -2.
        let rep = s.sam_step(&[2.0], Some(&mut sgd)).unwrap();
        assert!(rep.fell_back);
        assert!((s.x()[0] - (1.0 + 0.05 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn descent_check_without_fallback_errors() {
        let cfg = MixerConfig {
            reg: RegMode::None,
            gamma: 0.0,
            ..MixerConfig::default()
        };
        let mut s = SamState::new(cfg, vec![0.0]).unwrap();
        s.sam_step(&[1.0], None).unwrap();
        assert!(matches!(
            s.sam_step(&[2.0], None),
            Err(Error::MissingFallback)
        ));
    }

    #[test]
    fn alternating_period_uses_fallback_off_period() {
        let cfg = MixerConfig {
            period: 3,
            pd_mode: PdMode::Off,
            ..MixerConfig::default()
        };
        let (a, b) = ([1.0, 3.0], [1.0, -1.0]);
        let mut s = SamState::new(cfg, vec![0.0, 0.0]).unwrap();
        let mut sgd = Sgd::new(0.1);
        let mut fell = Vec::new();
        for _ in 0..7 {
            let r = quad_residual(&a, &b, s.x());
            fell.push(s.sam_step(&r, Some(&mut sgd)).unwrap().fell_back);
        }
        assert_eq!(fell, vec![false, true, true, false, true, true, false]);
    }

    #[test]
    fn eigen_damp_reports_lambda() {
        let cfg = MixerConfig {
            pd_mode: PdMode::EigenDamp,
            mu: 0.5,
            ..MixerConfig::default()
        };
        let (a, b) = ([1.0, 4.0, 9.0], [1.0, 1.0, 1.0]);
        let mut s = SamState::new(cfg, vec![0.0; 3]).unwrap();
        for k in 0..5 {
            let r = quad_residual(&a, &b, s.x());
            let rep = s.sam_step(&r, None).unwrap();
            if k > 0 {
                let l = rep.lambda_k.unwrap();
                assert!(rep.alpha_used * l <= 2.0 * rep.beta_used * 0.5 + 1e-12);
            }
        }
    }

    #[test]
    fn psam_with_sgd_precond_matches_first_step() {
        let mut s = SamState::new(MixerConfig::default(), vec![0.5, 0.5]).unwrap();
        let mut p = Sgd::new(1.0);
        s.psam_step(&[1.0, -1.0], &mut p).unwrap();
        assert_eq!(s.x(), &[1.5, -0.5]);
    }

    #[test]
    fn psam_with_zero_gamma_is_precond_step() {
        let cfg = MixerConfig {
            pd_mode: PdMode::Off,
            gamma: 0.0,
            ..MixerConfig::default()
        };
        let mut s = SamState::new(cfg, vec![0.0, 0.0]).unwrap();
        let mut p = Sgd::new(0.5);
        s.psam_step(&[1.0, 0.0], &mut p).unwrap();
        // R = [(-0.5, 0.5)] and Rᵀr = 0, so Γ = 0.
        let rep = s.psam_step(&[0.5, 0.5], &mut p).unwrap();
        assert_eq!(rep.gamma_norm, 0.0);
        assert_eq!(s.x(), &[0.75, 0.25]);
    }

    #[test]
    fn psam_rejects_eigen_damp() {
        let cfg = MixerConfig {
            pd_mode: PdMode::EigenDamp,
            ..MixerConfig::default()
        };
        let mut s = SamState::new(cfg, vec![0.0]).unwrap();
        assert!(s.psam_step(&[1.0], &mut Sgd::new(1.0)).is_err());
    }

    #[test]
    fn non_finite_residual_is_rejected() {
        let mut s = SamState::new(MixerConfig::default(), vec![0.0]).unwrap();
        assert!(matches!(
            s.sam_step(&[f64::NAN], None),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn config_validation_paths() {
        let bad = MixerConfig {
            mu: 1.0,
            ..MixerConfig::default()
        };
        match bad.validate("optimizer") {
            Err(Error::Config { path, .. }) => assert_eq!(path, "optimizer.mu"),
            other => panic!("unexpected {other:?}"),
        }
        let bad = MixerConfig {
            m: 0,
            ..MixerConfig::default()
        };
        assert!(bad.validate("optimizer").is_err());
    }

    #[test]
    fn config_parses_from_toml() {
        let cfg: MixerConfig = toml::from_str(
            r#"
            m = 5
            pd_mode = "eigen_damp"
            reg = { kind = "tikhonov", delta = 1e-6 }
            schedule = { kind = "step_decay", milestones = [100], factor = 0.1 }
            "#,
        )
        .unwrap();
        assert_eq!(cfg.m, 5);
        assert_eq!(cfg.pd_mode, PdMode::EigenDamp);
        assert_eq!(cfg.reg, RegMode::Tikhonov { delta: 1e-6 });
        assert_eq!(cfg.gamma, 0.9);
    }
}
