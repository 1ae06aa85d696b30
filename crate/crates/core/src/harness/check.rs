use super::run::initial_point;
use crate::baselines::DiagonalPreconditioner;
use crate::error::Result;
use crate::krylov::{gmres, gmres_right_precond, LinearSystem, Preconditioner};
use crate::mixer::{MixerConfig, SamState};
use crate::problems::{QuadraticOracle, Spectrum};
use crate::vecops;

/// Step-by-step distance between Anderson mixing and GMRES on one system.
#[derive(Debug, Clone)]
pub struct GmresCheck {
    /// `‖x̄_k − x_k^G‖ / max(1, ‖x_k^G‖)` for `k = 1..`, plain AM vs GMRES.
    pub plain: Vec<f64>,
    /// Same with `M = diag(A)`: preconditioned mixing vs right-preconditioned GMRES.
    pub preconditioned: Vec<f64>,
}

impl GmresCheck {
    pub fn max_plain(&self) -> f64 {
        self.plain.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_preconditioned(&self) -> f64 {
        self.preconditioned.iter().copied().fold(0.0, f64::max)
    }
}

fn relative_gap(x: &[f64], reference: &[f64]) -> f64 {
    vecops::norm(&vecops::sub(x, reference)) / vecops::norm(reference).max(1.0)
}

/// Projected iterates `x̄_1, …, x̄_steps` of undamped, unregularized AM with
/// full memory on `A x = b`, started from `x0`.
pub fn am_projected_iterates(
    sys: &LinearSystem,
    x0: &[f64],
    steps: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut state = SamState::new(MixerConfig::plain_am(steps.max(1)), x0.to_vec())?;
    let mut out = Vec::with_capacity(steps);
    for k in 0..=steps {
        let r = sys.residual(state.x());
        let rep = state.sam_step(&r, None)?;
        if k > 0 {
            out.push(rep.projected);
        }
    }
    Ok(out)
}

/// Same for preconditioned mixing with `x_{k+1} = x̄_k + M⁻¹ r̄_k`, `M` diagonal.
pub fn pam_projected_iterates(
    sys: &LinearSystem,
    diag: &[f64],
    x0: &[f64],
    steps: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut state = SamState::new(MixerConfig::plain_am(steps.max(1)), x0.to_vec())?;
    let mut precond = DiagonalPreconditioner::new(diag)?;
    let mut out = Vec::with_capacity(steps);
    for k in 0..=steps {
        let r = sys.residual(state.x());
        let rep = state.psam_step(&r, &mut precond)?;
        if k > 0 {
            out.push(rep.projected);
        }
    }
    Ok(out)
}

/// Builds a seeded quadratic of the given size and conditioning and compares
/// the first `steps` projected AM iterates with GMRES, plain and with
/// `M = diag(A)`.
pub fn gmres_check(dim: usize, cond: f64, steps: usize, seed: u64) -> Result<GmresCheck> {
    let (_, sys) = QuadraticOracle::generate(dim, cond, Spectrum::Log, 1, 0.0, seed)?;
    let x0 = initial_point(seed, 0.0, dim);
    let steps = steps.min(dim);

    let reference = gmres(&sys, &x0, steps, 0.0)?;
    let am = am_projected_iterates(&sys, &x0, steps)?;
    let plain = am
        .iter()
        .zip(reference.iterates.iter().skip(1))
        .map(|(x, g)| relative_gap(x, g))
        .collect();

    let diag: Vec<f64> = (0..dim).map(|i| sys.a().get(i, i)).collect();
    let m = Preconditioner::diagonal(diag.clone())?;
    let reference = gmres_right_precond(&sys, &m, &x0, steps, 0.0)?;
    let pam = pam_projected_iterates(&sys, &diag, &x0, steps)?;
    let preconditioned = pam
        .iter()
        .zip(reference.iterates.iter().skip(1))
        .map(|(x, g)| relative_gap(x, g))
        .collect();

    Ok(GmresCheck {
        plain,
        preconditioned,
    })
}
