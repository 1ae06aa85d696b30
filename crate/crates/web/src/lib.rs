//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export takes plain numbers and returns a flat `Float64Array`, so the
//! page needs no glue beyond what `wasm-bindgen` generates.

use amopt_core::baselines::{BaselineOptimizer, Sgd};
use amopt_core::harness::gmres_check;
use amopt_core::mixer::{assemble_dense_h, damp_alpha, pd_lambda, MixerConfig, Penalty, SamState};
use amopt_core::problems::{GradientOracle, QuadraticOracle, Spectrum};
use amopt_core::smallmat::{self, SymMatrix};
use amopt_core::vecops;
use wasm_bindgen::prelude::*;

fn quadratic(dim: usize, cond: f64, seed: u64) -> Option<QuadraticOracle> {
    let cond = if cond.is_finite() { cond.max(1.0) } else { 1.0 };
    QuadraticOracle::generate(dim.max(2), cond, Spectrum::Log, 1, 0.0, seed)
        .ok()
        .map(|(q, _)| q)
}

/// `‖∇f‖²` per iteration for SGD at `lr = 2/(1 + cond)` followed by AdaSAM
/// with mixing parameter `beta`, both from `x0 = 1`. Layout:
/// `[sgd_0 … sgd_iters, adasam_0 … adasam_iters]`. Entries after a blow-up
/// are `NaN`.
#[wasm_bindgen]
pub fn convergence_curves(dim: usize, cond: f64, iters: usize, beta: f64, seed: u64) -> Vec<f64> {
    let Some(q) = quadratic(dim, cond, seed) else {
        return Vec::new();
    };
    let cond = q.eigenvalues().iter().fold(0.0f64, |m, &v| m.max(v));
    let x0 = vec![1.0; q.dim()];
    let mut out = Vec::with_capacity(2 * (iters + 1));

    let mut sgd = Sgd::new(2.0 / (1.0 + cond));
    let mut x = x0.clone();
    for k in 0..=iters {
        let g = q.full_gradient(&x);
        out.push(vecops::norm_sq(&g));
        if k < iters {
            x = sgd.step(&x, &g).unwrap_or_else(|_| vec![f64::NAN; x.len()]);
        }
    }

    let mixer = MixerConfig {
        beta: if beta > 0.0 && beta.is_finite() {
            beta
        } else {
            1.0
        },
        ..MixerConfig::default()
    };
    let mut fallback = Sgd::new(0.2 / cond);
    let mut state = SamState::new(mixer, x0).expect("default mixer is valid");
    let mut failed = false;
    for k in 0..=iters {
        let g = q.full_gradient(state.x());
        let n = vecops::norm_sq(&g);
        failed |= !n.is_finite();
        out.push(if failed { f64::NAN } else { n });
        if k < iters && !failed {
            let r = vecops::scale(-1.0, &g);
            failed = state.sam_step(&r, Some(&mut fallback)).is_err();
        }
    }
    out
}

/// Per-step distance between Anderson mixing and GMRES on a random SPD
/// system: `[plain_1 … plain_k, preconditioned_1 … preconditioned_k]`.
#[wasm_bindgen]
pub fn gmres_deviation(dim: usize, cond: f64, steps: usize, seed: u64) -> Vec<f64> {
    let cond = if cond.is_finite() { cond.max(1.0) } else { 1.0 };
    match gmres_check(dim.max(1), cond, steps.max(1), seed) {
        Ok(c) => c.plain.into_iter().chain(c.preconditioned).collect(),
        Err(_) => Vec::new(),
    }
}

/// Smallest eigenvalue of the symmetric part of the mixing matrix `H` as
/// `α` sweeps `[0, 1]`, for a history of length `m` collected by a short
/// run on a 20-dimensional quadratic. Layout:
/// `[λ_k, damped α, λ_min(α_0), …, λ_min(α_{points−1})]`.
#[wasm_bindgen]
pub fn pd_margin(m: usize, beta: f64, mu: f64, points: usize, seed: u64) -> Vec<f64> {
    let m = m.clamp(1, 10);
    let beta = if beta > 0.0 && beta <= 1.0 { beta } else { 1.0 };
    let Some(q) = quadratic(20, 100.0, seed) else {
        return Vec::new();
    };
    let mut state = SamState::new(
        MixerConfig {
            m,
            beta: 0.01,
            ..MixerConfig::plain_am(m)
        },
        vec![1.0; 20],
    )
    .expect("plain mixer is valid");
    for _ in 0..=m {
        let r = vecops::scale(-1.0, &q.full_gradient(state.x()));
        if state.sam_step(&r, None).is_err() {
            return Vec::new();
        }
    }
    let (x, r) = state.history().matrices();
    let pen = Penalty::Gram(1e-2);
    let Ok(lambda) = pd_lambda(&x, &r, beta, pen, 1e-12) else {
        return Vec::new();
    };
    let mut out = vec![lambda, damp_alpha(1.0, beta, mu.clamp(0.0, 1.0), lambda)];
    let points = points.max(2);
    for i in 0..points {
        let alpha = i as f64 / (points - 1) as f64;
        let lmin = assemble_dense_h(&x, &r, alpha, beta, pen, 1e-12)
            .and_then(|h| {
                let s = SymMatrix::from_upper(20, |i, j| 0.5 * (h.get(i, j) + h.get(j, i)));
                smallmat::sym_eig(&s)
            })
            .map(|e| e.values.iter().copied().fold(f64::INFINITY, f64::min))
            .unwrap_or(f64::NAN);
        out.push(lmin);
    }
    out
}
