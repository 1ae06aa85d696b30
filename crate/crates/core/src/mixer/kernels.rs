//! Building blocks of one mixing step, independent of optimizer state.

use crate::error::{Error, Result};
use crate::smallmat::{self, ColMatrix, SymMatrix};
use crate::vecops;

/// Penalty added to the least-squares problem for the coefficients `Γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    /// Plain Anderson mixing: `min ‖r − RΓ‖²`.
    None,
    /// Tikhonov (RAM): `+ δ‖Γ‖²`.
    Identity(f64),
    /// Adaptive regularization: `+ δ‖XΓ‖²`.
    Gram(f64),
}

impl Penalty {
    pub fn delta(&self) -> f64 {
        match *self {
            Penalty::None => 0.0,
            Penalty::Identity(d) | Penalty::Gram(d) => d,
        }
    }
}

fn check_history(x: &ColMatrix, r: &ColMatrix, op: &'static str) -> Result<()> {
    if x.rows() != r.rows() || x.cols() != r.cols() {
        return Err(Error::DimensionMismatch {
            op,
            expected: x.rows() * x.cols(),
            got: r.rows() * r.cols(),
        });
    }
    Ok(())
}

/// `Z = RᵀR + P`, where `P` is `0`, `δI` or `δXᵀX`.
pub fn normal_matrix(x: &ColMatrix, r: &ColMatrix, penalty: Penalty) -> Result<SymMatrix> {
    check_history(x, r, "normal_matrix")?;
    let rtr = smallmat::gram_sym(r);
    Ok(match penalty {
        Penalty::None => rtr,
        Penalty::Identity(d) => rtr.add_scaled(d, &SymMatrix::identity(r.cols()))?,
        Penalty::Gram(d) => rtr.add_scaled(d, &smallmat::gram_sym(x))?,
    })
}

/// Least-norm minimiser `Γ = Z† Rᵀ rhs` of the penalised problem.
///
/// An empty history gives an empty `Γ`.
pub fn solve_gamma(
    x: &ColMatrix,
    r: &ColMatrix,
    rhs: &[f64],
    penalty: Penalty,
    rank_rtol: f64,
) -> Result<Vec<f64>> {
    check_history(x, r, "solve_gamma")?;
    if r.cols() == 0 {
        return Ok(Vec::new());
    }
    let z = normal_matrix(x, r, penalty)?;
    smallmat::pinv_solve(&z, &r.tr_mul_vec(rhs)?, rank_rtol)
}

/// `δ_k = max{ c1‖r‖² / (‖Δx‖² + ε), c2 β⁻² }`.
///
/// With `c2 = 0` the second branch is skipped entirely (so `β` is not needed).
pub fn adaptive_delta(r: &[f64], dx_prev: &[f64], c1: f64, c2: f64, beta: f64, eps: f64) -> f64 {
    let first = c1 * vecops::norm_sq(r) / (vecops::norm_sq(dx_prev) + eps);
    if c2 > 0.0 {
        first.max(c2 / (beta * beta))
    } else {
        first
    }
}

/// `λ_k = λ_max(Y Z† Rᵀ + R Z† Yᵀ)` with `Y = X + βR`, evaluated on the
/// `2m × 2m` product `[Y R]ᵀ[Y R] · [[0, Z†], [Z†, 0]]`.
///
/// The `d × d` matrix has rank at most `2m`, so for `d > 2m` it also has zero
/// eigenvalues that the small product need not show; the result is then
/// clamped at zero.
pub fn pd_lambda(
    x: &ColMatrix,
    r: &ColMatrix,
    beta: f64,
    penalty: Penalty,
    rank_rtol: f64,
) -> Result<f64> {
    check_history(x, r, "pd_lambda")?;
    let m = r.cols();
    if m == 0 {
        return Err(Error::EmptyHistory);
    }
    let y = x.add_scaled(beta, r)?;
    let z_pinv = smallmat::pinv_psd(&normal_matrix(x, r, penalty)?, rank_rtol)?;
    let w = smallmat::gram_sym(&y.hcat(r)?);
    let s = SymMatrix::from_upper(2 * m, |i, j| {
        if i < m && j >= m {
            z_pinv.get(i, j - m)
        } else {
            0.0
        }
    });
    let l = smallmat::lambda_max_product(&w, &s)?;
    Ok(if x.rows() > 2 * m { l.max(0.0) } else { l })
}

/// Largest `α ≤ alpha` satisfying `α λ_k ≤ 2β(1 − μ)`.
pub fn damp_alpha(alpha: f64, beta: f64, mu: f64, lambda_k: f64) -> f64 {
    if lambda_k <= 0.0 {
        alpha
    } else {
        alpha.min(2.0 * beta * (1.0 - mu) / lambda_k)
    }
}

/// `H v = βv − α(X + βR)Γ(v)`, the action of the mixing matrix on `v`.
pub fn apply_h(
    x: &ColMatrix,
    r: &ColMatrix,
    v: &[f64],
    alpha: f64,
    beta: f64,
    penalty: Penalty,
    rank_rtol: f64,
) -> Result<Vec<f64>> {
    let gamma = solve_gamma(x, r, v, penalty, rank_rtol)?;
    let mut out = vecops::scale(beta, v);
    if !gamma.is_empty() {
        let y = x.add_scaled(beta, r)?;
        vecops::axpy(-alpha, &y.mul_vec(&gamma)?, &mut out);
    }
    Ok(out)
}

/// Dense `H = βI − α Y Z† Rᵀ`. Only meant for small `d` (tests, diagnostics).
pub fn assemble_dense_h(
    x: &ColMatrix,
    r: &ColMatrix,
    alpha: f64,
    beta: f64,
    penalty: Penalty,
    rank_rtol: f64,
) -> Result<ColMatrix> {
    check_history(x, r, "assemble_dense_h")?;
    let d = x.rows();
    let mut h = ColMatrix::identity(d).scaled(beta);
    if r.cols() == 0 {
        return Ok(h);
    }
    let y = x.add_scaled(beta, r)?;
    let z_pinv = smallmat::pinv_psd(&normal_matrix(x, r, penalty)?, rank_rtol)?;
    let correction = y.matmul(z_pinv.as_dense())?.matmul(&r.transpose())?;
    h = h.add_scaled(-alpha, &correction)?;
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_r_gives_projection_coefficients() {
        let r = ColMatrix::from_columns(3, &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        let x = ColMatrix::zeros(3, 2);
        let rhs = [2.0, -3.0, 5.0];
        for delta in [0.0, 0.5, 1e6] {
            let g = solve_gamma(&x, &r, &rhs, Penalty::Gram(delta), 1e-12).unwrap();
            assert!((g[0] - 2.0).abs() < 1e-14 && (g[1] + 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn huge_penalty_shrinks_gamma() {
        let x = ColMatrix::from_columns(2, &[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let r = ColMatrix::from_columns(2, &[[1.0, 2.0], [-1.0, 0.5]]).unwrap();
        let rhs = [1.0, 1.0];
        let rtr = r.tr_mul_vec(&rhs).unwrap();
        let g = solve_gamma(&x, &r, &rhs, Penalty::Gram(1e12), 1e-12).unwrap();
        assert!(vecops::norm(&g) <= 1e-10 * vecops::norm(&rtr));
    }

    #[test]
    fn empty_history_gives_empty_gamma() {
        let x = ColMatrix::zeros(4, 0);
        let g = solve_gamma(&x, &x, &[1.0; 4], Penalty::None, 1e-12).unwrap();
        assert!(g.is_empty());
    }

    #[test]
    fn delta_direct_arithmetic() {
        let d = adaptive_delta(&[2.0, 0.0], &[1.0, 0.0], 0.01, 0.0, 1.0, 1e-8);
        assert_eq!(d, 0.04 / (1.0 + 1e-8));
    }

    #[test]
    fn delta_second_branch_dominates() {
        // c1 term: 0.01 * 1 / 1 (ε negligible)
        let d = adaptive_delta(&[1.0], &[1.0], 0.01, 1.0, 0.1, 0.0);
        assert!((d - 100.0).abs() < 1e-10);
    }

    #[test]
    fn delta_epsilon_guard() {
        let d = adaptive_delta(&[1.0], &[0.0], 1e-2, 0.0, 1.0, 1e-8);
        assert!(d.is_finite());
        assert!((d - 1e6).abs() < 1e-6);
    }

    #[test]
    fn damp_alpha_cases() {
        assert_eq!(damp_alpha(0.7, 1.0, 0.5, 0.0), 0.7);
        assert_eq!(damp_alpha(0.7, 1.0, 0.5, -3.0), 0.7);
        assert_eq!(damp_alpha(1.0, 1.0, 0.5, 4.0), 0.25);
        assert_eq!(damp_alpha(0.1, 1.0, 0.5, 4.0), 0.1);
    }

    #[test]
    fn pd_lambda_zero_when_y_vanishes() {
        let beta = 0.5;
        let r = ColMatrix::from_columns(3, &[[1.0, 2.0, 0.0], [0.0, 1.0, -1.0]]).unwrap();
        let x = r.scaled(-beta);
        let l = pd_lambda(&x, &r, beta, Penalty::Gram(0.1), 1e-12).unwrap();
        assert!(l.abs() < 1e-12, "λ = {l}");
    }

    #[test]
    fn pd_lambda_unit_example() {
        // Y = e1, R = e2, Z = 1 with β = 0 and no penalty.
        let x = ColMatrix::from_columns(2, &[[1.0, 0.0]]).unwrap();
        let r = ColMatrix::from_columns(2, &[[0.0, 1.0]]).unwrap();
        let l = pd_lambda(&x, &r, 0.0, Penalty::None, 1e-12).unwrap();
        assert!((l - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pd_lambda_needs_history() {
        let x = ColMatrix::zeros(3, 0);
        assert!(matches!(
            pd_lambda(&x, &x, 1.0, Penalty::None, 1e-12),
            Err(Error::EmptyHistory)
        ));
    }

    #[test]
    fn dense_h_of_empty_history_is_scaled_identity() {
        let x = ColMatrix::zeros(3, 0);
        let h = assemble_dense_h(&x, &x, 1.0, 0.3, Penalty::None, 1e-12).unwrap();
        assert_eq!(h, ColMatrix::identity(3).scaled(0.3));
    }
}
