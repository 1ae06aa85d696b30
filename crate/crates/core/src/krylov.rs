//! Reference GMRES for dense SPD systems.
//!
//! This is an oracle, not a production solver: dense storage, no restarts.
//! Arnoldi uses modified Gram–Schmidt and the Hessenberg least-squares
//! problem is reduced with Givens rotations. Every intermediate iterate is
//! returned so it can be compared step by step with Anderson mixing.

use crate::error::{Error, Result};
use crate::smallmat::{self, ColMatrix, SymMatrix};
use crate::vecops;

/// Relative size of the Arnoldi subdiagonal below which the Krylov space is
/// treated as invariant.
const HAPPY_BREAKDOWN: f64 = 1e-14;

/// `A x = b` with `A` symmetric positive definite.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    a: SymMatrix,
    b: Vec<f64>,
}

impl LinearSystem {
    /// Checks `λ_min(A) > 0` with a full eigendecomposition.
    pub fn new(a: SymMatrix, b: Vec<f64>) -> Result<Self> {
        if a.order() != b.len() {
            return Err(Error::DimensionMismatch {
                op: "LinearSystem::new",
                expected: a.order(),
                got: b.len(),
            });
        }
        let eig = smallmat::sym_eig(&a)?;
        if eig.values.last().is_some_and(|&l| l <= 0.0) {
            return Err(Error::Singular("LinearSystem: A is not positive definite"));
        }
        Ok(LinearSystem { a, b })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &SymMatrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// `b − A x`
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let ax = self
            .a
            .mul_vec(x)
            .expect("dimension checked at construction");
        vecops::sub(&self.b, &ax)
    }
}

/// Right preconditioner `M`, applied through solves with `M`.
#[derive(Debug, Clone)]
pub enum Preconditioner {
    Identity,
    Diagonal(Vec<f64>),
    /// LU factors with partial pivoting of a dense `M`.
    Dense(DenseLu),
}

impl Preconditioner {
    pub fn diagonal(diag: Vec<f64>) -> Result<Self> {
        if diag.iter().any(|&d| d == 0.0 || !d.is_finite()) {
            return Err(Error::Singular("diagonal preconditioner"));
        }
        Ok(Preconditioner::Diagonal(diag))
    }

    pub fn dense(m: &ColMatrix) -> Result<Self> {
        Ok(Preconditioner::Dense(DenseLu::factor(m)?))
    }

    /// `M⁻¹ v`
    pub fn solve(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Preconditioner::Identity => v.to_vec(),
            Preconditioner::Diagonal(d) => v.iter().zip(d).map(|(a, b)| a / b).collect(),
            Preconditioner::Dense(lu) => lu.solve(v),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DenseLu {
    lu: ColMatrix,
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn factor(m: &ColMatrix) -> Result<Self> {
        let n = m.rows();
        if m.cols() != n {
            return Err(Error::DimensionMismatch {
                op: "DenseLu::factor",
                expected: n,
                got: m.cols(),
            });
        }
        let scale = m.max_abs();
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu.get(i, k).abs()))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty pivot range");
            if pivot <= f64::EPSILON * scale * n as f64 || pivot == 0.0 {
                return Err(Error::Singular("dense preconditioner"));
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let tmp = lu.get(k, j);
                    lu.set(k, j, lu.get(p, j));
                    lu.set(p, j, tmp);
                }
            }
            let pkk = lu.get(k, k);
            for i in k + 1..n {
                let l = lu.get(i, k) / pkk;
                lu.set(i, k, l);
                for j in k + 1..n {
                    lu.set(i, j, lu.get(i, j) - l * lu.get(k, j));
                }
            }
        }
        Ok(DenseLu { lu, perm })
    }

    pub fn solve(&self, v: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&p| v[p]).collect();
        for i in 0..n {
            for j in 0..i {
                y[i] -= self.lu.get(i, j) * y[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                y[i] -= self.lu.get(i, j) * y[j];
            }
            y[i] /= self.lu.get(i, i);
        }
        y
    }
}

/// All iterates of one GMRES run. `iterates[k]` is `x_k` (`iterates[0] = x0`).
#[derive(Debug, Clone)]
pub struct GmresRun {
    pub iterates: Vec<Vec<f64>>,
    /// `‖b − A x_k‖` as tracked by the Givens recurrence.
    pub residual_norms: Vec<f64>,
    /// Orthonormal Arnoldi basis of the (preconditioned) Krylov space.
    pub basis: Vec<Vec<f64>>,
    /// Search directions `M⁻¹ v_j` spanning `x_k − x0`.
    pub directions: Vec<Vec<f64>>,
    /// Set when the Krylov space became invariant before `max_k`.
    pub happy_breakdown: bool,
}

/// Plain GMRES: `x_k` minimises `‖b − Ax‖` over `x0 + K_k(A, r0)`.
pub fn gmres(sys: &LinearSystem, x0: &[f64], max_k: usize, tol: f64) -> Result<GmresRun> {
    gmres_right_precond(sys, &Preconditioner::Identity, x0, max_k, tol)
}

/// Right-preconditioned GMRES: `x_k` minimises `‖b − Ax‖` over
/// `x0 + M⁻¹ K_k(A M⁻¹, r0)`.
pub fn gmres_right_precond(
    sys: &LinearSystem,
    precond: &Preconditioner,
    x0: &[f64],
    max_k: usize,
    tol: f64,
) -> Result<GmresRun> {
    let d = sys.dim();
    if x0.len() != d {
        return Err(Error::DimensionMismatch {
            op: "gmres",
            expected: d,
            got: x0.len(),
        });
    }
    if max_k > d {
        return Err(Error::DimensionMismatch {
            op: "gmres max_k",
            expected: d,
            got: max_k,
        });
    }

    let r0 = sys.residual(x0);
    let beta = vecops::norm(&r0);
    let mut run = GmresRun {
        iterates: vec![x0.to_vec()],
        residual_norms: vec![beta],
        basis: Vec::new(),
        directions: Vec::new(),
        happy_breakdown: false,
    };
    if beta == 0.0 {
        return Ok(run);
    }

    run.basis.push(vecops::scale(1.0 / beta, &r0));
    // Columns of the rotated Hessenberg matrix (upper triangular part).
    let mut hcols: Vec<Vec<f64>> = Vec::new();
    let mut cs: Vec<f64> = Vec::new();
    let mut sn: Vec<f64> = Vec::new();
    let mut g = vec![beta];

    for j in 0..max_k {
        let z = precond.solve(&run.basis[j]);
        let mut w = sys.a.mul_vec(&z)?;
        let w_norm0 = vecops::norm(&w);
        run.directions.push(z);

        let mut h = vec![0.0; j + 2];
        for (i, vi) in run.basis.iter().enumerate() {
            h[i] = vecops::dot(&w, vi);
            vecops::axpy(-h[i], vi, &mut w);
        }
        let h_next = vecops::norm(&w);
        h[j + 1] = h_next;

        for i in 0..j {
            let (a, b) = (h[i], h[i + 1]);
            h[i] = cs[i] * a + sn[i] * b;
            h[i + 1] = -sn[i] * a + cs[i] * b;
        }
        let denom = h[j].hypot(h[j + 1]);
        let (c, s) = if denom == 0.0 {
            (1.0, 0.0)
        } else {
            (h[j] / denom, h[j + 1] / denom)
        };
        cs.push(c);
        sn.push(s);
        h[j] = denom;
        h[j + 1] = 0.0;
        let gj = g[j];
        g[j] = c * gj;
        g.push(-s * gj);
        h.truncate(j + 1);
        hcols.push(h);

        if hcols[j][j] == 0.0 {
            return Err(Error::Singular("gmres Hessenberg"));
        }
        // Back substitution on the (j+1)x(j+1) triangle.
        let n = j + 1;
        let mut y = g[..n].to_vec();
        for i in (0..n).rev() {
            for (k, col) in hcols.iter().enumerate().skip(i + 1) {
                y[i] -= col[i] * y[k];
            }
            y[i] /= hcols[i][i];
        }
        let mut x = x0.to_vec();
        for (yi, dir) in y.iter().zip(&run.directions) {
            vecops::axpy(*yi, dir, &mut x);
        }
        run.iterates.push(x);
        run.residual_norms.push(g[j + 1].abs());

        if h_next <= HAPPY_BREAKDOWN * w_norm0.max(f64::MIN_POSITIVE) {
            run.happy_breakdown = true;
            break;
        }
        if g[j + 1].abs() <= tol * beta {
            break;
        }
        if j + 1 < max_k {
            run.basis.push(vecops::scale(1.0 / h_next, &w));
        }
    }
    Ok(run)
}
