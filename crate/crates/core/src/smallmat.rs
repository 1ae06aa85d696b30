//! Dense kernels for the small systems formed from the history window.
//!
//! Everything here works on matrices whose order is at most a few dozen
//! (`m` or `2m`), so the algorithms favour robustness over asymptotics:
//! cyclic Jacobi for symmetric eigenproblems, and pseudoinverses through
//! the resulting spectral decomposition.

use crate::error::{Error, Result};
use crate::vecops;

/// Column-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ColMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ColMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ColMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds a `rows x columns.len()` matrix; every column must have `rows` entries.
    pub fn from_columns<C: AsRef<[f64]>>(rows: usize, columns: &[C]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * columns.len());
        for c in columns {
            let c = c.as_ref();
            if c.len() != rows {
                return Err(Error::DimensionMismatch {
                    op: "ColMatrix::from_columns",
                    expected: rows,
                    got: c.len(),
                });
            }
            data.extend_from_slice(c);
        }
        Ok(ColMatrix {
            rows,
            cols: columns.len(),
            data,
        })
    }

    /// Builds from row-major data, the natural layout for literals in tests.
    pub fn from_row_major(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                op: "ColMatrix::from_row_major",
                expected: rows * cols,
                got: values.len(),
            });
        }
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, values[i * cols + j]);
            }
        }
        Ok(m)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m.data[j * rows + i] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.rows + i] = v;
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn is_finite(&self) -> bool {
        vecops::all_finite(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// `A v`
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                op: "ColMatrix::mul_vec",
                expected: self.cols,
                got: v.len(),
            });
        }
        let mut out = vec![0.0; self.rows];
        for (j, &vj) in v.iter().enumerate() {
            if vj != 0.0 {
                vecops::axpy(vj, self.col(j), &mut out);
            }
        }
        Ok(out)
    }

    /// `Aᵀ v`
    pub fn tr_mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows {
            return Err(Error::DimensionMismatch {
                op: "ColMatrix::tr_mul_vec",
                expected: self.rows,
                got: v.len(),
            });
        }
        Ok((0..self.cols)
            .map(|j| vecops::dot(self.col(j), v))
            .collect())
    }

    /// `A B`
    pub fn matmul(&self, other: &ColMatrix) -> Result<ColMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                op: "ColMatrix::matmul",
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = ColMatrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for (k, &bkj) in other.col(j).iter().enumerate() {
                if bkj != 0.0 {
                    vecops::axpy(bkj, self.col(k), dst);
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> ColMatrix {
        ColMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// `[A B]`
    pub fn hcat(&self, other: &ColMatrix) -> Result<ColMatrix> {
        if self.rows != other.rows {
            return Err(Error::DimensionMismatch {
                op: "ColMatrix::hcat",
                expected: self.rows,
                got: other.rows,
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(ColMatrix {
            rows: self.rows,
            cols: self.cols + other.cols,
            data,
        })
    }

    /// `self + a * other`
    pub fn add_scaled(&self, a: f64, other: &ColMatrix) -> Result<ColMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                op: "ColMatrix::add_scaled",
                expected: self.rows * self.cols,
                got: other.rows * other.cols,
            });
        }
        let mut out = self.clone();
        vecops::axpy(a, &other.data, &mut out.data);
        Ok(out)
    }

    pub fn scaled(&self, a: f64) -> ColMatrix {
        ColMatrix {
            rows: self.rows,
            cols: self.cols,
            data: vecops::scale(a, &self.data),
        }
    }
}

/// Dense symmetric matrix. Writes go to both triangles, so the stored
/// matrix is exactly symmetric at all times.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    inner: ColMatrix,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            inner: ColMatrix::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix {
            inner: ColMatrix::identity(n),
        }
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut s = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            s.set(i, i, v);
        }
        s
    }

    /// Evaluates `f` on the upper triangle (`i <= j`) and mirrors it.
    pub fn from_upper(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut s = Self::zeros(n);
        for j in 0..n {
            for i in 0..=j {
                s.set(i, j, f(i, j));
            }
        }
        s
    }

    /// Symmetrises a square matrix as `(A + Aᵀ) / 2`.
    pub fn from_dense(a: &ColMatrix) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(Error::DimensionMismatch {
                op: "SymMatrix::from_dense",
                expected: a.rows(),
                got: a.cols(),
            });
        }
        Ok(Self::from_upper(a.rows(), |i, j| {
            if i == j {
                a.get(i, i)
            } else {
                0.5 * (a.get(i, j) + a.get(j, i))
            }
        }))
    }

    pub fn from_row_major(n: usize, values: &[f64]) -> Result<Self> {
        Self::from_dense(&ColMatrix::from_row_major(n, n, values)?)
    }

    pub fn order(&self) -> usize {
        self.inner.rows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner.get(i, j)
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.inner.set(i, j, v);
        self.inner.set(j, i, v);
    }

    pub fn as_dense(&self) -> &ColMatrix {
        &self.inner
    }

    pub fn into_dense(self) -> ColMatrix {
        self.inner
    }

    pub fn is_finite(&self) -> bool {
        self.inner.is_finite()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.inner.mul_vec(v)
    }

    /// `self + a * other`
    pub fn add_scaled(&self, a: f64, other: &SymMatrix) -> Result<SymMatrix> {
        Ok(SymMatrix {
            inner: self.inner.add_scaled(a, &other.inner)?,
        })
    }

    pub fn scaled(&self, a: f64) -> SymMatrix {
        SymMatrix {
            inner: self.inner.scaled(a),
        }
    }
}

/// Spectral decomposition `A = Q diag(values) Qᵀ` with descending eigenvalues.
#[derive(Debug, Clone)]
pub struct EigenDecomp {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, in the order of `values`.
    pub vectors: ColMatrix,
}

impl EigenDecomp {
    /// `Q diag(f(λ)) Qᵀ`
    pub fn spectral_map(&self, mut f: impl FnMut(f64) -> f64) -> SymMatrix {
        let n = self.values.len();
        let mapped: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        SymMatrix::from_upper(n, |i, j| {
            let mut acc = 0.0;
            for (k, &lk) in mapped.iter().enumerate() {
                if lk != 0.0 {
                    acc += self.vectors.get(i, k) * lk * self.vectors.get(j, k);
                }
            }
            acc
        })
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.spectral_map(|l| l)
    }
}

/// `AᵀB` for matrices with matching row counts.
pub fn gram(a: &ColMatrix, b: &ColMatrix) -> Result<ColMatrix> {
    if a.rows() != b.rows() {
        return Err(Error::DimensionMismatch {
            op: "gram",
            expected: a.rows(),
            got: b.rows(),
        });
    }
    Ok(ColMatrix::from_fn(a.cols(), b.cols(), |i, j| {
        vecops::dot(a.col(i), b.col(j))
    }))
}

/// `AᵀA`, computed on the upper triangle only.
pub fn gram_sym(a: &ColMatrix) -> SymMatrix {
    SymMatrix::from_upper(a.cols(), |i, j| vecops::dot(a.col(i), a.col(j)))
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Eigenvalues come back sorted in descending order; equal eigenvalues keep
/// the order in which they appear on the diagonal after the final sweep.
pub fn sym_eig(a: &SymMatrix) -> Result<EigenDecomp> {
    if !a.is_finite() {
        return Err(Error::NonFinite("sym_eig input"));
    }
    let n = a.order();
    let mut m = a.as_dense().clone();
    let mut v = ColMatrix::identity(n);

    for sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        let mut diag = 0.0;
        for j in 0..n {
            for i in 0..n {
                let x = m.get(i, j);
                if i == j {
                    diag += x * x;
                } else {
                    off += x * x;
                }
            }
        }
        if off == 0.0 || off <= (f64::EPSILON * f64::EPSILON) * 1e-4 * diag {
            break;
        }

        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                // Negligible against both diagonal entries: annihilate directly.
                let g = 100.0 * apq.abs();
                if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    m.set(p, q, 0.0);
                    m.set(q, p, 0.0);
                    continue;
                }

                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = m.get(r, p);
                    let arq = m.get(r, q);
                    let nrp = c * arp - s * arq;
                    let nrq = s * arp + c * arq;
                    m.set(r, p, nrp);
                    m.set(p, r, nrp);
                    m.set(r, q, nrq);
                    m.set(q, r, nrq);
                }
                m.set(p, p, app - t * apq);
                m.set(q, q, aqq + t * apq);
                m.set(p, q, 0.0);
                m.set(q, p, 0.0);

                for r in 0..n {
                    let vrp = v.get(r, p);
                    let vrq = v.get(r, q);
                    v.set(r, p, c * vrp - s * vrq);
                    v.set(r, q, s * vrp + c * vrq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).total_cmp(&m.get(i, i)));
    let values = order.iter().map(|&i| m.get(i, i)).collect();
    let mut vectors = ColMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.col_mut(dst).copy_from_slice(v.col(src));
    }
    Ok(EigenDecomp { values, vectors })
}

/// Threshold below which a (clamped) eigenvalue is treated as zero.
fn rank_cutoff(values: &[f64], rank_rtol: f64) -> f64 {
    let lmax = values.first().copied().unwrap_or(0.0).max(0.0);
    rank_rtol * lmax
}

/// Moore–Penrose pseudoinverse of a positive semidefinite matrix.
///
/// Negative eigenvalues (roundoff) are clamped to zero, and eigenvalues at
/// or below `rank_rtol * λ_max` are inverted as zero.
pub fn pinv_psd(z: &SymMatrix, rank_rtol: f64) -> Result<SymMatrix> {
    let eig = sym_eig(z)?;
    let cutoff = rank_cutoff(&eig.values, rank_rtol);
    Ok(eig.spectral_map(|l| {
        let l = l.max(0.0);
        if l > cutoff && l > 0.0 {
            1.0 / l
        } else {
            0.0
        }
    }))
}

/// `Z† rhs` for a positive semidefinite `Z`; see [`pinv_psd`] for the rank rule.
pub fn pinv_solve(z: &SymMatrix, rhs: &[f64], rank_rtol: f64) -> Result<Vec<f64>> {
    if rhs.len() != z.order() {
        return Err(Error::DimensionMismatch {
            op: "pinv_solve",
            expected: z.order(),
            got: rhs.len(),
        });
    }
    if !vecops::all_finite(rhs) {
        return Err(Error::NonFinite("pinv_solve rhs"));
    }
    let eig = sym_eig(z)?;
    let cutoff = rank_cutoff(&eig.values, rank_rtol);
    let n = z.order();
    let mut out = vec![0.0; n];
    for (k, &l) in eig.values.iter().enumerate() {
        let l = l.max(0.0);
        if l > cutoff && l > 0.0 {
            let q = eig.vectors.col(k);
            let coeff = vecops::dot(q, rhs) / l;
            vecops::axpy(coeff, q, &mut out);
        }
    }
    Ok(out)
}

/// Principal square root of a PSD matrix, negative eigenvalues clamped to zero.
pub fn sqrt_psd(w: &SymMatrix) -> Result<SymMatrix> {
    Ok(sym_eig(w)?.spectral_map(|l| l.max(0.0).sqrt()))
}

/// Largest eigenvalue of `W S` for PSD `W` and symmetric `S`.
///
/// Computed as `λ_max(W^{1/2} S W^{1/2})`, which is similar to `W S` and
/// symmetric, so the spectrum is real.
pub fn lambda_max_product(w: &SymMatrix, s: &SymMatrix) -> Result<f64> {
    if w.order() != s.order() {
        return Err(Error::DimensionMismatch {
            op: "lambda_max_product",
            expected: w.order(),
            got: s.order(),
        });
    }
    if w.order() == 0 {
        return Ok(0.0);
    }
    let root = sqrt_psd(w)?;
    let inner = root
        .as_dense()
        .matmul(s.as_dense())?
        .matmul(root.as_dense())?;
    let sym = SymMatrix::from_dense(&inner)?;
    Ok(sym_eig(&sym)?.values[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn gram_of_identity_columns() {
        let a = ColMatrix::identity(2);
        let g = gram(&a, &a).unwrap();
        assert_eq!(g, ColMatrix::identity(2));
        assert_eq!(gram_sym(&a), SymMatrix::identity(2));
    }

    #[test]
    fn gram_of_empty_history() {
        let a = ColMatrix::zeros(4, 0);
        let g = gram(&a, &a).unwrap();
        assert_eq!((g.rows(), g.cols()), (0, 0));
        assert_eq!(gram_sym(&a).order(), 0);
    }

    #[test]
    fn gram_rejects_row_mismatch() {
        let a = ColMatrix::zeros(3, 2);
        let b = ColMatrix::zeros(4, 2);
        assert!(matches!(gram(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn gram_self_is_bitwise_symmetric() {
        let a = ColMatrix::from_fn(7, 4, |i, j| ((i * 3 + j * 5) as f64).sin());
        let g = gram(&a, &a).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(g.get(i, j).to_bits(), g.get(j, i).to_bits());
            }
        }
    }

    #[test]
    fn eig_of_diagonal() {
        let e = sym_eig(&SymMatrix::from_diag(&[1.0, 3.0])).unwrap();
        assert_eq!(e.values, vec![3.0, 1.0]);
        assert!(approx(e.vectors.get(1, 0).abs(), 1.0, 1e-15));
        assert!(approx(e.vectors.get(0, 1).abs(), 1.0, 1e-15));
    }

    #[test]
    fn eig_of_swap() {
        let a = SymMatrix::from_row_major(2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let e = sym_eig(&a).unwrap();
        assert!(approx(e.values[0], 1.0, 1e-14));
        assert!(approx(e.values[1], -1.0, 1e-14));
    }

    #[test]
    fn eig_rejects_nan() {
        let a = SymMatrix::from_diag(&[1.0, f64::NAN]);
        assert!(matches!(sym_eig(&a), Err(Error::NonFinite(_))));
    }

    #[test]
    fn eig_of_empty() {
        let e = sym_eig(&SymMatrix::zeros(0)).unwrap();
        assert!(e.values.is_empty());
    }

    #[test]
    fn pinv_identity() {
        let x = pinv_solve(&SymMatrix::identity(2), &[1.0, 2.0], 1e-12).unwrap();
        assert!(approx(x[0], 1.0, 1e-15) && approx(x[1], 2.0, 1e-15));
    }

    #[test]
    fn pinv_annihilates_null_space() {
        let z = SymMatrix::from_diag(&[1.0, 0.0]);
        let x = pinv_solve(&z, &[1.0, 1.0], 1e-12).unwrap();
        assert_eq!(x, vec![1.0, 0.0]);
    }

    #[test]
    fn pinv_clamps_negative_roundoff() {
        let z = SymMatrix::from_diag(&[2.0, -1e-18]);
        let x = pinv_solve(&z, &[2.0, 5.0], 1e-12).unwrap();
        assert!(approx(x[0], 1.0, 1e-15));
        assert_eq!(x[1], 0.0);
    }

    #[test]
    fn pinv_of_zero_matrix_is_zero() {
        let x = pinv_solve(&SymMatrix::zeros(3), &[1.0, 2.0, 3.0], 1e-12).unwrap();
        assert_eq!(x, vec![0.0; 3]);
    }

    #[test]
    fn lambda_max_product_zero_s() {
        let w = gram_sym(&ColMatrix::from_fn(5, 3, |i, j| (i + 2 * j) as f64 * 0.1));
        assert_eq!(lambda_max_product(&w, &SymMatrix::zeros(3)).unwrap(), 0.0);
    }

    #[test]
    fn lambda_max_product_two_by_two() {
        let w = SymMatrix::identity(2);
        let s = SymMatrix::from_row_major(2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert!(approx(lambda_max_product(&w, &s).unwrap(), 1.0, 1e-14));
    }

    #[test]
    fn lambda_max_product_dimension_mismatch() {
        let r = lambda_max_product(&SymMatrix::identity(2), &SymMatrix::identity(3));
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }
}
