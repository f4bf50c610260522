//! Dense linear algebra used throughout the crate: a row-major [`Matrix`],
//! one-sided Jacobi SVD, cyclic Jacobi symmetric eigendecomposition, ridge
//! least squares through accumulated normal equations, and orthogonal
//! projection residuals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Result<Self> {
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::Shape(format!("columns must have length {rows}")));
        }
        let cols = columns.len();
        let mut m = Matrix::zeros(rows, cols);
        for (j, c) in columns.iter().enumerate() {
            for (i, &x) in c.iter().enumerate() {
                m.data[i * cols + j] = x;
            }
        }
        Ok(m)
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Matrix::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    /// First `k` columns.
    pub fn leading_columns(&self, k: usize) -> Matrix {
        let k = k.min(self.cols);
        let mut m = Matrix::zeros(self.rows, k);
        for i in 0..self.rows {
            m.row_mut(i).copy_from_slice(&self.row(i)[..k]);
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · v`
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::Shape(format!(
                "matrix has {} columns, vector has {} entries",
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    /// `selfᵀ · v`
    pub fn tr_matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows {
            return Err(Error::Shape(format!(
                "matrix has {} rows, vector has {} entries",
                self.rows,
                v.len()
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            axpy(vi, self.row(i), &mut out);
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::Shape("operands differ in shape".into()));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Thin singular value decomposition `a = u · diag(s) · vᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdResult {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub v: Matrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for i in 0..us.rows {
            for (x, s) in us.row_mut(i).iter_mut().zip(&self.singular_values) {
                *x *= s;
            }
        }
        us.matmul(&self.v.transpose())
            .expect("svd factors have consistent shapes")
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;

fn check_finite_nonempty(a: &Matrix) -> Result<()> {
    if a.rows == 0 || a.cols == 0 {
        return Err(Error::InvalidMatrix("empty matrix".into()));
    }
    if !a.is_finite() {
        return Err(Error::InvalidMatrix("non-finite entry".into()));
    }
    Ok(())
}

/// Thin SVD with `r = min(m, n)` singular triplets, sorted descending.
///
/// Left vectors belonging to (numerically) zero singular values are completed
/// to an orthonormal set by Gram–Schmidt against the standard basis. Each left
/// singular vector has a nonnegative first nonzero entry; for zero singular
/// values the right vector follows the same convention independently.
pub fn svd(a: &Matrix) -> Result<SvdResult> {
    check_finite_nonempty(a)?;
    if a.rows >= a.cols {
        Ok(jacobi_svd_tall(a))
    } else {
        let t = jacobi_svd_tall(&a.transpose());
        // aᵀ = U S Vᵀ  =>  a = V S Uᵀ; re-normalize signs on the new left side.
        let mut out = SvdResult {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        };
        normalize_signs(&mut out);
        Ok(out)
    }
}

fn jacobi_svd_tall(a: &Matrix) -> SvdResult {
    let (m, n) = a.shape();
    let mut cols = a.columns();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    let tol = f64::EPSILON * m as f64;

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum_or_one() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut cols, p, q, c, s);
                rotate_pair(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = cols.iter().map(|c| norm(c)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));

    let smax = norms[order[0]];
    let zero_tol = smax * f64::EPSILON * (m.max(n) as f64);
    let mut u_cols: Vec<Option<Vec<f64>>> = Vec::with_capacity(n);
    let mut singular_values = Vec::with_capacity(n);
    let mut v_cols = Vec::with_capacity(n);
    for &j in &order {
        let s = norms[j];
        singular_values.push(s);
        if s > zero_tol && s > 0.0 {
            u_cols.push(Some(cols[j].iter().map(|x| x / s).collect()));
        } else {
            u_cols.push(None);
        }
        v_cols.push(v[j].clone());
    }
    let u_cols = complete_orthonormal(m, u_cols);

    let mut out = SvdResult {
        u: Matrix::from_columns(m, &u_cols).expect("column lengths match"),
        singular_values,
        v: Matrix::from_columns(n, &v_cols).expect("column lengths match"),
    };
    normalize_signs(&mut out);
    out
}

trait SignumOrOne {
    fn signum_or_one(self) -> f64;
}

impl SignumOrOne for f64 {
    #[inline]
    fn signum_or_one(self) -> f64 {
        if self >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = cols.split_at_mut(q);
    let cp = &mut head[p];
    let cq = &mut tail[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Fills the `None` slots with unit vectors orthogonal to every other column.
fn complete_orthonormal(m: usize, cols: Vec<Option<Vec<f64>>>) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = cols.iter().flatten().cloned().collect();
    let mut next_candidate = 0;
    cols.into_iter()
        .map(|c| match c {
            Some(c) => c,
            None => loop {
                assert!(next_candidate < m, "ran out of completion candidates");
                let mut e = vec![0.0; m];
                e[next_candidate] = 1.0;
                next_candidate += 1;
                for _ in 0..2 {
                    for b in &basis {
                        let proj = dot(b, &e);
                        axpy(-proj, b, &mut e);
                    }
                }
                let nrm = norm(&e);
                if nrm > 0.5 {
                    e.iter_mut().for_each(|x| *x /= nrm);
                    basis.push(e.clone());
                    break e;
                }
            },
        })
        .collect()
}

fn first_significant_sign(col: &[f64]) -> f64 {
    let scale = col.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    col.iter()
        .find(|x| x.abs() > 1e-12 * scale.max(f64::MIN_POSITIVE))
        .map_or(1.0, |x| x.signum())
}

fn normalize_signs(svd: &mut SvdResult) {
    let smax = svd.singular_values.first().copied().unwrap_or(0.0);
    let zero_tol = smax * f64::EPSILON * (svd.u.rows.max(svd.v.rows) as f64);
    for j in 0..svd.singular_values.len() {
        let su = first_significant_sign(&svd.u.column(j));
        let is_zero = svd.singular_values[j] <= zero_tol;
        let sv = if is_zero {
            first_significant_sign(&svd.v.column(j))
        } else {
            su
        };
        if su < 0.0 {
            for i in 0..svd.u.rows {
                let x = svd.u.get(i, j);
                svd.u.set(i, j, -x);
            }
        }
        if sv < 0.0 {
            for i in 0..svd.v.rows {
                let x = svd.v.get(i, j);
                svd.v.set(i, j, -x);
            }
        }
    }
}

fn check_symmetric(s: &Matrix) -> Result<()> {
    if s.rows != s.cols {
        return Err(Error::InvalidMatrix(format!(
            "expected square matrix, got {}x{}",
            s.rows, s.cols
        )));
    }
    if s.rows == 0 {
        return Err(Error::InvalidMatrix("empty matrix".into()));
    }
    if !s.is_finite() {
        return Err(Error::InvalidMatrix("non-finite entry".into()));
    }
    let tol = 1e-10 * s.max_abs().max(1.0);
    for i in 0..s.rows {
        for j in i + 1..s.cols {
            if (s.get(i, j) - s.get(j, i)).abs() > tol {
                return Err(Error::InvalidMatrix(format!(
                    "asymmetric at ({i},{j}): {} vs {}",
                    s.get(i, j),
                    s.get(j, i)
                )));
            }
        }
    }
    Ok(())
}

/// Eigenvalues (ascending) and matching eigenvectors (as columns) of a
/// symmetric matrix, by cyclic Jacobi rotations.
pub fn symmetric_eigen(s: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    check_symmetric(s)?;
    let n = s.rows;
    let mut a = s.clone();
    // Symmetrize exactly so rotations act on one consistent matrix.
    for i in 0..n {
        for j in i + 1..n {
            let avg = 0.5 * (a.get(i, j) + a.get(j, i));
            a.set(i, j, avg);
            a.set(j, i, avg);
        }
    }
    let mut vecs = Matrix::identity(n);
    let scale = a.frobenius_norm();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let apq = a.get(p, q);
                let negligible = 0.5 * f64::EPSILON * (a.get(p, p) * a.get(q, q)).abs().sqrt();
                if apq.abs() <= negligible.max(scale * 1e-18) {
                    continue;
                }
                rotated = true;
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum_or_one() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - sn * akq);
                    a.set(k, q, sn * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - sn * aqk);
                    a.set(q, k, sn * apk + c * aqk);
                }
                a.set(p, q, 0.0);
                a.set(q, p, 0.0);
                for k in 0..n {
                    let vkp = vecs.get(k, p);
                    let vkq = vecs.get(k, q);
                    vecs.set(k, p, c * vkp - sn * vkq);
                    vecs.set(k, q, sn * vkp + c * vkq);
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let vals: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]).then(i.cmp(&j)));
    let sorted_vals = order.iter().map(|&i| vals[i]).collect();
    let sorted_vecs: Vec<Vec<f64>> = order.iter().map(|&j| vecs.column(j)).collect();
    Ok((sorted_vals, Matrix::from_columns(n, &sorted_vecs)?))
}

/// Smallest eigenvalue of a symmetric positive semidefinite matrix.
pub fn min_eigenvalue(s: &Matrix) -> Result<f64> {
    let (vals, _) = symmetric_eigen(s)?;
    let min = vals[0];
    let tol = 1e-10 * s.max_abs().max(1.0);
    if min < -tol {
        return Err(Error::InvalidMatrix(format!(
            "matrix is not positive semidefinite (eigenvalue {min:e})"
        )));
    }
    Ok(min.max(0.0))
}

/// `‖v − B Bᵀ v‖₂` for a matrix `b` with orthonormal columns.
pub fn projection_residual_norm(b: &Matrix, v: &[f64]) -> Result<f64> {
    if b.rows != v.len() {
        return Err(Error::Shape(format!(
            "basis has {} rows, vector has {} entries",
            b.rows,
            v.len()
        )));
    }
    check_orthonormal_columns(b, 1e-8)?;
    let coeffs = b.tr_matvec(v)?;
    let proj = b.matvec(&coeffs)?;
    let resid: Vec<f64> = v.iter().zip(&proj).map(|(a, p)| a - p).collect();
    Ok(norm(&resid).min(norm(v)))
}

/// Fails with [`Error::InvalidBasis`] unless `‖BᵀB − I‖_max ≤ tol`.
pub fn check_orthonormal_columns(b: &Matrix, tol: f64) -> Result<()> {
    let gram = b.transpose().matmul(b)?;
    let dev = gram.sub(&Matrix::identity(b.cols))?.max_abs();
    if dev > tol {
        return Err(Error::InvalidBasis(format!(
            "columns deviate from orthonormal by {dev:e}"
        )));
    }
    Ok(())
}

/// Running `XᵀX`, `Xᵀy`, `yᵀy` and row count for a least-squares problem.
///
/// Rows are added one at a time, so the design matrix never has to be
/// materialized. Zero entries of a row are skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalEquations {
    dim: usize,
    gram: Vec<f64>,
    rhs: Vec<f64>,
    label_sq: f64,
    count: usize,
    nz: Vec<usize>,
}

impl NormalEquations {
    pub fn new(dim: usize) -> Self {
        NormalEquations {
            dim,
            gram: vec![0.0; dim * dim],
            rhs: vec![0.0; dim],
            label_sq: 0.0,
            count: 0,
            nz: Vec::with_capacity(dim),
        }
    }

    pub fn from_design(x: &Matrix, y: &[f64]) -> Result<Self> {
        if x.rows != y.len() {
            return Err(Error::Shape(format!(
                "design has {} rows but {} labels",
                x.rows,
                y.len()
            )));
        }
        let mut ne = NormalEquations::new(x.cols);
        for (i, &yi) in y.iter().enumerate() {
            ne.add_row(x.row(i), yi);
        }
        Ok(ne)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn add_row(&mut self, x: &[f64], y: f64) {
        debug_assert_eq!(x.len(), self.dim);
        self.nz.clear();
        self.nz
            .extend(x.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i));
        let dim = self.dim;
        for (a, &i) in self.nz.iter().enumerate() {
            let xi = x[i];
            self.rhs[i] += xi * y;
            let row = &mut self.gram[i * dim..(i + 1) * dim];
            for &j in &self.nz[a..] {
                row[j] += xi * x[j];
            }
        }
        self.label_sq += y * y;
        self.count += 1;
    }

    /// Adds a row that is zero outside `x[offset..offset + block.len()]`.
    pub fn add_block_row(&mut self, offset: usize, block: &[f64], y: f64) {
        debug_assert!(offset + block.len() <= self.dim);
        let dim = self.dim;
        for (a, &xa) in block.iter().enumerate() {
            if xa == 0.0 {
                continue;
            }
            let i = offset + a;
            self.rhs[i] += xa * y;
            let row = &mut self.gram[i * dim..(i + 1) * dim];
            for (b, &xb) in block.iter().enumerate().skip(a) {
                row[offset + b] += xa * xb;
            }
        }
        self.label_sq += y * y;
        self.count += 1;
    }

    /// Full symmetric `XᵀX`.
    pub fn gram(&self) -> Matrix {
        let n = self.dim;
        let mut g = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.gram[i * n + j];
                g.set(i, j, v);
                g.set(j, i, v);
            }
        }
        g
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// Minimizer of `(1/2n)‖Xw − y‖² + (λ/2)‖w‖²`, i.e.
    /// `w = (XᵀX + nλI)⁻¹ Xᵀy`.
    pub fn solve_ridge(&self, lambda: f64) -> Result<Vec<f64>> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Domain(format!("ridge penalty must be >= 0, got {lambda}")));
        }
        if self.count == 0 {
            return Err(Error::Domain("no rows".into()));
        }
        let mut g = self.gram();
        let shift = self.count as f64 * lambda;
        for i in 0..self.dim {
            let v = g.get(i, i) + shift;
            g.set(i, i, v);
        }
        cholesky_solve(&g, &self.rhs).ok_or_else(|| {
            Error::SingularSystem(format!(
                "XᵀX + nλI is not numerically positive definite (dim {}, n {}, λ {lambda})",
                self.dim, self.count
            ))
        })
    }

    /// Minimal-norm least-squares solution `w = (XᵀX)⁺ Xᵀy`.
    pub fn solve_min_norm(&self) -> Result<Vec<f64>> {
        let (vals, vecs) = symmetric_eigen(&self.gram())?;
        let vmax = vals.last().copied().unwrap_or(0.0).max(0.0);
        let cutoff = vmax * 1e-12 * self.dim as f64;
        let mut w = vec![0.0; self.dim];
        for (k, &lam) in vals.iter().enumerate() {
            if lam <= cutoff || lam <= 0.0 {
                continue;
            }
            let vk = vecs.column(k);
            let coef = dot(&vk, &self.rhs) / lam;
            axpy(coef, &vk, &mut w);
        }
        Ok(w)
    }

    /// Ridge solve, falling back to the minimal-norm solution when `λ = 0`
    /// and the system is singular.
    pub fn solve_ridge_or_min_norm(&self, lambda: f64) -> Result<Vec<f64>> {
        match self.solve_ridge(lambda) {
            Err(Error::SingularSystem(_)) if lambda == 0.0 => self.solve_min_norm(),
            other => other,
        }
    }

    /// Mean squared residual `‖Xw − y‖² / n`.
    pub fn mean_squared_residual(&self, w: &[f64]) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        let gw = self.gram().matvec(w).expect("dimension checked by caller");
        let sse = self.label_sq - 2.0 * dot(w, &self.rhs) + dot(w, &gw);
        sse.max(0.0) / self.count as f64
    }
}

/// `argmin (1/2n)‖Xw − y‖² + (λ/2)‖w‖²`.
pub fn ridge_solve(x: &Matrix, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if x.rows == 0 {
        return Err(Error::Domain("ridge regression needs at least one row".into()));
    }
    if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidMatrix("non-finite design or labels".into()));
    }
    NormalEquations::from_design(x, y)?.solve_ridge(lambda)
}

/// Solves `g w = b` for symmetric positive definite `g`; `None` when a pivot
/// falls below the relative singularity threshold.
fn cholesky_solve(g: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = g.rows;
    let max_diag = (0..n).map(|i| g.get(i, i)).fold(0.0_f64, f64::max);
    if max_diag <= 0.0 {
        return None;
    }
    let tol = max_diag * 1e-12;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = g.get(j, j);
        for k in 0..j {
            d -= l.get(j, k).powi(2);
        }
        if d <= tol {
            return None;
        }
        let ljj = d.sqrt();
        l.set(j, j, ljj);
        for i in j + 1..n {
            let mut s = g.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / ljj);
        }
    }
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l.get(i, k) * z[k];
        }
        z[i] = s / l.get(i, i);
    }
    let mut w = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..n {
            s -= l.get(k, i) * w[k];
        }
        w[i] = s / l.get(i, i);
    }
    Some(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn svd_of_identity() {
        let r = svd(&Matrix::identity(2)).unwrap();
        assert_eq!(r.singular_values, vec![1.0, 1.0]);
        assert_abs_diff_eq!(r.u.get(0, 0).abs(), 1.0);
        assert_abs_diff_eq!(r.u.get(1, 1).abs(), 1.0);
        assert_abs_diff_eq!(r.v.get(0, 0).abs(), 1.0);
    }

    #[test]
    fn svd_of_rank_one_diagonal() {
        let a = Matrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let r = svd(&a).unwrap();
        assert_abs_diff_eq!(r.singular_values[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.singular_values[1], 0.0, epsilon = 1e-14);
        check_orthonormal_columns(&r.u, 1e-12).unwrap();
        check_orthonormal_columns(&r.v, 1e-12).unwrap();
        assert!(r.reconstruct().sub(&a).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn svd_wide_input_and_signs() {
        let a = Matrix::from_rows(&[vec![1.0, -2.0, 0.5], vec![-3.0, 0.0, 4.0]]).unwrap();
        let r = svd(&a).unwrap();
        assert_eq!(r.u.shape(), (2, 2));
        assert_eq!(r.v.shape(), (3, 2));
        assert!(r.reconstruct().sub(&a).unwrap().max_abs() < 1e-12);
        for j in 0..2 {
            assert!(first_significant_sign(&r.u.column(j)) > 0.0);
        }
    }

    #[test]
    fn svd_rejects_non_finite() {
        let a = Matrix::from_rows(&[vec![1.0, f64::NAN]]).unwrap();
        assert!(matches!(svd(&a), Err(Error::InvalidMatrix(_))));
        assert!(matches!(svd(&Matrix::zeros(0, 0)), Err(Error::InvalidMatrix(_))));
    }

    #[test]
    fn svd_of_zero_matrix_is_orthonormal() {
        let r = svd(&Matrix::zeros(4, 2)).unwrap();
        assert_eq!(r.singular_values, vec![0.0, 0.0]);
        check_orthonormal_columns(&r.u, 1e-14).unwrap();
    }

    #[test]
    fn ridge_identity_design() {
        let x = Matrix::identity(2);
        assert_eq!(ridge_solve(&x, &[1.0, 2.0], 0.0).unwrap(), vec![1.0, 2.0]);
        let w = ridge_solve(&x, &[1.0, 2.0], 0.5).unwrap();
        assert_abs_diff_eq!(w[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn ridge_singular_without_penalty() {
        let x = Matrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        assert!(matches!(
            ridge_solve(&x, &[1.0, 2.0], 0.0),
            Err(Error::SingularSystem(_))
        ));
        assert!(ridge_solve(&x, &[1.0, 2.0], 1e-3).is_ok());
        assert!(matches!(ridge_solve(&x, &[1.0], 0.1), Err(Error::Shape(_))));
        assert!(matches!(
            ridge_solve(&x, &[1.0, 2.0], -1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn min_norm_solution_of_underdetermined_system() {
        let x = Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let ne = NormalEquations::from_design(&x, &[2.0]).unwrap();
        let w = ne.solve_ridge_or_min_norm(0.0).unwrap();
        assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 1.0, epsilon = 1e-12);
        assert!(ne.mean_squared_residual(&w) < 1e-20);
    }

    #[test]
    fn block_rows_match_dense_rows() {
        let mut a = NormalEquations::new(6);
        let mut b = NormalEquations::new(6);
        a.add_row(&[0.0, 0.0, 1.0, -2.0, 0.5, 0.0], 3.0);
        b.add_block_row(2, &[1.0, -2.0, 0.5], 3.0);
        assert_eq!(
            a,
            NormalEquations {
                nz: a.nz.clone(),
                ..b
            }
        );
    }

    #[test]
    fn min_eigenvalue_basics() {
        assert_abs_diff_eq!(min_eigenvalue(&Matrix::diagonal(&[2.0, 5.0])).unwrap(), 2.0);
        assert_abs_diff_eq!(min_eigenvalue(&Matrix::identity(4)).unwrap(), 1.0);
        let asym = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(min_eigenvalue(&asym), Err(Error::InvalidMatrix(_))));
    }

    #[test]
    fn projection_residual_cases() {
        let b = Matrix::from_columns(3, &[vec![1.0, 0.0, 0.0]]).unwrap();
        assert_abs_diff_eq!(projection_residual_norm(&b, &[1.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(projection_residual_norm(&b, &[0.0, 1.0, 0.0]).unwrap(), 1.0);
        let bad = Matrix::from_columns(3, &[vec![2.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(
            projection_residual_norm(&bad, &[1.0, 0.0, 0.0]),
            Err(Error::InvalidBasis(_))
        ));
    }
}
