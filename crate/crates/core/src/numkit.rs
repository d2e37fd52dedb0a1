//! Small dense linear algebra kit: matrices, pivoted LU, Newton's method and a
//! Jacobi eigenvalue routine for symmetric matrices.
//!
//! Everything here is sized for systems of a few hundred unknowns at most.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumError {
    #[error("singular matrix: pivot {pivot:.3e} in column {column} below threshold {threshold:.3e}")]
    SingularMatrix { column: usize, pivot: f64, threshold: f64 },
    #[error("newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },
    #[error("matrix is not symmetric (asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Dense row-major real matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row-major data. Panics if the length does not match.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data length mismatch");
        Self { rows, cols, data }
    }

    /// Builds a matrix from nested rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, NumError> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(NumError::DimensionMismatch("ragged rows".into()));
        }
        Ok(Self {
            rows: nrows,
            cols: ncols,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matrix-vector dimension mismatch");
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }

    /// `selfᵀ x` without forming the transpose.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "transpose-vector dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for (r, &xr) in x.iter().enumerate() {
            if xr != 0.0 {
                axpy(xr, self.row(r), &mut out);
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matrix product dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
                axpy(a, orow, dst);
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "elementwise dimension mismatch"
        );
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Symmetric part `(A + Aᵀ)/2`.
    pub fn symmetric_part(&self) -> Matrix {
        self.add(&self.transpose()).scale(0.5)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|r| self.row(r).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Copies `block` into `self` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Matrix) {
        assert!(r0 + block.rows <= self.rows && c0 + block.cols <= self.cols);
        for r in 0..block.rows {
            for c in 0..block.cols {
                self[(r0 + r, c0 + c)] = block[(r, c)];
            }
        }
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Matrix {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols);
        let mut out = Matrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                out[(r, c)] = self[(r0 + r, c0 + c)];
            }
        }
        out
    }

    /// Block-diagonal concatenation.
    pub fn block_diag(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows + b.rows, a.cols + b.cols);
        out.set_block(0, 0, a);
        out.set_block(a.rows, a.cols, b);
        out
    }

    /// Reorders rows and columns: `out[(i, j)] = self[(perm[i], perm[j])]`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> Matrix {
        assert!(self.is_square() && perm.len() == self.rows);
        let n = perm.len();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = self[(perm[i], perm[j])];
            }
        }
        out
    }

    pub fn permute_rows(&self, perm: &[usize]) -> Matrix {
        assert_eq!(perm.len(), self.rows);
        let mut out = Matrix::zeros(self.rows, self.cols);
        for (i, &p) in perm.iter().enumerate() {
            out.data[i * self.cols..(i + 1) * self.cols].copy_from_slice(self.row(p));
        }
        out
    }

    /// Inverse through column-wise LU solves.
    pub fn inverse(&self) -> Result<Matrix, NumError> {
        let lu = Lu::factor(self)?;
        let n = self.rows;
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for c in 0..n {
            e.fill(0.0);
            e[c] = 1.0;
            let col = lu.solve(&e);
            for r in 0..n {
                inv[(r, c)] = col[r];
            }
        }
        Ok(inv)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += a x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scaled(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// LU factorization with partial pivoting, `P A = L U` stored in place.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &Matrix) -> Result<Self, NumError> {
        if !a.is_square() {
            return Err(NumError::DimensionMismatch(format!(
                "LU needs a square matrix, got {}x{}",
                a.rows, a.cols
            )));
        }
        let n = a.rows;
        let mut lu = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let threshold = 1e-14 * a.max_abs();

        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|r| (r, lu[r * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pmax > threshold) {
                return Err(NumError::SingularMatrix {
                    column: k,
                    pivot: pmax,
                    threshold,
                });
            }
            if p != k {
                for c in 0..n {
                    lu.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for r in (k + 1)..n {
                let factor = lu[r * n + k] / pivot;
                lu[r * n + k] = factor;
                if factor != 0.0 {
                    for c in (k + 1)..n {
                        lu[r * n + c] -= factor * lu[k * n + c];
                    }
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            let s: f64 = (0..r).map(|c| self.lu[r * n + c] * x[c]).sum();
            x[r] -= s;
        }
        for r in (0..n).rev() {
            let s: f64 = ((r + 1)..n).map(|c| self.lu[r * n + c] * x[c]).sum();
            x[r] = (x[r] - s) / self.lu[r * n + r];
        }
        x
    }
}

/// Solves `A x = b` with partial pivoting.
pub fn lu_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, NumError> {
    if a.rows != b.len() {
        return Err(NumError::DimensionMismatch(format!(
            "matrix has {} rows, rhs has {} entries",
            a.rows,
            b.len()
        )));
    }
    Ok(Lu::factor(a)?.solve(b))
}

/// Settings for [`newton_solve`].
#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Updates taken even when the initial residual already meets `tol`.
    pub min_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            min_iter: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
}

/// Forward-difference Jacobian with step `sqrt(eps) * (1 + |x_i|)`.
pub fn fd_jacobian(residual: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], r0: &[f64]) -> Matrix {
    let n = x.len();
    let m = r0.len();
    let sqrt_eps = f64::EPSILON.sqrt();
    let mut jac = Matrix::zeros(m, n);
    let mut xp = x.to_vec();
    for c in 0..n {
        let h = sqrt_eps * (1.0 + x[c].abs());
        xp[c] = x[c] + h;
        let rp = residual(&xp);
        xp[c] = x[c];
        for r in 0..m {
            jac[(r, c)] = (rp[r] - r0[r]) / h;
        }
    }
    jac
}

/// Newton's method for `residual(x) = 0`.
///
/// Without an explicit Jacobian a forward-difference approximation is used.
/// Steps that produce a non-finite residual or increase the residual norm are
/// halved up to eight times; after that the full step is taken anyway.
pub fn newton_solve(
    residual: &dyn Fn(&[f64]) -> Vec<f64>,
    jacobian: Option<&dyn Fn(&[f64]) -> Matrix>,
    x0: &[f64],
    opts: NewtonOptions,
) -> Result<NewtonSolution, NumError> {
    assert!(opts.tol > 0.0, "newton tolerance must be positive");
    let mut x = x0.to_vec();
    let mut r = residual(&x);
    if r.len() != x.len() {
        return Err(NumError::DimensionMismatch(format!(
            "residual has {} entries for {} unknowns",
            r.len(),
            x.len()
        )));
    }
    let mut rnorm = finite_norm(&r);

    for iter in 0..opts.max_iter {
        if rnorm == 0.0 || (rnorm <= opts.tol && iter >= opts.min_iter) {
            return Ok(NewtonSolution {
                x,
                iterations: iter,
                residual_norm: rnorm,
            });
        }
        let jac = match jacobian {
            Some(j) => j(&x),
            None => fd_jacobian(residual, &x, &r),
        };
        let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
        let dx = lu_solve(&jac, &neg_r)?;

        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=8 {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(xi, di)| xi + lambda * di).collect();
            let rt = residual(&trial);
            let nt = finite_norm(&rt);
            if nt < rnorm || (nt.is_finite() && lambda < 1.0 / 200.0) {
                accepted = Some((trial, rt, nt));
                break;
            }
            lambda *= 0.5;
        }
        let (xn, rn, nn) = match accepted {
            Some(a) => a,
            None => {
                // no finite improvement along the Newton direction
                return Err(NumError::NoConvergence {
                    iterations: iter + 1,
                    residual: rnorm,
                    last_iterate: x,
                });
            }
        };
        x = xn;
        r = rn;
        rnorm = nn;
    }
    if rnorm <= opts.tol {
        return Ok(NewtonSolution {
            x,
            iterations: opts.max_iter,
            residual_norm: rnorm,
        });
    }
    Err(NumError::NoConvergence {
        iterations: opts.max_iter,
        residual: rnorm,
        last_iterate: x,
    })
}

fn finite_norm(r: &[f64]) -> f64 {
    let n = norm_inf(r);
    if r.iter().all(|v| v.is_finite()) {
        n
    } else {
        f64::INFINITY
    }
}

/// Relative asymmetry `‖A − Aᵀ‖∞ / (1 + ‖A‖∞)`.
pub fn asymmetry(a: &Matrix) -> f64 {
    a.sub(&a.transpose()).norm_inf() / (1.0 + a.norm_inf())
}

/// All eigenvalues of a symmetric matrix via cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(a: &Matrix) -> Result<Vec<f64>, NumError> {
    if !a.is_square() {
        return Err(NumError::DimensionMismatch("eigenvalues need a square matrix".into()));
    }
    let asym = asymmetry(a);
    if asym > 1e-12 {
        return Err(NumError::NotSymmetric { asymmetry: asym });
    }
    let n = a.rows;
    let mut m = a.symmetric_part();
    let scale = m.max_abs().max(f64::MIN_POSITIVE);
    let tol = 1e-10_f64.min(1e-14 * scale);

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_symmetric_eigenvalue(a: &Matrix) -> Result<f64, NumError> {
    let eig = symmetric_eigenvalues(a)?;
    Ok(eig.first().copied().unwrap_or(0.0))
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
pub fn expm(a: &Matrix) -> Matrix {
    assert!(a.is_square());
    let n = a.rows;
    let norm = a.norm_inf();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a.scale(0.5_f64.powi(squarings as i32));
    let mut result = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=20 {
        term = term.matmul(&scaled).scale(1.0 / k as f64);
        result = result.add(&term);
        if term.max_abs() < 1e-18 * result.max_abs() {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    result
}

/// Rank through Gaussian elimination with complete pivoting.
pub fn rank(a: &Matrix, rel_tol: f64) -> usize {
    let mut m = a.clone();
    let (rows, cols) = (m.rows, m.cols);
    let threshold = rel_tol * m.max_abs().max(f64::MIN_POSITIVE);
    let mut rank = 0;
    let mut row_used = vec![false; rows];
    let mut col_used = vec![false; cols];
    loop {
        let mut best = (0, 0, 0.0);
        for r in (0..rows).filter(|&r| !row_used[r]) {
            for c in (0..cols).filter(|&c| !col_used[c]) {
                if m[(r, c)].abs() > best.2 {
                    best = (r, c, m[(r, c)].abs());
                }
            }
        }
        if best.2 <= threshold {
            return rank;
        }
        let (pr, pc, _) = best;
        row_used[pr] = true;
        col_used[pc] = true;
        rank += 1;
        for r in (0..rows).filter(|&r| !row_used[r]) {
            let f = m[(r, pc)] / m[(pr, pc)];
            for c in 0..cols {
                let v = m[(pr, c)];
                m[(r, c)] -= f * v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_identity_diagonal_permutation() {
        let x = lu_solve(&Matrix::identity(3), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);

        let a = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 4.0]]).unwrap();
        assert_eq!(lu_solve(&a, &[2.0, 4.0]).unwrap(), vec![1.0, 1.0]);

        let p = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(lu_solve(&p, &[5.0, 7.0]).unwrap(), vec![7.0, 5.0]);
    }

    #[test]
    fn lu_detects_singular() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(
            lu_solve(&a, &[1.0, 1.0]),
            Err(NumError::SingularMatrix { .. })
        ));
        assert!(matches!(
            lu_solve(&Matrix::identity(2), &[1.0]),
            Err(NumError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn newton_affine_one_iteration() {
        let sol = newton_solve(&|x| vec![x[0] - 3.0], None, &[0.0], NewtonOptions::default())
            .unwrap();
        assert!((sol.x[0] - 3.0).abs() < 1e-12);
        assert_eq!(sol.iterations, 1);
    }

    #[test]
    fn newton_square_root_of_four() {
        let opts = NewtonOptions {
            tol: 1e-12,
            ..NewtonOptions::default()
        };
        let jac = |x: &[f64]| Matrix::from_row_major(1, 1, vec![2.0 * x[0]]);
        let sol = newton_solve(&|x| vec![x[0] * x[0] - 4.0], Some(&jac), &[3.0], opts).unwrap();
        assert!((sol.x[0] - 2.0).abs() <= 1e-12);

        let fd = newton_solve(&|x| vec![x[0] * x[0] - 4.0], None, &[3.0], opts).unwrap();
        assert!((fd.x[0] - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn newton_no_real_root() {
        let err = newton_solve(&|x| vec![x[0] * x[0] + 1.0], None, &[1.0], NewtonOptions::default())
            .unwrap_err();
        match err {
            NumError::NoConvergence { residual, last_iterate, .. } => {
                assert!(residual >= 1.0);
                assert_eq!(last_iterate.len(), 1);
            }
            // a Newton step landing exactly on x = 0 gives a zero derivative
            NumError::SingularMatrix { .. } => {}
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn min_eigenvalue_examples() {
        let d = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 5.0]]).unwrap();
        assert!((min_symmetric_eigenvalue(&d).unwrap() - 2.0).abs() < 1e-10);
        let s = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!((min_symmetric_eigenvalue(&s).unwrap() + 1.0).abs() < 1e-10);
        let one = Matrix::from_rows(&[vec![1.0]]).unwrap();
        assert!((min_symmetric_eigenvalue(&one).unwrap() - 1.0).abs() < 1e-10);
        let ns = Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(
            min_symmetric_eigenvalue(&ns),
            Err(NumError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn expm_of_rotation_generator() {
        let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let e = expm(&a.scale(2.0));
        assert!((e[(0, 0)] - 2.0_f64.cos()).abs() < 1e-13);
        assert!((e[(0, 1)] - 2.0_f64.sin()).abs() < 1e-13);
        assert!((e[(1, 0)] + 2.0_f64.sin()).abs() < 1e-13);
    }

    #[test]
    fn rank_of_dependent_rows() {
        let a = Matrix::from_rows(&[vec![1.0, -1.0, 0.0], vec![2.0, -2.0, 0.0]]).unwrap();
        assert_eq!(rank(&a, 1e-12), 1);
        assert_eq!(rank(&Matrix::identity(3), 1e-12), 3);
        assert_eq!(rank(&Matrix::zeros(0, 2), 1e-12), 0);
    }
}
