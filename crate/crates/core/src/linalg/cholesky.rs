use crate::error::{Error, Result};
use crate::linalg::matrix::{axpy, dot, Matrix};

/// Relative asymmetry accepted by [`solve_spd`].
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Lower-triangular Cholesky factor, `a = L·Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    /// Factors `a`, failing when a pivot is `<= min_pivot`.
    pub fn factor(a: &Matrix, min_pivot: f64) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionError(format!(
                "Cholesky needs a square matrix, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let lj = &l.row(j)[..j];
            let pivot = a[(j, j)] - dot(lj, lj);
            if pivot.is_nan() || pivot <= min_pivot {
                return Err(Error::SingularMatrix { row: j, pivot });
            }
            let diag = pivot.sqrt();
            l[(j, j)] = diag;
            for i in j + 1..n {
                let s = a[(i, j)] - dot(&l.row(i)[..j], &l.row(j)[..j]);
                l[(i, j)] = s / diag;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn lower(&self) -> &Matrix {
        &self.l
    }

    /// Solves `L·Lᵀ·S = b` column-block at a time.
    pub fn solve(&self, b: &Matrix) -> Result<Matrix> {
        let n = self.l.rows();
        if b.rows() != n {
            return Err(Error::DimensionError(format!(
                "right-hand side has {} rows, system has {n}",
                b.rows()
            )));
        }
        let m = b.cols();
        let mut y = b.clone();
        // forward: L·Y = B
        for i in 0..n {
            let (done, rest) = y.as_mut_slice().split_at_mut(i * m);
            let yi = &mut rest[..m];
            for k in 0..i {
                let lik = self.l[(i, k)];
                if lik != 0.0 {
                    axpy(-lik, &done[k * m..(k + 1) * m], yi);
                }
            }
            let d = self.l[(i, i)];
            yi.iter_mut().for_each(|v| *v /= d);
        }
        // backward: Lᵀ·S = Y
        for i in (0..n).rev() {
            let (head, tail) = y.as_mut_slice().split_at_mut((i + 1) * m);
            let si = &mut head[i * m..];
            for k in i + 1..n {
                let lki = self.l[(k, i)];
                if lki != 0.0 {
                    axpy(-lki, &tail[(k - i - 1) * m..(k - i) * m], si);
                }
            }
            let d = self.l[(i, i)];
            si.iter_mut().for_each(|v| *v /= d);
        }
        Ok(y)
    }
}

/// Solves `a·S = b` for symmetric positive definite `a` via Cholesky.
pub fn solve_spd(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidMatrix("non-finite entry".into()));
    }
    if a.is_square() && a.asymmetry() > SYMMETRY_TOL {
        return Err(Error::InvalidMatrix(format!(
            "matrix is not symmetric (relative asymmetry {:e})",
            a.asymmetry()
        )));
    }
    Cholesky::factor(a, 0.0)?.solve(b)
}
