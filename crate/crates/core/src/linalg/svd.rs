//! One-sided (Hestenes) Jacobi SVD.
//!
//! Columns of the working matrix are rotated pairwise until they are mutually
//! orthogonal; the column norms are then the singular values and the
//! accumulated rotations form `V`. Accurate and simple, and fast enough for
//! the d×d cross-covariance matrices this crate factors (d up to ~1000).

use crate::error::{Error, Result};
use crate::linalg::matrix::{dot, norm, Matrix};

/// Sweep budget. Running out is reported as [`Error::NumericalFailure`].
pub const MAX_SWEEPS: usize = 30;

/// A column pair counts as orthogonal once `|cᵢ·cⱼ| ≤ ORTHOGONALITY_EPS·‖cᵢ‖‖cⱼ‖`.
/// A sweep with every pair below this bound is converged; the off-diagonal
/// Gram mass is then at most `ORTHOGONALITY_EPS·‖M‖_F²`.
pub const ORTHOGONALITY_EPS: f64 = f64::EPSILON;

/// `m = u · diag(sigma) · vᵀ` with `sigma` sorted non-increasing.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    /// m×r, orthonormal columns.
    pub u: Matrix,
    /// r non-negative values, non-increasing.
    pub sigma: Vec<f64>,
    /// k×r, orthonormal columns.
    pub v: Matrix,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (x, s) in us.row_mut(i).iter_mut().zip(&self.sigma) {
                *x *= s;
            }
        }
        us.matmul_t(&self.v).expect("factor shapes agree")
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }
}

/// Thin SVD of `m`. Deterministic for a given input.
///
/// Each `u` column is sign-normalized so that its largest-magnitude entry is
/// non-negative (first such entry on ties); `v` is flipped along with it.
pub fn svd(m: &Matrix) -> Result<SvdFactors> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidMatrix(format!(
            "cannot factor an empty {rows}x{cols} matrix"
        )));
    }
    if !m.is_finite() {
        return Err(Error::InvalidMatrix("non-finite entry".into()));
    }

    let mut factors = if rows >= cols {
        jacobi_tall(m)?
    } else {
        // Mᵀ = U'ΣV'ᵀ  ⇒  M = V'ΣU'ᵀ
        let f = jacobi_tall(&m.transpose())?;
        SvdFactors {
            u: f.v,
            sigma: f.sigma,
            v: f.u,
        }
    };
    normalize_signs(&mut factors);
    Ok(factors)
}

/// Jacobi on an m×n matrix with m ≥ n. Columns are kept contiguous.
fn jacobi_tall(a: &Matrix) -> Result<SvdFactors> {
    let (m, n) = a.shape();
    // cols[j*m..(j+1)*m] is column j of the working matrix
    let mut cols = a.transpose().into_vec();
    let mut v = Matrix::identity(n).into_vec();

    // A global off-diagonal bound can be met while columns with tiny norms
    // are still far from orthogonal to each other, which ruins the small
    // singular directions, so convergence is judged pair by pair.
    let mut converged = false;
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let cp = &cols[p * m..(p + 1) * m];
                    let cq = &cols[q * m..(q + 1) * m];
                    (dot(cp, cp), dot(cq, cq), dot(cp, cq))
                };
                if gamma == 0.0 || gamma.abs() <= ORTHOGONALITY_EPS * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + 1.0f64.hypot(zeta));
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, m, p, q, c, s);
                rotate(&mut v, n, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NumericalFailure(format!(
            "Jacobi SVD of a {m}x{n} matrix did not converge in {MAX_SWEEPS} sweeps"
        )));
    }

    let sigma_raw: Vec<f64> = (0..n).map(|j| norm(&cols[j * m..(j + 1) * m])).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma_raw[j].total_cmp(&sigma_raw[i]).then(i.cmp(&j)));

    let sigma_max = sigma_raw[order[0]];
    let negligible = sigma_max * (m.max(n) as f64) * f64::EPSILON;

    // Left vectors, re-orthonormalized in descending-σ order. Columns whose
    // singular value is at roundoff level carry no direction and are rebuilt
    // from the canonical basis instead.
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    let mut v_out = Matrix::zeros(n, n);
    let mut deficient = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        let s = sigma_raw[j];
        let vj = &v[j * n..(j + 1) * n];
        for (i, &x) in vj.iter().enumerate() {
            v_out[(i, slot)] = x;
        }
        if s > negligible && s > 0.0 {
            let mut col: Vec<f64> = cols[j * m..(j + 1) * m].iter().map(|x| x / s).collect();
            orthogonalize(&mut col, &u_cols);
            let nrm = norm(&col);
            col.iter_mut().for_each(|x| *x /= nrm);
            u_cols.push(col);
            sigma.push(s);
        } else {
            deficient.push(slot);
            u_cols.push(Vec::new());
            sigma.push(s.max(0.0));
        }
    }
    let mut candidate = 0;
    for &slot in &deficient {
        loop {
            if candidate >= m {
                return Err(Error::NumericalFailure(
                    "could not complete an orthonormal basis".into(),
                ));
            }
            let mut e = vec![0.0; m];
            e[candidate] = 1.0;
            candidate += 1;
            orthogonalize(&mut e, &u_cols);
            let nrm = norm(&e);
            if nrm > 0.5 {
                e.iter_mut().for_each(|x| *x /= nrm);
                u_cols[slot] = e;
                break;
            }
        }
    }

    let mut u = Matrix::zeros(m, n);
    for (j, col) in u_cols.iter().enumerate() {
        for (i, &x) in col.iter().enumerate() {
            u[(i, j)] = x;
        }
    }
    Ok(SvdFactors { u, sigma, v: v_out })
}

#[inline]
fn rotate(buf: &mut [f64], len: usize, p: usize, q: usize, c: f64, s: f64) {
    debug_assert!(p < q);
    let (head, tail) = buf.split_at_mut(q * len);
    let cp = &mut head[p * len..(p + 1) * len];
    let cq = &mut tail[..len];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let a = *x;
        let b = *y;
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Two passes of classical Gram–Schmidt against orthonormal `basis`; empty
/// entries are placeholders and skipped.
fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis.iter().filter(|b| !b.is_empty()) {
            let proj = dot(v, b);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= proj * y;
            }
        }
    }
}

fn normalize_signs(f: &mut SvdFactors) {
    for j in 0..f.sigma.len() {
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for i in 0..f.u.rows() {
            let a = f.u[(i, j)].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if f.u[(best, j)] < 0.0 {
            for i in 0..f.u.rows() {
                f.u[(i, j)] = -f.u[(i, j)];
            }
            for i in 0..f.v.rows() {
                f.v[(i, j)] = -f.v[(i, j)];
            }
        }
    }
}
