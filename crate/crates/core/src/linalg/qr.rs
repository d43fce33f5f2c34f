use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::matrix::{axpy, dot, norm, Matrix};

/// Matrix of i.i.d. standard normal entries, drawn row by row.
pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    Matrix::from_raw(rows, cols, data)
}

/// Haar-distributed d×d orthogonal matrix, deterministic per seed.
///
/// Q factor of the QR decomposition of a seeded Gaussian matrix, with the
/// columns sign-normalized so that R has a non-negative diagonal.
pub fn random_orthogonal(d: usize, seed: u64) -> Result<Matrix> {
    if d == 0 {
        return Err(Error::InvalidDimension(
            "orthogonal matrix needs d >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(orthogonal_factor(&gaussian_matrix(d, d, &mut rng)))
}

/// Q of the Householder QR of a square matrix, scaled so `diag(R) ≥ 0`.
pub fn orthogonal_factor(a: &Matrix) -> Matrix {
    assert!(a.is_square(), "orthogonal_factor expects a square matrix");
    let d = a.rows();
    // column j of A lives at w[j*d..(j+1)*d]
    let mut w = a.transpose().into_vec();
    let mut blocks = Vec::with_capacity(d.div_ceil(BLOCK));
    let mut r_sign = vec![1.0; d];

    for k0 in (0..d).step_by(BLOCK) {
        let k1 = (k0 + BLOCK).min(d);
        let mut block = Block::new(d, k0);
        for k in k0..k1 {
            let x = &w[k * d + k..(k + 1) * d];
            let alpha = norm(x);
            let lead = if x[0] >= 0.0 { 1.0 } else { -1.0 };
            if alpha == 0.0 || k + 1 == d {
                // nothing to reflect; a 1-vector keeps R_kk = x[0]
                if alpha != 0.0 {
                    r_sign[k] = lead;
                }
                block.push(&[], 0.0);
                continue;
            }
            let mut v = x.to_vec();
            v[0] += lead * alpha;
            // R_kk = -lead·alpha
            r_sign[k] = -lead;
            let beta = 2.0 / dot(&v, &v);
            // the rest of the panel needs this reflection before its own
            for j in k + 1..k1 {
                let col = &mut w[j * d + k..(j + 1) * d];
                let s = beta * dot(&v, col);
                axpy(-s, &v, col);
            }
            block.push(&v, beta);
        }
        block.apply(&mut w, k1, Order::Ascending);
        blocks.push(block);
    }

    // Q = H_0 H_1 … H_{d-1}, accumulated from the right onto the identity.
    // Column j is untouched by H_k for j < k.
    let mut q_cols = Matrix::identity(d).into_vec();
    for block in blocks.iter().rev() {
        block.apply(&mut q_cols, block.start, Order::Descending);
    }
    for (j, &sgn) in r_sign.iter().enumerate() {
        if sgn < 0.0 {
            q_cols[j * d..(j + 1) * d].iter_mut().for_each(|x| *x = -*x);
        }
    }
    Matrix::from_raw(d, d, q_cols).transpose()
}

/// Reflectors applied together.
const BLOCK: usize = 4;

#[derive(Clone, Copy, PartialEq)]
enum Order {
    Ascending,
    Descending,
}

/// Up to `BLOCK` consecutive reflectors `I − β·v·vᵀ`, each stored over rows
/// `start..d` with leading zeros.
struct Block {
    d: usize,
    start: usize,
    vs: Vec<Vec<f64>>,
    betas: Vec<f64>,
}

impl Block {
    fn new(d: usize, start: usize) -> Self {
        Block {
            d,
            start,
            vs: Vec::with_capacity(BLOCK),
            betas: Vec::with_capacity(BLOCK),
        }
    }

    /// Adds the reflector for row `start + len()`; an empty `v` is the identity.
    fn push(&mut self, v: &[f64], beta: f64) {
        let n = self.d - self.start;
        let mut padded = vec![0.0; n];
        if !v.is_empty() {
            padded[n - v.len()..].copy_from_slice(v);
        }
        self.vs.push(padded);
        self.betas.push(beta);
    }

    /// Applies every reflector to columns `from..` of a column-major d×d
    /// buffer, in the given order. Each column is read once for all the dot
    /// products and written once.
    fn apply(&self, buf: &mut [f64], from: usize, order: Order) {
        let b = self.vs.len();
        let (d, start) = (self.d, self.start);
        let mut gram = [[0.0; BLOCK]; BLOCK];
        for (row, vi) in gram.iter_mut().zip(&self.vs) {
            for (g, vj) in row.iter_mut().zip(&self.vs) {
                *g = dot(vi, vj);
            }
        }
        let seq: Vec<usize> = match order {
            Order::Ascending => (0..b).collect(),
            Order::Descending => (0..b).rev().collect(),
        };
        for col in buf[from * d..].chunks_mut(d) {
            let col = &mut col[start..];
            let mut t = [0.0; BLOCK];
            if b == BLOCK {
                let n = col.len();
                let [v0, v1, v2, v3] = [&self.vs[0][..n], &self.vs[1][..n], &self.vs[2][..n], &self.vs[3][..n]];
                // four lanes per reflector keep the additions independent
                let mut acc = [[0.0; 4]; BLOCK];
                let whole = n - n % 4;
                for i in (0..whole).step_by(4) {
                    let c: &[f64; 4] = col[i..i + 4].try_into().unwrap();
                    for (a, v) in acc.iter_mut().zip([v0, v1, v2, v3]) {
                        let v: &[f64; 4] = v[i..i + 4].try_into().unwrap();
                        for l in 0..4 {
                            a[l] += v[l] * c[l];
                        }
                    }
                }
                for (ti, a) in t.iter_mut().zip(acc) {
                    *ti = (a[0] + a[1]) + (a[2] + a[3]);
                }
                for i in whole..n {
                    let c = col[i];
                    t[0] += v0[i] * c;
                    t[1] += v1[i] * c;
                    t[2] += v2[i] * c;
                    t[3] += v3[i] * c;
                }
            } else {
                for (ti, v) in t.iter_mut().zip(&self.vs) {
                    *ti = dot(v, col);
                }
            }
            // v_i·(current column) folds in the reflectors applied before it
            let mut s = [0.0; BLOCK];
            for (pos, &i) in seq.iter().enumerate() {
                let mut ti = t[i];
                for &j in &seq[..pos] {
                    ti -= s[j] * gram[i][j];
                }
                s[i] = self.betas[i] * ti;
            }
            if b == BLOCK {
                let n = col.len();
                let [v0, v1, v2, v3] = [&self.vs[0][..n], &self.vs[1][..n], &self.vs[2][..n], &self.vs[3][..n]];
                for i in 0..col.len() {
                    col[i] -= s[0] * v0[i] + s[1] * v1[i] + s[2] * v2[i] + s[3] * v3[i];
                }
            } else {
                for (si, v) in s.iter().zip(&self.vs) {
                    axpy(-si, v, col);
                }
            }
        }
    }
}
