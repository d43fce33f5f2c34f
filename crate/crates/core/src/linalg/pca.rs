use crate::error::{Error, Result};
use crate::linalg::matrix::{dot, Matrix};
use crate::linalg::svd::svd;

/// Projects mean-centered rows onto the top two right singular vectors.
///
/// Returns an n×2 matrix whose first column is the leading component. The
/// right singular vectors are taken from the d×d scatter matrix, so the cost
/// does not grow with n beyond the accumulation pass.
pub fn pca_project_2d(m: &Matrix) -> Result<Matrix> {
    let (n, d) = m.shape();
    if n < 2 || d < 2 {
        return Err(Error::InvalidMatrix(format!(
            "2D projection needs at least 2 rows and 2 columns, got {n}x{d}"
        )));
    }
    if !m.is_finite() {
        return Err(Error::InvalidMatrix("non-finite entry".into()));
    }
    let mut mean = vec![0.0; d];
    for r in m.row_iter() {
        for (acc, x) in mean.iter_mut().zip(r) {
            *acc += x;
        }
    }
    mean.iter_mut().for_each(|x| *x /= n as f64);

    let mut centered = m.clone();
    for i in 0..n {
        for (x, mu) in centered.row_mut(i).iter_mut().zip(&mean) {
            *x -= mu;
        }
    }
    let scatter = centered.t_matmul(&centered)?;
    let f = svd(&scatter)?;
    let axes = [f.u.column(0), f.u.column(1)];

    let mut out = Matrix::zeros(n, 2);
    for i in 0..n {
        let r = centered.row(i);
        out[(i, 0)] = dot(r, &axes[0]);
        out[(i, 1)] = dot(r, &axes[1]);
    }
    Ok(out)
}
