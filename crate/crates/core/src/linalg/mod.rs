//! Dense linear algebra: matrix type, Jacobi SVD, Householder QR, Cholesky.
//!
//! Everything accumulates in `f64`, whatever the storage precision of the
//! data that was loaded.

mod cholesky;
mod matrix;
mod pca;
mod qr;
mod svd;

pub use cholesky::{solve_spd, Cholesky, SYMMETRY_TOL};
pub use matrix::{axpy, dot, norm, Matrix};
pub use pca::pca_project_2d;
pub use qr::{gaussian_matrix, orthogonal_factor, random_orthogonal};
pub use svd::{svd, SvdFactors, MAX_SWEEPS, ORTHOGONALITY_EPS};
