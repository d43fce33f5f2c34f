//! Fitting the linear map `W` that sends target-language vectors `x` onto
//! source-language vectors `y`, minimizing `(1/n) Σ ‖W·xᵢ − yᵢ‖²`.
//!
//! Three solvers share the objective:
//!
//! * [`fit_procrustes`]: orthogonal `W = U·Vᵀ` from the SVD `U·Σ·Vᵀ` of the
//!   cross-covariance `M = Σ yᵢ·xᵢᵀ = YᵀX`.
//! * [`fit_gd`]: unconstrained, Adam on the mean squared residual.
//! * [`fit_lsq`]: unconstrained closed form `W = (YᵀX)(XᵀX)⁻¹`.
//!
//! The closed forms only touch the data through [`Moments`], which are
//! accumulated in one pass with memory independent of the number of pairs.

mod gd;

use serde::{Deserialize, Serialize};

pub use gd::{fit_gd, FitTrace, StopReason, CONVERGENCE_WINDOW};

use crate::embed::PairedEmbeddings;
use crate::error::{Error, Result};
use crate::linalg::{dot, svd, Cholesky, Matrix};

/// Orthogonality tolerance for transforms flagged orthogonal.
pub const ORTHOGONALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    #[default]
    Svd,
    Gd,
    Lsq,
}

impl FitMethod {
    /// Method byte of the transform file.
    pub fn code(self) -> u8 {
        match self {
            FitMethod::Svd => 0,
            FitMethod::Gd => 1,
            FitMethod::Lsq => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(FitMethod::Svd),
            1 => Some(FitMethod::Gd),
            2 => Some(FitMethod::Lsq),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FitMethod::Svd => "svd",
            FitMethod::Gd => "gd",
            FitMethod::Lsq => "lsq",
        }
    }
}

impl std::fmt::Display for FitMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FitMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svd" => Ok(FitMethod::Svd),
            "gd" => Ok(FitMethod::Gd),
            "lsq" => Ok(FitMethod::Lsq),
            other => Err(Error::InvalidInput(format!(
                "unknown method {other:?} (expected svd, gd or lsq)"
            ))),
        }
    }
}

/// A fitted map of shape `source_dim × target_dim` plus fit metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformMatrix {
    w: Matrix,
    method: FitMethod,
    orthogonal: bool,
    objective: f64,
    n_train: usize,
}

impl TransformMatrix {
    pub fn new(
        w: Matrix,
        method: FitMethod,
        orthogonal: bool,
        objective: f64,
        n_train: usize,
    ) -> Result<Self> {
        if !w.is_finite() {
            return Err(Error::InvalidMatrix("transform has non-finite entries".into()));
        }
        if !(objective.is_finite() && objective >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "objective must be finite and non-negative, got {objective}"
            )));
        }
        if orthogonal {
            if !w.is_square() {
                return Err(Error::DimensionError(
                    "an orthogonal transform must be square".into(),
                ));
            }
            let defect = w.orthogonality_defect();
            if defect > ORTHOGONALITY_TOL {
                return Err(Error::InvalidMatrix(format!(
                    "transform flagged orthogonal but ‖WᵀW − I‖_F = {defect:e}"
                )));
            }
        }
        Ok(TransformMatrix {
            w,
            method,
            orthogonal,
            objective,
            n_train,
        })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.w
    }

    pub fn into_matrix(self) -> Matrix {
        self.w
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn in_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn method(&self) -> FitMethod {
        self.method
    }

    pub fn is_orthogonal(&self) -> bool {
        self.orthogonal
    }

    /// Mean squared residual on the training pairs.
    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }
}

impl AsRef<Matrix> for TransformMatrix {
    fn as_ref(&self) -> &Matrix {
        &self.w
    }
}

/// Solver selection and hyperparameters. Defaults follow the published
/// training setup (Adam, lr 0.001, β₁ 0.9, β₂ 0.999).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub method: FitMethod,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// `None` means full batch.
    pub batch_size: Option<usize>,
    pub max_epochs: usize,
    /// Stop once the relative objective change over
    /// [`CONVERGENCE_WINDOW`] epochs falls below this.
    pub rel_tolerance: f64,
    pub seed: u64,
    pub l2_weight: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            method: FitMethod::Svd,
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: None,
            max_epochs: 5000,
            rel_tolerance: 1e-9,
            seed: 0,
            l2_weight: 0.0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must be in [0, 1), got {b}"));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1".into());
        }
        if self.batch_size == Some(0) {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.rel_tolerance >= 0.0 && self.rel_tolerance.is_finite()) {
            return bad(format!("rel_tolerance must be >= 0, got {}", self.rel_tolerance));
        }
        if !(self.l2_weight >= 0.0 && self.l2_weight.is_finite()) {
            return bad(format!("l2_weight must be >= 0, got {}", self.l2_weight));
        }
        Ok(())
    }
}

/// Sufficient statistics of the least-squares objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    n: usize,
    /// `XᵀX`, target_dim × target_dim.
    cxx: Matrix,
    /// `YᵀX`, source_dim × target_dim.
    cyx: Matrix,
    /// `Σ ‖yᵢ‖²`.
    syy: f64,
}

impl Moments {
    fn new(target_dim: usize, source_dim: usize) -> Self {
        Moments {
            n: 0,
            cxx: Matrix::zeros(target_dim, target_dim),
            cyx: Matrix::zeros(source_dim, target_dim),
            syy: 0.0,
        }
    }

    fn push(&mut self, x: &[f64], y: &[f64]) {
        debug_assert_eq!(x.len(), self.cxx.rows());
        debug_assert_eq!(y.len(), self.cyx.rows());
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                // upper triangle only; mirrored in `finish`
                let row = &mut self.cxx.row_mut(i)[i..];
                for (c, &xj) in row.iter_mut().zip(&x[i..]) {
                    *c += xi * xj;
                }
            }
        }
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                for (c, &xj) in self.cyx.row_mut(i).iter_mut().zip(x) {
                    *c += yi * xj;
                }
            }
        }
        self.syy += dot(y, y);
        self.n += 1;
    }

    fn finish(mut self) -> Self {
        let d = self.cxx.rows();
        for i in 0..d {
            for j in 0..i {
                self.cxx[(i, j)] = self.cxx[(j, i)];
            }
        }
        self
    }

    pub fn from_rows<'a>(
        target_dim: usize,
        source_dim: usize,
        rows: impl IntoIterator<Item = (&'a [f64], &'a [f64])>,
    ) -> Self {
        let mut m = Moments::new(target_dim, source_dim);
        for (x, y) in rows {
            m.push(x, y);
        }
        m.finish()
    }

    pub fn from_pairs(pairs: &PairedEmbeddings) -> Self {
        Moments::from_rows(pairs.target_dim(), pairs.source_dim(), pairs.rows())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn xtx(&self) -> &Matrix {
        &self.cxx
    }

    pub fn ytx(&self) -> &Matrix {
        &self.cyx
    }

    pub fn sum_sq_y(&self) -> f64 {
        self.syy
    }

    fn check(&self, w: &Matrix) -> Result<()> {
        if w.shape() != self.cyx.shape() {
            return Err(Error::DimensionError(format!(
                "transform is {}x{} but the data needs {}x{}",
                w.rows(),
                w.cols(),
                self.cyx.rows(),
                self.cyx.cols()
            )));
        }
        Ok(())
    }

    /// Objective from the moments: `(tr(W·XᵀX·Wᵀ) − 2⟨W, YᵀX⟩ + Σ‖y‖²) / n`.
    pub fn objective(&self, w: &Matrix) -> Result<f64> {
        self.check(w)?;
        let wc = w.matmul(&self.cxx)?;
        let total = wc.frobenius_dot(w)? - 2.0 * w.frobenius_dot(&self.cyx)? + self.syy;
        Ok((total / self.n as f64).max(0.0))
    }

    /// Same as [`Moments::objective`] for orthogonal `W`, where
    /// `tr(W·XᵀX·Wᵀ) = tr(XᵀX)`. Only valid if `W` is orthogonal.
    pub fn objective_orthogonal(&self, w: &Matrix) -> Result<f64> {
        self.check(w)?;
        let total = self.cxx.trace() - 2.0 * w.frobenius_dot(&self.cyx)? + self.syy;
        Ok((total / self.n as f64).max(0.0))
    }

    /// Gradient of the mean objective, `(2/n)(W·XᵀX − YᵀX)`.
    pub fn gradient(&self, w: &Matrix) -> Result<Matrix> {
        self.check(w)?;
        let mut g = w.matmul(&self.cxx)?.sub(&self.cyx)?;
        let s = 2.0 / self.n as f64;
        g.as_mut_slice().iter_mut().for_each(|v| *v *= s);
        Ok(g)
    }
}

/// `(1/n) Σ ‖W·xᵢ − yᵢ‖²`, one streaming pass over the pairs.
pub fn objective<W: AsRef<Matrix>>(w: &W, pairs: &PairedEmbeddings) -> Result<f64> {
    let w = w.as_ref();
    if w.cols() != pairs.target_dim() || w.rows() != pairs.source_dim() {
        return Err(Error::DimensionError(format!(
            "transform is {}x{} but pairs are {} → {}",
            w.rows(),
            w.cols(),
            pairs.target_dim(),
            pairs.source_dim()
        )));
    }
    let mut total = 0.0;
    for (x, y) in pairs.rows() {
        for (wr, &yi) in w.row_iter().zip(y) {
            let r = dot(wr, x) - yi;
            total += r * r;
        }
    }
    Ok(total / pairs.len() as f64)
}

/// Orthogonal Procrustes: the orthogonal `W` minimizing the objective.
pub fn fit_procrustes(pairs: &PairedEmbeddings) -> Result<TransformMatrix> {
    let d = pairs.target_dim();
    if pairs.source_dim() != d {
        return Err(Error::DimensionError(format!(
            "orthogonal fit needs equal dimensions, got {d} → {}",
            pairs.source_dim()
        )));
    }
    let m = cross_covariance(pairs);
    let f = svd(&m)?;
    let w = f.u.matmul_t(&f.v)?;
    let obj = objective(&w, pairs)?;
    TransformMatrix::new(w, FitMethod::Svd, true, obj, pairs.len())
}

/// `YᵀX = Σ yᵢ·xᵢᵀ`.
pub fn cross_covariance(pairs: &PairedEmbeddings) -> Matrix {
    let mut m = Matrix::zeros(pairs.source_dim(), pairs.target_dim());
    for (x, y) in pairs.rows() {
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                for (c, &xj) in m.row_mut(i).iter_mut().zip(x) {
                    *c += yi * xj;
                }
            }
        }
    }
    m
}

/// Relative pivot below which `XᵀX` is treated as singular.
pub const LSQ_PIVOT_TOL: f64 = 1e-10;

/// Ridge added to a singular `XᵀX`, relative to `tr(XᵀX)/d`.
pub const LSQ_RIDGE: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct LsqFit {
    pub transform: TransformMatrix,
    /// Ridge term that was added to `XᵀX`, if it was singular.
    pub ridge: Option<f64>,
}

/// Unconstrained least squares, `W = (YᵀX)(XᵀX)⁻¹`.
pub fn fit_lsq(pairs: &PairedEmbeddings) -> Result<LsqFit> {
    let moments = Moments::from_pairs(pairs);
    let cxx = moments.xtx();
    let d = cxx.rows();
    let max_diag = (0..d).map(|i| cxx[(i, i)]).fold(0.0f64, f64::max);
    let cxy = moments.ytx().transpose();

    let (chol, ridge) = match Cholesky::factor(cxx, LSQ_PIVOT_TOL * max_diag) {
        Ok(c) => (c, None),
        Err(Error::SingularMatrix { .. }) => {
            let lambda = LSQ_RIDGE * cxx.trace() / d as f64;
            let mut reg = cxx.clone();
            for i in 0..d {
                reg[(i, i)] += lambda;
            }
            log::warn!("XᵀX is singular; adding ridge {lambda:e}");
            (Cholesky::factor(&reg, 0.0)?, Some(lambda))
        }
        Err(e) => return Err(e),
    };
    let w = chol.solve(&cxy)?.transpose();
    if !w.is_finite() {
        return Err(Error::NumericalFailure("least-squares solution is not finite".into()));
    }
    let obj = objective(&w, pairs)?;
    Ok(LsqFit {
        transform: TransformMatrix::new(w, FitMethod::Lsq, false, obj, pairs.len())?,
        ridge,
    })
}

/// Fits with the method named in `config`; GD also returns its trace.
pub fn fit(pairs: &PairedEmbeddings, config: &FitConfig) -> Result<(TransformMatrix, Option<FitTrace>)> {
    config.validate()?;
    match config.method {
        FitMethod::Svd => Ok((fit_procrustes(pairs)?, None)),
        FitMethod::Lsq => Ok((fit_lsq(pairs)?.transform, None)),
        FitMethod::Gd => {
            let (t, trace) = fit_gd(pairs, config)?;
            Ok((t, Some(trace)))
        }
    }
}
