use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embed::PairedEmbeddings;
use crate::error::{Error, Result};
use crate::linalg::{gaussian_matrix, random_orthogonal, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Planted {
    #[default]
    Orthogonal,
    /// `Q₁·diag(s)·Q₂ᵀ` with singular values drawn from `[1, 10]`.
    GeneralLinear,
}

impl std::str::FromStr for Planted {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orthogonal" => Ok(Planted::Orthogonal),
            "general" | "general_linear" | "general-linear" => Ok(Planted::GeneralLinear),
            other => Err(Error::InvalidSpec(format!("unknown planted map {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_train: usize,
    pub n_test: usize,
    pub d: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    #[serde(default)]
    pub planted: Planted,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 {
            return Err(Error::InvalidSpec("n_train must be at least 1".into()));
        }
        if self.d == 0 {
            return Err(Error::InvalidSpec("d must be at least 1".into()));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "noise sigma must be finite and non-negative, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub train: PairedEmbeddings,
    /// Absent when `n_test` is zero.
    pub test: Option<PairedEmbeddings>,
    pub planted: Matrix,
}

/// Draws `X` with standard normal entries and sets `Y = X·Rᵀ + σ·E`.
///
/// The same seed always yields the same `R`, `X` and `E`, so changing only
/// the noise level rescales the perturbation.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.d;
    let planted = match spec.planted {
        Planted::Orthogonal => random_orthogonal(d, rng.next_u64())?,
        Planted::GeneralLinear => {
            let q1 = random_orthogonal(d, rng.next_u64())?;
            let q2 = random_orthogonal(d, rng.next_u64())?;
            let s: Vec<f64> = (0..d).map(|_| rng.random_range(1.0..=10.0)).collect();
            q1.matmul(&Matrix::from_diag(&s))?.matmul_t(&q2)?
        }
    };
    let n = spec.n_train + spec.n_test;
    let x = gaussian_matrix(n, d, &mut rng);
    let mut y = x.matmul_t(&planted)?;
    if spec.noise_sigma > 0.0 {
        let noise = gaussian_matrix(n, d, &mut rng);
        y = y.add(&noise.scale(spec.noise_sigma))?;
    }

    let split = |m: &Matrix, lo: usize, hi: usize| {
        Matrix::from_rows(&(lo..hi).map(|i| m.row(i)).collect::<Vec<_>>())
    };
    let train = PairedEmbeddings::new(split(&x, 0, spec.n_train)?, split(&y, 0, spec.n_train)?)?;
    let test = if spec.n_test > 0 {
        Some(PairedEmbeddings::new(split(&x, spec.n_train, n)?, split(&y, spec.n_train, n)?)?)
    } else {
        None
    };
    Ok(SyntheticData { train, test, planted })
}
