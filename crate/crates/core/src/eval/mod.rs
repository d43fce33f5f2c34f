//! Transform quality without a downstream task: retrieval precision, residuals,
//! and aligned-pair distances before and after mapping.

mod ablate;
mod projection;
mod synth;

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

pub use ablate::{ablate, AblationReport, AblationRow, PrefixMode};
pub use projection::export_projection;
pub use synth::{generate_synthetic, Planted, SynthSpec, SyntheticData};

use crate::embed::PairedEmbeddings;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Matrix};

pub const DEFAULT_KS: [usize; 3] = [1, 5, 10];

/// Vectors shorter than this rank below every non-zero candidate.
pub const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub n_eval: usize,
    /// Fraction of queries whose aligned row is among the k nearest
    /// source rows by cosine similarity.
    pub precision_at_k: BTreeMap<usize, f64>,
    pub mean_cosine_aligned: f64,
    /// Root mean squared residual `sqrt((1/n) Σ ‖W·xᵢ − yᵢ‖²)`.
    pub mean_residual: f64,
    /// Mean `‖xᵢ − yᵢ‖`; absent when the two sides differ in dimension.
    pub mean_cross_lingual_distance_before: Option<f64>,
    /// Mean `‖W·xᵢ − yᵢ‖`.
    pub mean_cross_lingual_distance_after: f64,
}

impl EvalReport {
    pub fn precision(&self, k: usize) -> Option<f64> {
        self.precision_at_k.get(&k).copied()
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "pairs evaluated:        {}", self.n_eval)?;
        for (k, p) in &self.precision_at_k {
            writeln!(f, "P@{k:<3}                   {p:.4}")?;
        }
        writeln!(f, "mean aligned cosine:    {:.6}", self.mean_cosine_aligned)?;
        writeln!(f, "rms residual:           {:.6e}", self.mean_residual)?;
        match self.mean_cross_lingual_distance_before {
            Some(d) => writeln!(f, "mean distance before:   {d:.6}")?,
            None => writeln!(f, "mean distance before:   n/a")?,
        }
        write!(f, "mean distance after:    {:.6}", self.mean_cross_lingual_distance_after)
    }
}

/// Evaluates `w` on held-out pairs with exhaustive cosine retrieval.
///
/// Query `i` is `W·xᵢ`; candidates are all `yⱼ` of the test set. Ties in
/// similarity go to the lower row index.
pub fn evaluate<W: AsRef<Matrix>>(w: &W, test: &PairedEmbeddings, ks: &[usize]) -> Result<EvalReport> {
    let w = w.as_ref();
    if w.cols() != test.target_dim() || w.rows() != test.source_dim() {
        return Err(Error::DimensionError(format!(
            "transform is {}x{} but test pairs are {} → {}",
            w.rows(),
            w.cols(),
            test.target_dim(),
            test.source_dim()
        )));
    }
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::InvalidSpec("k values must be positive and non-empty".into()));
    }
    let n = test.len();
    let mapped = test.x().matmul_t(w)?;
    let y = test.y();

    let unit = |m: &Matrix| -> (Matrix, Vec<bool>) {
        let mut out = m.clone();
        let mut zero = vec![false; m.rows()];
        for i in 0..m.rows() {
            let nrm = norm(m.row(i));
            if nrm < ZERO_NORM {
                zero[i] = true;
                out.row_mut(i).iter_mut().for_each(|v| *v = 0.0);
            } else {
                out.row_mut(i).iter_mut().for_each(|v| *v /= nrm);
            }
        }
        (out, zero)
    };
    let (q_unit, q_zero) = unit(&mapped);
    let (c_unit, c_zero) = unit(y);

    let score = |i: usize, j: usize| -> f64 {
        if c_zero[j] {
            f64::NEG_INFINITY
        } else if q_zero[i] {
            0.0
        } else {
            dot(q_unit.row(i), c_unit.row(j))
        }
    };

    let mut hits = vec![0usize; ks.len()];
    let mut cos_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut dist_after = 0.0;
    let mut dist_before = 0.0;
    let same_dim = test.target_dim() == test.source_dim();
    for i in 0..n {
        let own = score(i, i);
        let mut rank = 0usize;
        for j in 0..n {
            if j == i {
                continue;
            }
            let s = score(i, j);
            if s > own || (s == own && j < i) {
                rank += 1;
            }
        }
        for (h, &k) in hits.iter_mut().zip(ks) {
            if rank < k {
                *h += 1;
            }
        }
        if !(q_zero[i] || c_zero[i]) {
            cos_sum += dot(q_unit.row(i), c_unit.row(i));
        }
        let r2: f64 = mapped
            .row(i)
            .iter()
            .zip(y.row(i))
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        sq_sum += r2;
        dist_after += r2.sqrt();
        if same_dim {
            let b2: f64 = test
                .x()
                .row(i)
                .iter()
                .zip(y.row(i))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dist_before += b2.sqrt();
        }
    }
    let nf = n as f64;
    Ok(EvalReport {
        n_eval: n,
        precision_at_k: ks.iter().zip(&hits).map(|(&k, &h)| (k, h as f64 / nf)).collect(),
        mean_cosine_aligned: cos_sum / nf,
        mean_residual: (sq_sum / nf).sqrt(),
        mean_cross_lingual_distance_before: same_dim.then_some(dist_before / nf),
        mean_cross_lingual_distance_after: dist_after / nf,
    })
}

/// `%.9g`-style formatting: 9 significant digits, trailing zeros trimmed.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..9).contains(&exp) {
        let mant = trim_zeros(mant);
        return format!("{mant}e{exp}");
    }
    let decimals = (8 - exp) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Quotes a CSV field if it contains a separator, quote, or line break.
pub(crate) fn csv_field(s: &str) -> std::borrow::Cow<'_, str> {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\"")).into()
    } else {
        s.into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_matrix, random_orthogonal};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn planted(n: usize, d: usize, seed: u64) -> (PairedEmbeddings, Matrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = gaussian_matrix(n, d, &mut rng);
        let r = random_orthogonal(d, seed + 100).unwrap();
        let y = x.matmul_t(&r).unwrap();
        (PairedEmbeddings::new(x, y).unwrap(), r)
    }

    #[test]
    fn exact_map_retrieves_everything() {
        let (p, r) = planted(200, 16, 1);
        let rep = evaluate(&r, &p, &DEFAULT_KS).unwrap();
        assert_eq!(rep.precision(1), Some(1.0));
        assert!(rep.mean_residual < 1e-12);
        assert!((rep.mean_cosine_aligned - 1.0).abs() < 1e-12);
        assert!(rep.mean_cross_lingual_distance_before.unwrap() > rep.mean_cross_lingual_distance_after);
    }

    #[test]
    fn zero_map_is_chance() {
        let (p, _) = planted(100, 8, 2);
        let rep = evaluate(&Matrix::zeros(8, 8), &p, &[1, 100]).unwrap();
        // all queries tie, so only row 0 retrieves itself at k=1
        assert_eq!(rep.precision(1), Some(0.01));
        assert_eq!(rep.precision(100), Some(1.0));
        assert_eq!(rep.mean_cosine_aligned, 0.0);
    }

    #[test]
    fn zero_candidates_rank_last() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap();
        let y = Matrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap();
        let p = PairedEmbeddings::new(x, y).unwrap();
        let rep = evaluate(&Matrix::identity(2), &p, &[1, 2, 3]).unwrap();
        // query 0 has similarity 0 with row 1 and 0.707 with row 2, so its
        // zero-vector partner is third
        assert!((rep.precision(1).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((rep.precision(2).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(rep.precision(3), Some(1.0));
    }

    #[test]
    fn residual_matches_objective_for_orthogonal_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = gaussian_matrix(150, 10, &mut rng);
        let y = gaussian_matrix(150, 10, &mut rng);
        let p = PairedEmbeddings::new(x, y).unwrap();
        let q = random_orthogonal(10, 4).unwrap();
        let rep = evaluate(&q, &p, &DEFAULT_KS).unwrap();
        let obj = crate::fit::objective(&q, &p).unwrap();
        assert!((rep.mean_residual - obj.sqrt()).abs() <= 1e-10 * obj.sqrt());
        let p1 = rep.precision(1).unwrap();
        let p5 = rep.precision(5).unwrap();
        let p10 = rep.precision(10).unwrap();
        assert!(p1 <= p5 && p5 <= p10);
    }

    #[test]
    fn dimension_and_k_checks() {
        let (p, _) = planted(10, 4, 5);
        assert!(matches!(evaluate(&Matrix::zeros(3, 4), &p, &[1]), Err(Error::DimensionError(_))));
        assert!(matches!(evaluate(&Matrix::identity(4), &p, &[0]), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn sig9() {
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(1.0), "1");
        assert_eq!(format_sig9(-2.5), "-2.5");
        assert_eq!(format_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(format_sig9(123456789.4), "123456789");
        assert_eq!(format_sig9(1234567890.0), "1.23456789e9");
        assert_eq!(format_sig9(9.9999999999), "10");
        assert_eq!(format_sig9(1.5e-7), "1.5e-7");
        assert_eq!(format_sig9(0.00012345678912), "0.000123456789");
        for x in [std::f64::consts::PI, -1e-300, 6.02e23, 0.1] {
            let back: f64 = format_sig9(x).parse().unwrap();
            assert!(((back - x) / x).abs() < 1e-8);
        }
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }
}
