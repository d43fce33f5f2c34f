use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{evaluate, format_sig9, EvalReport};
use crate::embed::PairedEmbeddings;
use crate::error::{Error, Result};
use crate::fit::{fit, objective, FitConfig, FitMethod};

/// Which training pairs make up a subset of a given size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PrefixMode {
    /// The first `count` pairs in file order, so subsets are nested.
    #[default]
    InOrder,
    /// The first `count` pairs of one seeded permutation, still nested.
    Shuffled(u64),
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub pair_count: usize,
    pub train_objective: f64,
    pub test_objective: f64,
    pub report: EvalReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationReport {
    pub method: FitMethod,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    /// One line per pair count with precision columns in ascending `k`.
    pub fn to_csv(&self) -> String {
        let ks: Vec<usize> = self
            .rows
            .first()
            .map(|r| r.report.precision_at_k.keys().copied().collect())
            .unwrap_or_default();
        let mut out = String::from("pair_count,train_objective,test_objective");
        for k in &ks {
            let _ = write!(out, ",p_at_{k}");
        }
        out.push_str(",mean_cosine_aligned,mean_residual,mean_distance_after\n");
        for row in &self.rows {
            let _ = write!(
                out,
                "{},{},{}",
                row.pair_count,
                format_sig9(row.train_objective),
                format_sig9(row.test_objective)
            );
            for k in &ks {
                let p = row.report.precision(*k).unwrap_or(f64::NAN);
                let _ = write!(out, ",{}", format_sig9(p));
            }
            let _ = writeln!(
                out,
                ",{},{},{}",
                format_sig9(row.report.mean_cosine_aligned),
                format_sig9(row.report.mean_residual),
                format_sig9(row.report.mean_cross_lingual_distance_after)
            );
        }
        out
    }
}

/// Refits on growing subsets of `train` and evaluates each fit on `eval_set`.
///
/// `counts` must be strictly increasing, each between 1 and the number of
/// training pairs.
pub fn ablate(
    train: &PairedEmbeddings,
    counts: &[usize],
    config: &FitConfig,
    eval_set: &PairedEmbeddings,
    ks: &[usize],
    mode: PrefixMode,
) -> Result<AblationReport> {
    if counts.is_empty() {
        return Err(Error::InvalidSpec("no pair counts given".into()));
    }
    if counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidSpec(format!("pair counts must be strictly increasing: {counts:?}")));
    }
    let n = train.len();
    if counts[0] == 0 || counts[counts.len() - 1] > n {
        return Err(Error::InvalidSpec(format!(
            "pair counts must lie in 1..={n}, got {counts:?}"
        )));
    }
    let ordered = match mode {
        PrefixMode::InOrder => None,
        PrefixMode::Shuffled(seed) => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            Some(train.select(&idx)?)
        }
    };
    let source = ordered.as_ref().unwrap_or(train);

    let mut rows = Vec::with_capacity(counts.len());
    for &count in counts {
        let subset = source.prefix(count)?;
        let (t, _) = fit(&subset, config)?;
        let report = evaluate(&t, eval_set, ks)?;
        log::info!("{count} pairs: P@1 {:?}", report.precision_at_k.values().next());
        rows.push(AblationRow {
            pair_count: count,
            train_objective: t.objective(),
            test_objective: objective(&t, eval_set)?,
            report,
        });
    }
    Ok(AblationReport {
        method: config.method,
        rows,
    })
}
