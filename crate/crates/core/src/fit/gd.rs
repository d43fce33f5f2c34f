use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{objective, FitConfig, FitMethod, Moments, TransformMatrix};
use crate::embed::PairedEmbeddings;
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

/// Epochs over which the relative objective change is measured.
pub const CONVERGENCE_WINDOW: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    EpochBudget,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitTrace {
    /// Objective (plus L2 term, if any) after each epoch.
    pub objectives: Vec<f64>,
    #[serde(serialize_with = "secs")]
    pub wall_time: Duration,
    pub stop: StopReason,
}

fn secs<S: serde::Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

impl FitTrace {
    pub fn epochs(&self) -> usize {
        self.objectives.len()
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.objectives.last().copied()
    }
}

struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    fn new(config: &FitConfig, len: usize) -> Self {
        Adam {
            lr: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            eps: config.epsilon,
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Unconstrained fit of the mean squared residual with Adam.
///
/// `W` starts at the identity when square and at zero otherwise. Full batch
/// by default; with `batch_size` set, pairs are reshuffled every epoch from
/// `seed`. Stops when the objective changes by less than `rel_tolerance`
/// (relative) over [`CONVERGENCE_WINDOW`] epochs, or after `max_epochs`.
pub fn fit_gd(pairs: &PairedEmbeddings, config: &FitConfig) -> Result<(TransformMatrix, FitTrace)> {
    config.validate()?;
    let start = Instant::now();
    let (dt, ds) = (pairs.target_dim(), pairs.source_dim());
    let n = pairs.len();
    let moments = Moments::from_pairs(pairs);

    let mut w = if dt == ds { Matrix::identity(dt) } else { Matrix::zeros(ds, dt) };
    let mut adam = Adam::new(config, ds * dt);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let batch = config.batch_size.filter(|&b| b < n);

    let l2 = config.l2_weight;
    let penalized = |w: &Matrix| -> Result<f64> {
        let base = moments.objective(w)?;
        Ok(if l2 > 0.0 { base + l2 * dot(w.as_slice(), w.as_slice()) } else { base })
    };

    let mut objectives = Vec::with_capacity(config.max_epochs.min(1 << 16));
    let mut stop = StopReason::EpochBudget;
    for epoch in 1..=config.max_epochs {
        match batch {
            None => {
                let mut g = moments.gradient(&w)?;
                add_l2(&mut g, &w, l2);
                adam.update(w.as_mut_slice(), g.as_slice());
            }
            Some(b) => {
                order.shuffle(&mut rng);
                for chunk in order.chunks(b) {
                    let mut g = batch_gradient(&w, pairs, chunk);
                    add_l2(&mut g, &w, l2);
                    adam.update(w.as_mut_slice(), g.as_slice());
                }
            }
        }

        let obj = penalized(&w)?;
        if !obj.is_finite() || !w.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "gradient descent diverged at epoch {epoch}"
            )));
        }
        objectives.push(obj);
        if epoch % 500 == 0 {
            log::debug!("epoch {epoch}: objective {obj:.9e}");
        }
        if obj == 0.0 {
            stop = StopReason::Converged;
            break;
        }
        if objectives.len() > CONVERGENCE_WINDOW {
            let before = objectives[objectives.len() - 1 - CONVERGENCE_WINDOW];
            if ((before - obj) / before).abs() < config.rel_tolerance {
                stop = StopReason::Converged;
                break;
            }
        }
    }

    let final_obj = objective(&w, pairs)?;
    let t = TransformMatrix::new(w, FitMethod::Gd, false, final_obj, n)?;
    Ok((
        t,
        FitTrace {
            objectives,
            wall_time: start.elapsed(),
            stop,
        },
    ))
}

fn add_l2(g: &mut Matrix, w: &Matrix, l2: f64) {
    if l2 > 0.0 {
        for (gi, wi) in g.as_mut_slice().iter_mut().zip(w.as_slice()) {
            *gi += 2.0 * l2 * wi;
        }
    }
}

/// `(2/b) Σ (W·xᵢ − yᵢ)·xᵢᵀ` over the rows in `rows`.
fn batch_gradient(w: &Matrix, pairs: &PairedEmbeddings, rows: &[usize]) -> Matrix {
    let mut g = Matrix::zeros(w.rows(), w.cols());
    let mut resid = vec![0.0; w.rows()];
    for &i in rows {
        let x = pairs.x().row(i);
        let y = pairs.y().row(i);
        for (r, (wr, &yi)) in resid.iter_mut().zip(w.row_iter().zip(y)) {
            *r = dot(wr, x) - yi;
        }
        for (k, &r) in resid.iter().enumerate() {
            for (gk, &xj) in g.row_mut(k).iter_mut().zip(x) {
                *gk += r * xj;
            }
        }
    }
    let s = 2.0 / rows.len() as f64;
    g.as_mut_slice().iter_mut().for_each(|v| *v *= s);
    g
}
