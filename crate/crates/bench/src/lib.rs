//! Shared inputs for the benchmarks.

use clbt_core::eval::{generate_synthetic, Planted, SynthSpec};
use clbt_core::PairedEmbeddings;

/// Noisy planted-rotation training pairs, `n` rows of dimension `d`.
pub fn pairs(n: usize, d: usize, seed: u64) -> PairedEmbeddings {
    generate_synthetic(&SynthSpec {
        n_train: n,
        n_test: 0,
        d,
        noise_sigma: 0.01,
        seed,
        planted: Planted::Orthogonal,
    })
    .expect("valid synthetic spec")
    .train
}
