//! Linear alignment of contextual embedding spaces across languages.
//!
//! Pairs of contextual vectors are extracted from a word-aligned parallel
//! corpus ([`align`]), loaded and stored ([`embed`]), used to fit a linear
//! map ([`fit`]), and scored on held-out pairs ([`eval`]).

pub mod align;
pub mod embed;
pub mod error;
pub mod eval;
pub mod fit;
pub mod linalg;

pub use align::{extract_pairs, AlignmentLinkSet, BitextSentence, ContextualPair, PairRecord, WordPieceVocab};
pub use embed::{EmbeddingFormat, EmbeddingMatrix, PairedEmbeddings};
pub use error::{Error, Result};
pub use eval::{evaluate, EvalReport};
pub use fit::{fit, FitConfig, FitMethod, FitTrace, TransformMatrix};
pub use linalg::Matrix;
