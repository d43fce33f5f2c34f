//! Keyed embedding matrices, paired training matrices, and transform application.

mod format;

use std::collections::HashMap;

pub use format::{
    read_embeddings, read_embeddings_from, read_transform, read_transform_from, write_embeddings,
    write_embeddings_to, write_transform, write_transform_to, EmbeddingFormat, CLBE_MAGIC,
    CLBE_VERSION, CLBT_MAGIC, CLBT_VERSION,
};

use crate::align::{ContextualPair, PairRecord, PieceSpan};
use crate::error::{Error, Result};
use crate::fit::TransformMatrix;
use crate::linalg::{norm, Matrix};

/// Rows of vectors keyed by corpus position (`"sentence:piece"`).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    keys: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Matrix,
}

impl EmbeddingMatrix {
    pub fn new(keys: Vec<String>, vectors: Matrix) -> Result<Self> {
        if keys.len() != vectors.rows() {
            return Err(Error::DimensionError(format!(
                "{} keys for {} vectors",
                keys.len(),
                vectors.rows()
            )));
        }
        if !vectors.is_finite() {
            return Err(Error::InvalidMatrix("non-finite embedding entry".into()));
        }
        let mut index = HashMap::with_capacity(keys.len());
        for (i, k) in keys.iter().enumerate() {
            if index.insert(k.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate embedding key {k:?}")));
            }
        }
        Ok(EmbeddingMatrix {
            keys,
            index,
            vectors,
        })
    }

    /// Keys `"{i}:0"` for each row, as used for pre-assembled pair matrices.
    pub fn with_row_keys(vectors: Matrix) -> Result<Self> {
        let keys = (0..vectors.rows()).map(|i| format!("{i}:0")).collect();
        EmbeddingMatrix::new(keys, vectors)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn into_vectors(self) -> Matrix {
        self.vectors
    }

    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.index.get(key).map(|&i| self.vectors.row(i))
    }

    /// Copy with every non-zero row scaled to unit length.
    pub fn normalized(&self) -> EmbeddingMatrix {
        let mut v = self.vectors.clone();
        for i in 0..v.rows() {
            let n = norm(v.row(i));
            if n > 0.0 {
                v.row_mut(i).iter_mut().for_each(|x| *x /= n);
            }
        }
        EmbeddingMatrix {
            keys: self.keys.clone(),
            index: self.index.clone(),
            vectors: v,
        }
    }
}

/// Row-aligned training matrices: row i of `x` (target language) is paired
/// with row i of `y` (source language).
#[derive(Debug, Clone, PartialEq)]
pub struct PairedEmbeddings {
    x: Matrix,
    y: Matrix,
    provenance: Option<Vec<ContextualPair>>,
}

impl PairedEmbeddings {
    pub fn new(x: Matrix, y: Matrix) -> Result<Self> {
        if x.rows() != y.rows() {
            return Err(Error::DimensionError(format!(
                "x has {} rows but y has {}",
                x.rows(),
                y.rows()
            )));
        }
        if x.rows() == 0 {
            return Err(Error::EmptyTrainingSet { skipped: 0 });
        }
        if x.cols() == 0 || y.cols() == 0 {
            return Err(Error::InvalidDimension("embeddings need at least one dimension".into()));
        }
        Ok(PairedEmbeddings {
            x,
            y,
            provenance: None,
        })
    }

    pub fn with_provenance(x: Matrix, y: Matrix, provenance: Vec<ContextualPair>) -> Result<Self> {
        if provenance.len() != x.rows() {
            return Err(Error::DimensionError(format!(
                "{} provenance entries for {} rows",
                provenance.len(),
                x.rows()
            )));
        }
        let mut p = PairedEmbeddings::new(x, y)?;
        p.provenance = Some(provenance);
        Ok(p)
    }

    /// Number of pairs.
    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    pub fn target_dim(&self) -> usize {
        self.x.cols()
    }

    pub fn source_dim(&self) -> usize {
        self.y.cols()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &Matrix {
        &self.y
    }

    pub fn provenance(&self) -> Option<&[ContextualPair]> {
        self.provenance.as_deref()
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = (&[f64], &[f64])> + '_ {
        self.x.row_iter().zip(self.y.row_iter())
    }

    /// The first `count` pairs.
    pub fn prefix(&self, count: usize) -> Result<PairedEmbeddings> {
        if count > self.len() {
            return Err(Error::InvalidSpec(format!(
                "prefix of {count} pairs requested from {}",
                self.len()
            )));
        }
        self.select(&(0..count).collect::<Vec<_>>())
    }

    /// Pairs at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<PairedEmbeddings> {
        let pick = |m: &Matrix| {
            let mut data = Vec::with_capacity(indices.len() * m.cols());
            for &i in indices {
                data.extend_from_slice(m.row(i));
            }
            Matrix::from_raw(indices.len(), m.cols(), data)
        };
        let mut out = PairedEmbeddings::new(pick(&self.x), pick(&self.y))?;
        out.provenance = self
            .provenance
            .as_ref()
            .map(|p| indices.iter().map(|&i| p[i]).collect());
        Ok(out)
    }

    pub fn normalized(&self) -> PairedEmbeddings {
        let unit = |m: &Matrix| {
            let mut m = m.clone();
            for i in 0..m.rows() {
                let n = norm(m.row(i));
                if n > 0.0 {
                    m.row_mut(i).iter_mut().for_each(|x| *x /= n);
                }
            }
            m
        };
        PairedEmbeddings {
            x: unit(&self.x),
            y: unit(&self.y),
            provenance: self.provenance.clone(),
        }
    }
}

/// Result of [`assemble_pairs`].
#[derive(Debug, Clone)]
pub struct Assembled {
    pub pairs: PairedEmbeddings,
    /// Pairs dropped because an embedding key was missing.
    pub skipped: usize,
}

/// Builds `X` (target) and `Y` (source) from each pair's left-most piece
/// embeddings. Missing keys are skipped and counted, or are an error when
/// `strict` is set.
pub fn assemble_pairs(
    records: &[PairRecord],
    target: &EmbeddingMatrix,
    source: &EmbeddingMatrix,
    strict: bool,
) -> Result<Assembled> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut provenance = Vec::new();
    let mut skipped = 0;
    for r in records {
        let tk = r.target_key();
        let sk = r.source_key();
        match (target.get(&tk), source.get(&sk)) {
            (Some(x), Some(y)) => {
                xs.extend_from_slice(x);
                ys.extend_from_slice(y);
                provenance.push(r.pair());
            }
            (tx, _) => {
                if strict {
                    return Err(Error::MissingEmbedding(if tx.is_none() { tk } else { sk }));
                }
                skipped += 1;
            }
        }
    }
    let n = provenance.len();
    if n == 0 {
        return Err(Error::EmptyTrainingSet { skipped });
    }
    let x = Matrix::from_raw(n, target.dim(), xs);
    let y = Matrix::from_raw(n, source.dim(), ys);
    Ok(Assembled {
        pairs: PairedEmbeddings::with_provenance(x, y, provenance)?,
        skipped,
    })
}

/// Replaces every vector `v` by `W·v`; keys are kept.
pub fn apply_transform(w: &TransformMatrix, emb: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    if emb.dim() != w.in_dim() {
        return Err(Error::DimensionError(format!(
            "embeddings have dimension {} but the transform expects {}",
            emb.dim(),
            w.in_dim()
        )));
    }
    let out = emb.vectors.matmul_t(w.matrix())?;
    Ok(EmbeddingMatrix {
        keys: emb.keys.clone(),
        index: emb.index.clone(),
        vectors: out,
    })
}

/// Which piece vectors represent a multi-piece word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    #[default]
    LeftMost,
    Mean,
    /// Piece `first + (count - 1) / 2`.
    Middle,
    RightMost,
}

impl std::str::FromStr for Reduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "leftmost" => Ok(Reduction::LeftMost),
            "mean" => Ok(Reduction::Mean),
            "middle" => Ok(Reduction::Middle),
            "rightmost" => Ok(Reduction::RightMost),
            other => Err(Error::InvalidInput(format!(
                "unknown reduction {other:?} (expected leftmost, mean, middle or rightmost)"
            ))),
        }
    }
}

/// Word spans of one sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceSpans {
    pub sentence_index: usize,
    pub spans: Vec<PieceSpan>,
}

/// Collapses piece-level rows to word-level rows keyed `"sentence:word"`.
pub fn reduce_to_words(
    emb: &EmbeddingMatrix,
    sentences: &[SentenceSpans],
    reduction: Reduction,
) -> Result<EmbeddingMatrix> {
    let d = emb.dim();
    let mut keys = Vec::new();
    let mut data = Vec::new();
    let lookup = |s: usize, p: usize| {
        let key = format!("{s}:{p}");
        emb.get(&key).ok_or(Error::MissingEmbedding(key))
    };
    for sent in sentences {
        for (w, span) in sent.spans.iter().enumerate() {
            if span.count == 0 {
                return Err(Error::InvalidInput(format!(
                    "word {w} of sentence {} has no pieces",
                    sent.sentence_index
                )));
            }
            let s = sent.sentence_index;
            match reduction {
                Reduction::LeftMost => data.extend_from_slice(lookup(s, span.first)?),
                Reduction::RightMost => data.extend_from_slice(lookup(s, span.last())?),
                Reduction::Middle => {
                    data.extend_from_slice(lookup(s, span.first + (span.count - 1) / 2)?)
                }
                Reduction::Mean => {
                    let mut acc = vec![0.0; d];
                    for p in span.first..span.first + span.count {
                        for (a, v) in acc.iter_mut().zip(lookup(s, p)?) {
                            *a += v;
                        }
                    }
                    data.extend(acc.iter().map(|a| a / span.count as f64));
                }
            }
            keys.push(format!("{s}:{w}"));
        }
    }
    let n = keys.len();
    EmbeddingMatrix::new(keys, Matrix::from_raw(n, d, data))
}
