use std::fmt;

/// Location inside an input file, for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Position {
    /// Byte offset into a binary file.
    Byte(u64),
    /// 1-based line number in a text file.
    Line(usize),
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Position::Byte(b) => write!(f, "byte {b}"),
            Position::Line(l) => write!(f, "line {l}"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: {0}")]
    DimensionError(String),

    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    SingularMatrix { row: usize, pivot: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("malformed bitext at line {line}: {reason}")]
    MalformedBitextLine { line: usize, reason: String },

    #[error("malformed alignment at line {line}: {reason}")]
    MalformedAlignmentLine { line: usize, reason: String },

    #[error("alignment link {target_index}-{source_index} out of range for sentence {sentence} ({target_len} target, {source_len} source tokens)")]
    LinkOutOfRange {
        sentence: usize,
        target_index: usize,
        source_index: usize,
        target_len: usize,
        source_len: usize,
    },

    #[error("corpus mismatch: {left_name} has {left} lines but {right_name} has {right}")]
    CorpusMismatch {
        left_name: String,
        left: usize,
        right_name: String,
        right: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("format error at {at}: {reason}")]
    Format { at: Position, reason: String },

    #[error("no usable training pairs ({skipped} skipped for missing embeddings)")]
    EmptyTrainingSet { skipped: usize },

    #[error("missing embedding for key {0:?}")]
    MissingEmbedding(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(at: Position, reason: impl Into<String>) -> Self {
        Error::Format {
            at,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalFailure(_) | Error::SingularMatrix { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
