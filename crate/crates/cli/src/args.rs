use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use clbt_core::embed::{EmbeddingFormat, Reduction};
use clbt_core::eval::Planted;
use clbt_core::fit::FitMethod;

#[derive(Debug, Parser)]
#[command(name = "clbt", version, about = "Fit and evaluate linear maps between contextual embedding spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Write the run summary as JSON to this file.
    #[arg(long, global = true, value_name = "FILE")]
    pub summary: Option<PathBuf>,

    /// Seed for every random choice in the run [default: 0, or the config
    /// file's seed].
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Repeat for more detailed logging on stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract one-to-one contextual word pairs from a word-aligned bitext.
    ExtractPairs(ExtractArgs),
    /// Fit a transform from paired embedding matrices.
    Fit(FitArgs),
    /// Map embeddings through a fitted transform.
    Apply(ApplyArgs),
    /// Score a transform on held-out pairs.
    Eval(EvalArgs),
    /// Refit on growing prefixes of the training pairs.
    Ablate(AblateArgs),
    /// Generate paired embeddings related by a planted map.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Text,
    Binary,
}

impl From<FormatArg> for EmbeddingFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Text => EmbeddingFormat::Text,
            FormatArg::Binary => EmbeddingFormat::Binary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Svd,
    Gd,
    Lsq,
}

impl From<MethodArg> for FitMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Svd => FitMethod::Svd,
            MethodArg::Gd => FitMethod::Gd,
            MethodArg::Lsq => FitMethod::Lsq,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReduceArg {
    Leftmost,
    Mean,
    Middle,
    Rightmost,
}

impl From<ReduceArg> for Reduction {
    fn from(r: ReduceArg) -> Self {
        match r {
            ReduceArg::Leftmost => Reduction::LeftMost,
            ReduceArg::Mean => Reduction::Mean,
            ReduceArg::Middle => Reduction::Middle,
            ReduceArg::Rightmost => Reduction::RightMost,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlantedArg {
    Orthogonal,
    General,
}

impl From<PlantedArg> for Planted {
    fn from(p: PlantedArg) -> Self {
        match p {
            PlantedArg::Orthogonal => Planted::Orthogonal,
            PlantedArg::General => Planted::GeneralLinear,
        }
    }
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Bitext with one `target ||| source` sentence pair per line.
    #[arg(long, value_name = "FILE", required_unless_present = "target_text", conflicts_with_all = ["target_text", "source_text"])]
    pub bitext: Option<PathBuf>,

    /// Target sentences, one per line (with --source-text instead of --bitext).
    #[arg(long, value_name = "FILE", requires = "source_text")]
    pub target_text: Option<PathBuf>,

    #[arg(long, value_name = "FILE", requires = "target_text")]
    pub source_text: Option<PathBuf>,

    /// Pharaoh alignments, `t-s` links with the target index first.
    #[arg(long, value_name = "FILE")]
    pub align: PathBuf,

    /// WordPiece vocabulary, one piece per line.
    #[arg(long, value_name = "FILE", required_unless_present = "pretokenized")]
    pub vocab: Option<PathBuf>,

    /// Treat bitext tokens as pieces already; skips the vocabulary.
    #[arg(long, conflicts_with = "vocab")]
    pub pretokenized: bool,

    /// Unknown-piece token of the vocabulary.
    #[arg(long, default_value = clbt_core::align::DEFAULT_UNK)]
    pub unk: String,

    /// Tab-separated pair list: sentence, target word, source word, and the
    /// first piece index of each word.
    #[arg(long, value_name = "FILE")]
    pub pairs_out: PathBuf,

    /// Piece-level target embeddings keyed `sentence:piece`.
    #[arg(long, value_name = "FILE", requires_all = ["source_emb", "pairs_x", "pairs_y"])]
    pub target_emb: Option<PathBuf>,

    #[arg(long, value_name = "FILE", requires = "target_emb")]
    pub source_emb: Option<PathBuf>,

    /// Where to write the assembled target-side training matrix.
    #[arg(long, value_name = "FILE", requires = "target_emb")]
    pub pairs_x: Option<PathBuf>,

    #[arg(long, value_name = "FILE", requires = "target_emb")]
    pub pairs_y: Option<PathBuf>,

    /// Which piece vectors stand for a multi-piece word.
    #[arg(long, value_enum, default_value = "leftmost")]
    pub reduce: ReduceArg,

    /// Fail on pairs whose embeddings are missing instead of skipping them.
    #[arg(long)]
    pub strict: bool,

    #[arg(long, value_enum, default_value = "binary")]
    pub format: FormatArg,
}

/// Solver flags; each overrides the config file, which overrides defaults.
#[derive(Debug, Args, Default)]
pub struct SolverArgs {
    /// TOML file with solver settings.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,

    #[arg(long)]
    pub lr: Option<f64>,

    #[arg(long)]
    pub beta1: Option<f64>,

    #[arg(long)]
    pub beta2: Option<f64>,

    #[arg(long)]
    pub epochs: Option<usize>,

    #[arg(long)]
    pub batch_size: Option<usize>,

    /// Relative objective change that counts as converged.
    #[arg(long)]
    pub tolerance: Option<f64>,

    /// Weight of an L2 penalty on W (gradient descent only).
    #[arg(long)]
    pub l2: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Target-side training vectors, one row per pair.
    #[arg(long, value_name = "FILE")]
    pub pairs_x: PathBuf,

    /// Source-side training vectors, aligned row by row with --pairs-x.
    #[arg(long, value_name = "FILE")]
    pub pairs_y: PathBuf,

    #[command(flatten)]
    pub solver: SolverArgs,

    /// Transform output file.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,

    /// Scale every training vector to unit length first.
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Debug, Args)]
pub struct ApplyArgs {
    #[arg(long, value_name = "FILE")]
    pub transform: PathBuf,

    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,

    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,

    #[arg(long, value_enum, default_value = "binary")]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Transform to score; without it the pairs are compared as given.
    #[arg(long, value_name = "FILE")]
    pub transform: Option<PathBuf>,

    #[arg(long, value_name = "FILE")]
    pub pairs_x: PathBuf,

    #[arg(long, value_name = "FILE")]
    pub pairs_y: PathBuf,

    /// Cut-offs for precision at k.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 5, 10])]
    pub k: Vec<usize>,

    /// JSON report output; the text report always goes to stdout.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,

    /// CSV of a joint 2D projection of mapped target and source vectors.
    #[arg(long, value_name = "FILE")]
    pub projection: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long, value_name = "FILE")]
    pub pairs_x: PathBuf,

    #[arg(long, value_name = "FILE")]
    pub pairs_y: PathBuf,

    /// Held-out target vectors for scoring each fit.
    #[arg(long, value_name = "FILE")]
    pub test_x: PathBuf,

    #[arg(long, value_name = "FILE")]
    pub test_y: PathBuf,

    /// Training-set sizes, strictly increasing.
    #[arg(long, value_delimiter = ',', required = true)]
    pub counts: Vec<usize>,

    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 5, 10])]
    pub k: Vec<usize>,

    /// Take prefixes of a seeded permutation instead of file order.
    #[arg(long)]
    pub shuffle: bool,

    #[command(flatten)]
    pub solver: SolverArgs,

    /// CSV output, one row per count.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,

    /// JSON report output.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Training pairs.
    #[arg(long)]
    pub n: usize,

    /// Held-out pairs.
    #[arg(long, default_value_t = 1000)]
    pub n_test: usize,

    #[arg(long)]
    pub d: usize,

    /// Standard deviation of the additive Gaussian noise on Y.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,

    #[arg(long, value_enum, default_value = "orthogonal")]
    pub planted: PlantedArg,

    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,

    #[arg(long, value_enum, default_value = "binary")]
    pub format: FormatArg,
}
