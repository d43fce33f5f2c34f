//! Contextual word pairs from a parallel corpus and its word alignments.
//!
//! Bitext lines are `target sentence ||| source sentence`; alignment lines
//! are Pharaoh `t-s` links whose left index refers to the target (first)
//! segment. Many-to-many links are collapsed to one-to-one pairs by keeping
//! the left-most partner on each side.

mod wordpiece;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{BufRead, Write};

pub use wordpiece::{
    detokenize, identity_spans, word_to_piece_spans, PieceSpan, WordPieceVocab,
    CONTINUATION_PREFIX, DEFAULT_UNK,
};

use crate::error::{Error, Position, Result};

/// Literal separator between the target and source sides of a bitext line.
pub const BITEXT_SEPARATOR: &str = " ||| ";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitextSentence {
    pub index: usize,
    pub target_tokens: Vec<String>,
    pub source_tokens: Vec<String>,
}

/// Parses `target ||| source` lines. Exactly one separator per line.
pub fn parse_bitext<R: BufRead>(reader: R) -> Result<Vec<BitextSentence>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        let lineno = i + 1;
        let malformed = |reason: &str| Error::MalformedBitextLine {
            line: lineno,
            reason: reason.to_string(),
        };
        let mut parts = line.split(BITEXT_SEPARATOR);
        let (Some(target), Some(source), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(if line.contains(BITEXT_SEPARATOR) {
                malformed("more than one \" ||| \" separator")
            } else {
                malformed("missing \" ||| \" separator")
            });
        };
        let target_tokens = split_tokens(target);
        let source_tokens = split_tokens(source);
        if target_tokens.is_empty() {
            return Err(malformed("empty target side"));
        }
        if source_tokens.is_empty() {
            return Err(malformed("empty source side"));
        }
        out.push(BitextSentence {
            index: out.len(),
            target_tokens,
            source_tokens,
        });
    }
    Ok(out)
}

/// Parses two line-aligned single-language files.
pub fn parse_parallel<T: BufRead, S: BufRead>(
    target: T,
    source: S,
) -> Result<Vec<BitextSentence>> {
    let target: Vec<String> = target.lines().collect::<std::io::Result<_>>()?;
    let source: Vec<String> = source.lines().collect::<std::io::Result<_>>()?;
    if target.len() != source.len() {
        return Err(Error::CorpusMismatch {
            left_name: "target text".into(),
            left: target.len(),
            right_name: "source text".into(),
            right: source.len(),
        });
    }
    target
        .iter()
        .zip(&source)
        .enumerate()
        .map(|(i, (t, s))| {
            let target_tokens = split_tokens(t);
            let source_tokens = split_tokens(s);
            if target_tokens.is_empty() || source_tokens.is_empty() {
                return Err(Error::MalformedBitextLine {
                    line: i + 1,
                    reason: "empty sentence".into(),
                });
            }
            Ok(BitextSentence {
                index: i,
                target_tokens,
                source_tokens,
            })
        })
        .collect()
}

fn split_tokens(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

/// Deduplicated `(target, source)` links for one sentence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlignmentLinkSet {
    pub sentence_index: usize,
    pub links: BTreeSet<(usize, usize)>,
}

impl AlignmentLinkSet {
    pub fn new(sentence_index: usize, links: impl IntoIterator<Item = (usize, usize)>) -> Self {
        AlignmentLinkSet {
            sentence_index,
            links: links.into_iter().collect(),
        }
    }
}

/// Parses Pharaoh alignments, one sentence per line.
pub fn parse_pharaoh<R: BufRead>(reader: R) -> Result<Vec<AlignmentLinkSet>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let mut links = BTreeSet::new();
        for tok in line.split_whitespace() {
            let link = tok
                .split_once('-')
                .and_then(|(t, s)| Some((parse_index(t)?, parse_index(s)?)));
            match link {
                Some(l) => {
                    links.insert(l);
                }
                None => {
                    return Err(Error::MalformedAlignmentLine {
                        line: i + 1,
                        reason: format!("bad link {tok:?}, expected \"t-s\""),
                    })
                }
            }
        }
        out.push(AlignmentLinkSet {
            sentence_index: i,
            links,
        });
    }
    Ok(out)
}

// usize::from_str accepts a leading '+', Pharaoh does not
fn parse_index(s: &str) -> Option<usize> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// One aligned contextual occurrence: word `target_index` of the target
/// sentence paired with word `source_index` of the source sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ContextualPair {
    pub sentence_index: usize,
    pub target_index: usize,
    pub source_index: usize,
}

/// Collapses a link set to one-to-one pairs, sorted by target index.
///
/// First every target word keeps only its smallest source index, then every
/// source word claimed more than once keeps only its smallest target index.
pub fn resolve_one_to_one(
    links: &AlignmentLinkSet,
    target_len: usize,
    source_len: usize,
) -> Result<Vec<ContextualPair>> {
    let mut by_target: BTreeMap<usize, usize> = BTreeMap::new();
    for &(t, s) in &links.links {
        if t >= target_len || s >= source_len {
            return Err(Error::LinkOutOfRange {
                sentence: links.sentence_index,
                target_index: t,
                source_index: s,
                target_len,
                source_len,
            });
        }
        by_target
            .entry(t)
            .and_modify(|cur| *cur = (*cur).min(s))
            .or_insert(s);
    }
    let mut claimed = HashSet::new();
    Ok(by_target
        .into_iter()
        .filter(|&(_, s)| claimed.insert(s))
        .map(|(t, s)| ContextualPair {
            sentence_index: links.sentence_index,
            target_index: t,
            source_index: s,
        })
        .collect())
}

/// How sentence tokens map onto embedding rows.
#[derive(Debug, Clone, Copy)]
pub enum Segmentation<'a> {
    /// Words are split with a WordPiece vocabulary.
    WordPiece(&'a WordPieceVocab),
    /// Tokens are already pieces; each token is its own span.
    Pretokenized,
}

impl Segmentation<'_> {
    pub fn spans<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<PieceSpan>> {
        match self {
            Segmentation::WordPiece(v) => word_to_piece_spans(tokens, v),
            Segmentation::Pretokenized => Ok(identity_spans(tokens.len())),
        }
    }
}

/// Resolved pairs of one sentence plus both sides' word→piece spans.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceAlignment {
    pub sentence_index: usize,
    pub pairs: Vec<ContextualPair>,
    pub target_spans: Vec<PieceSpan>,
    pub source_spans: Vec<PieceSpan>,
}

impl SentenceAlignment {
    pub fn records(&self) -> impl Iterator<Item = PairRecord> + '_ {
        self.pairs.iter().map(|p| PairRecord {
            sentence_index: p.sentence_index,
            target_index: p.target_index,
            source_index: p.source_index,
            target_first_piece: self.target_spans[p.target_index].first,
            source_first_piece: self.source_spans[p.source_index].first,
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub sentences: Vec<SentenceAlignment>,
    pub total_pairs: usize,
}

impl Extraction {
    pub fn records(&self) -> impl Iterator<Item = PairRecord> + '_ {
        self.sentences.iter().flat_map(SentenceAlignment::records)
    }
}

/// Joins bitext and alignments sentence by sentence.
pub fn extract_pairs(
    bitext: &[BitextSentence],
    alignments: &[AlignmentLinkSet],
    segmentation: Segmentation<'_>,
) -> Result<Extraction> {
    if bitext.len() != alignments.len() {
        return Err(Error::CorpusMismatch {
            left_name: "bitext".into(),
            left: bitext.len(),
            right_name: "alignment file".into(),
            right: alignments.len(),
        });
    }
    let mut out = Extraction::default();
    for (sent, links) in bitext.iter().zip(alignments) {
        let pairs = resolve_one_to_one(
            &AlignmentLinkSet {
                sentence_index: sent.index,
                links: links.links.clone(),
            },
            sent.target_tokens.len(),
            sent.source_tokens.len(),
        )?;
        out.total_pairs += pairs.len();
        out.sentences.push(SentenceAlignment {
            sentence_index: sent.index,
            pairs,
            target_spans: segmentation.spans(&sent.target_tokens)?,
            source_spans: segmentation.spans(&sent.source_tokens)?,
        });
    }
    Ok(out)
}

/// One line of the pair file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairRecord {
    pub sentence_index: usize,
    pub target_index: usize,
    pub source_index: usize,
    pub target_first_piece: usize,
    pub source_first_piece: usize,
}

impl PairRecord {
    pub fn pair(&self) -> ContextualPair {
        ContextualPair {
            sentence_index: self.sentence_index,
            target_index: self.target_index,
            source_index: self.source_index,
        }
    }

    /// Embedding key of the target side's left-most piece.
    pub fn target_key(&self) -> String {
        format!("{}:{}", self.sentence_index, self.target_first_piece)
    }

    pub fn source_key(&self) -> String {
        format!("{}:{}", self.sentence_index, self.source_first_piece)
    }
}

/// Writes tab-separated pair records, one per line.
pub fn write_pairs<W: Write>(mut w: W, records: impl IntoIterator<Item = PairRecord>) -> Result<usize> {
    let mut n = 0;
    for r in records {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            r.sentence_index, r.target_index, r.source_index, r.target_first_piece, r.source_first_piece
        )?;
        n += 1;
    }
    w.flush()?;
    Ok(n)
}

pub fn read_pairs<R: BufRead>(reader: R) -> Result<Vec<PairRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let fields: Vec<&str> = line.split('\t').collect();
        let parsed: Option<Vec<usize>> = fields.iter().map(|f| parse_index(f)).collect();
        match parsed.as_deref() {
            Some(&[sentence_index, target_index, source_index, target_first_piece, source_first_piece]) => {
                out.push(PairRecord {
                    sentence_index,
                    target_index,
                    source_index,
                    target_first_piece,
                    source_first_piece,
                })
            }
            _ => {
                return Err(Error::format(
                    Position::Line(i + 1),
                    "expected five tab-separated non-negative integers",
                ))
            }
        }
    }
    Ok(out)
}
