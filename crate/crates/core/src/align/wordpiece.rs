use std::collections::HashMap;
use std::io::BufRead;

use crate::error::{Error, Result};

/// Prefix carried by non-initial pieces of a word.
pub const CONTINUATION_PREFIX: &str = "##";

/// Unknown-token string used by BERT vocabularies.
pub const DEFAULT_UNK: &str = "[UNK]";

/// WordPiece vocabulary; line order of the source file defines piece ids.
#[derive(Debug, Clone)]
pub struct WordPieceVocab {
    entries: Vec<String>,
    ids: HashMap<String, u32>,
    unk: String,
}

impl WordPieceVocab {
    pub fn new<I, S>(entries: I, unk: &str) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut ids = HashMap::new();
        let mut list = Vec::new();
        for e in entries {
            let e: String = e.into();
            if e.is_empty() || e.chars().any(char::is_whitespace) {
                return Err(Error::InvalidInput(format!(
                    "vocabulary entry {} is empty or contains whitespace",
                    list.len() + 1
                )));
            }
            let id = list.len() as u32;
            if ids.insert(e.clone(), id).is_some() {
                return Err(Error::InvalidInput(format!(
                    "duplicate vocabulary entry {e:?}"
                )));
            }
            list.push(e);
        }
        if !ids.contains_key(unk) {
            return Err(Error::InvalidInput(format!(
                "unknown token {unk:?} is not in the vocabulary"
            )));
        }
        Ok(WordPieceVocab {
            entries: list,
            ids,
            unk: unk.to_string(),
        })
    }

    /// Reads one piece per line. Blank lines are rejected, a trailing newline is not.
    pub fn read<R: BufRead>(reader: R, unk: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let piece = line.strip_suffix('\r').unwrap_or(&line);
            if piece.is_empty() {
                return Err(Error::format(
                    crate::error::Position::Line(i + 1),
                    "empty vocabulary line",
                ));
            }
            entries.push(piece.to_string());
        }
        WordPieceVocab::new(entries, unk)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn unk(&self) -> &str {
        &self.unk
    }

    pub fn id(&self, piece: &str) -> Option<u32> {
        self.ids.get(piece).copied()
    }

    pub fn contains(&self, piece: &str) -> bool {
        self.ids.contains_key(piece)
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    /// Greedy longest-match-first segmentation of a single word.
    ///
    /// Returns `[unk]` if some position of the word cannot be matched.
    pub fn tokenize(&self, word: &str) -> Result<Vec<String>> {
        if word.is_empty() {
            return Err(Error::InvalidInput("cannot tokenize an empty word".into()));
        }
        if word.chars().any(char::is_whitespace) {
            return Err(Error::InvalidInput(format!(
                "word {word:?} contains whitespace"
            )));
        }
        let boundaries: Vec<usize> = word
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(word.len()))
            .collect();

        let mut pieces = Vec::new();
        let mut start = 0; // index into `boundaries`
        let last = boundaries.len() - 1;
        let mut candidate = String::with_capacity(word.len() + CONTINUATION_PREFIX.len());
        while start < last {
            let mut matched = None;
            for end in (start + 1..=last).rev() {
                candidate.clear();
                if start > 0 {
                    candidate.push_str(CONTINUATION_PREFIX);
                }
                candidate.push_str(&word[boundaries[start]..boundaries[end]]);
                if self.ids.contains_key(candidate.as_str()) {
                    matched = Some(end);
                    break;
                }
            }
            match matched {
                Some(end) => {
                    pieces.push(candidate.clone());
                    start = end;
                }
                None => return Ok(vec![self.unk.clone()]),
            }
        }
        Ok(pieces)
    }
}

/// Position of one word's pieces inside the sentence's piece sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PieceSpan {
    pub first: usize,
    pub count: usize,
}

impl PieceSpan {
    pub fn last(&self) -> usize {
        self.first + self.count - 1
    }
}

/// Piece spans for every word of a sentence, in word order.
pub fn word_to_piece_spans<S: AsRef<str>>(
    tokens: &[S],
    vocab: &WordPieceVocab,
) -> Result<Vec<PieceSpan>> {
    let mut spans = Vec::with_capacity(tokens.len());
    let mut next = 0;
    for t in tokens {
        let count = vocab.tokenize(t.as_ref())?.len();
        spans.push(PieceSpan { first: next, count });
        next += count;
    }
    Ok(spans)
}

/// Spans for text that is already split into pieces: one piece per token.
pub fn identity_spans(n_tokens: usize) -> Vec<PieceSpan> {
    (0..n_tokens)
        .map(|i| PieceSpan { first: i, count: 1 })
        .collect()
}

/// Inverse of tokenization for the non-unknown case.
pub fn detokenize<S: AsRef<str>>(pieces: &[S]) -> String {
    pieces
        .iter()
        .map(|p| {
            let p = p.as_ref();
            p.strip_prefix(CONTINUATION_PREFIX).unwrap_or(p)
        })
        .collect()
}
