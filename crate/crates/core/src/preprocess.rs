//! Text preprocessing: lowercasing, whitespace tokenization and stop-word
//! removal, applied row by row to a corpus.

use std::collections::BTreeSet;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, LabeledComment, Sentiment};

const DEFAULT_STOPWORDS: &str = include_str!("../data/roman_urdu_stopwords.txt");

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("stop-word file not found: {}", .0.display())]
    NotFound(PathBuf),
    #[error("failed to read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{source_path}:{line}: stop-word entry {entry:?} contains whitespace")]
    EntryWithWhitespace {
        source_path: String,
        line: usize,
        entry: String,
    },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("preprocessed csv row {line}: {reason}")]
    BadRow { line: u64, reason: String },
    #[error("corpus and document counts differ ({records} records, {docs} documents)")]
    LengthMismatch { records: usize, docs: usize },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = PreprocessError> = std::result::Result<T, E>;

/// A set of lowercase stop words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopWordList {
    words: BTreeSet<String>,
    pub source_path: String,
}

impl StopWordList {
    /// Parses the one-word-per-line format. Blank lines and lines starting
    /// with `#` are ignored; entries are lowercased.
    pub fn parse(text: &str, source_path: impl Into<String>) -> Result<Self> {
        let source_path = source_path.into();
        let mut words = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let entry = raw.trim();
            if entry.is_empty() || entry.starts_with('#') {
                continue;
            }
            if entry.chars().any(char::is_whitespace) {
                return Err(PreprocessError::EntryWithWhitespace {
                    source_path,
                    line: i + 1,
                    entry: entry.to_string(),
                });
            }
            words.insert(lowercase(entry));
        }
        Ok(Self { words, source_path })
    }

    /// The bundled Roman Urdu list.
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_STOPWORDS, "<builtin>").expect("bundled stop-word list is valid")
    }

    pub fn empty() -> Self {
        Self {
            words: BTreeSet::new(),
            source_path: "<empty>".into(),
        }
    }

    pub fn from_words<S: AsRef<str>>(words: impl IntoIterator<Item = S>) -> Result<Self> {
        let text = words
            .into_iter()
            .map(|w| w.as_ref().to_string())
            .collect::<Vec<_>>()
            .join("\n");
        Self::parse(&text, "<inline>")
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}

pub fn load_stopwords(path: impl AsRef<Path>) -> Result<StopWordList> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => PreprocessError::NotFound(path.to_path_buf()),
        _ => PreprocessError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    StopWordList::parse(&text, path.display().to_string())
}

/// Per-character lowercase mapping. Non-letters pass through unchanged.
pub fn lowercase(text: &str) -> String {
    text.chars().flat_map(char::to_lowercase).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizeOptions {
    /// Trim ASCII punctuation from both ends of every token.
    pub strip_punctuation: bool,
}

/// Splits on runs of whitespace. Never yields an empty token.
pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_with(text, TokenizeOptions::default())
}

pub fn tokenize_with(text: &str, options: TokenizeOptions) -> Vec<String> {
    text.split_whitespace()
        .map(|t| {
            if options.strip_punctuation {
                t.trim_matches(|c: char| c.is_ascii_punctuation())
            } else {
                t
            }
        })
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn remove_stopwords(tokens: Vec<String>, sw: &StopWordList) -> Vec<String> {
    tokens.into_iter().filter(|t| !sw.contains(t)).collect()
}

/// A comment after preprocessing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedComment {
    pub row_id: usize,
    pub tokens: Vec<String>,
    pub label: Sentiment,
    pub text_final: String,
}

impl TokenizedComment {
    pub fn new(row_id: usize, tokens: Vec<String>, label: Sentiment) -> Self {
        let text_final = tokens.join(" ");
        Self {
            row_id,
            tokens,
            label,
            text_final,
        }
    }

    /// True when stop-word removal left nothing.
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

impl AsRef<[String]> for TokenizedComment {
    fn as_ref(&self) -> &[String] {
        &self.tokens
    }
}

pub fn preprocess_comment(
    record: &LabeledComment,
    sw: &StopWordList,
    options: TokenizeOptions,
) -> TokenizedComment {
    let tokens = remove_stopwords(tokenize_with(&lowercase(&record.text), options), sw);
    TokenizedComment::new(record.row_id, tokens, record.label)
}

/// Runs lowercase → tokenize → stop-word removal over every record.
///
/// Output order and length match the corpus; records emptied by stop-word
/// removal are kept.
pub fn preprocess_corpus(
    c: &Corpus,
    sw: &StopWordList,
    options: TokenizeOptions,
) -> Result<Vec<TokenizedComment>> {
    if c.is_empty() {
        return Err(PreprocessError::EmptyCorpus);
    }
    Ok(c.records
        .par_iter()
        .map(|r| preprocess_comment(r, sw, options))
        .collect())
}

/// Writes `comment,sentiment,text_final` CSV.
pub fn write_preprocessed_csv<W: Write>(
    c: &Corpus,
    docs: &[TokenizedComment],
    writer: W,
) -> Result<()> {
    if c.len() != docs.len() {
        return Err(PreprocessError::LengthMismatch {
            records: c.len(),
            docs: docs.len(),
        });
    }
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["comment", "sentiment", "text_final"])?;
    for (r, d) in c.records.iter().zip(docs) {
        wtr.write_record([r.text.as_str(), d.label.as_str(), d.text_final.as_str()])?;
    }
    wtr.flush().map_err(|e| PreprocessError::Io {
        path: PathBuf::from(&c.source_path),
        source: e,
    })
}

/// Reads CSV written by [`write_preprocessed_csv`]. Row ids are the data-row
/// ordinals of the file.
pub fn read_preprocessed_csv<R: Read>(
    reader: R,
    source: &str,
) -> Result<(Corpus, Vec<TokenizedComment>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let mut records = Vec::new();
    let mut docs = Vec::new();
    for (row_id, row) in rdr.records().enumerate() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |reason: String| PreprocessError::BadRow { line, reason };
        if row.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", row.len())));
        }
        let label: Sentiment = row[1]
            .parse()
            .map_err(|e: crate::corpus::CorpusError| bad(e.to_string()))?;
        records.push(LabeledComment {
            row_id,
            text: row[0].to_string(),
            label,
        });
        docs.push(TokenizedComment::new(row_id, tokenize(&row[2]), label));
    }
    Ok((Corpus::new(records, source), docs))
}
