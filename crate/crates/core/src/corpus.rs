//! Labelled comment corpora: loading, label statistics and partitioning.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("dataset not found: {}", .0.display())]
    NotFound(PathBuf),
    #[error("failed to read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("no valid rows left in {0} after filtering")]
    EmptyAfterFiltering(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("unknown sentiment label {0:?} (expected positive, negative or neutral)")]
    UnknownLabel(String),
    #[error("train ratio {0} is outside the open interval (0, 1)")]
    RatioOutOfRange(f64),
    #[error("corpus of {n} records is too small: {reason}")]
    TooSmall { n: usize, reason: String },
    #[error("k = {k} is out of range for a corpus of {n} records (need 2 <= k <= n)")]
    KOutOfRange { k: usize, n: usize },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

/// One of the three sentiment classes.
///
/// The integer codes index confusion matrices and score vectors and never
/// change between runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sentiment {
    Negative = 0,
    Neutral = 1,
    Positive = 2,
}

impl Sentiment {
    pub const ALL: [Sentiment; 3] = [Sentiment::Negative, Sentiment::Neutral, Sentiment::Positive];
    pub const COUNT: usize = 3;

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sentiment::Negative => "negative",
            Sentiment::Neutral => "neutral",
            Sentiment::Positive => "positive",
        }
    }
}

impl fmt::Display for Sentiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Sentiment {
    type Err = CorpusError;

    /// Case-insensitive; surrounding whitespace is ignored.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        Self::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(t))
            .ok_or_else(|| CorpusError::UnknownLabel(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledComment {
    /// Zero-based ordinal of the data row in its source file.
    pub row_id: usize,
    pub text: String,
    pub label: Sentiment,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub records: Vec<LabeledComment>,
    pub source_path: String,
    pub dedup_applied: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    pub has_header: bool,
    pub dedup: bool,
    /// Drop malformed rows instead of aborting.
    pub skip_bad_rows: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            has_header: false,
            dedup: true,
            skip_bad_rows: false,
        }
    }
}

/// What was discarded while loading.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    /// `(line, reason)` for every malformed row that was skipped.
    pub skipped_rows: Vec<(u64, String)>,
    pub duplicates_removed: usize,
}

/// Loads a `comment,sentiment[,ignored...]` CSV file.
pub fn load_csv(path: impl AsRef<Path>, options: &LoadOptions) -> Result<Corpus> {
    load_csv_with_report(path, options).map(|(c, _)| c)
}

pub fn load_csv_with_report(
    path: impl AsRef<Path>,
    options: &LoadOptions,
) -> Result<(Corpus, LoadReport)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => CorpusError::NotFound(path.to_path_buf()),
        _ => CorpusError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    read_csv(file, &path.display().to_string(), options)
}

/// Parses corpus CSV from any reader. `source` is recorded as provenance.
pub fn read_csv<R: Read>(
    reader: R,
    source: &str,
    options: &LoadOptions,
) -> Result<(Corpus, LoadReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(options.has_header)
        .flexible(true)
        .from_reader(reader);

    let mut report = LoadReport::default();
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    let mut record = csv::ByteRecord::new();
    let mut row_id = 0usize;

    while rdr.read_byte_record(&mut record)? {
        let line = record.position().map_or(0, |p| p.line());
        let this_row = row_id;
        row_id += 1;

        // A line holding nothing but whitespace is not a data row.
        if record.len() == 1 && record[0].iter().all(u8::is_ascii_whitespace) {
            continue;
        }

        match parse_row(&record, this_row) {
            Ok(comment) => {
                if options.dedup && !seen.insert((comment.text.clone(), comment.label)) {
                    report.duplicates_removed += 1;
                    continue;
                }
                records.push(comment);
            }
            Err(reason) if options.skip_bad_rows => report.skipped_rows.push((line, reason)),
            Err(reason) => return Err(CorpusError::MalformedRow { line, reason }),
        }
    }

    if records.is_empty() {
        return Err(CorpusError::EmptyAfterFiltering(source.to_string()));
    }
    let corpus = Corpus {
        records,
        source_path: source.to_string(),
        dedup_applied: options.dedup,
    };
    Ok((corpus, report))
}

fn parse_row(
    record: &csv::ByteRecord,
    row_id: usize,
) -> std::result::Result<LabeledComment, String> {
    if record.len() < 2 {
        return Err(format!(
            "expected at least 2 fields, found {}",
            record.len()
        ));
    }
    let text = String::from_utf8_lossy(&record[0]).into_owned();
    if text.trim().is_empty() {
        return Err("empty comment text".to_string());
    }
    let raw_label = String::from_utf8_lossy(&record[1]);
    let label = raw_label.parse::<Sentiment>().map_err(|e| e.to_string())?;
    Ok(LabeledComment {
        row_id,
        text,
        label,
    })
}

impl Corpus {
    pub fn new(records: Vec<LabeledComment>, source_path: impl Into<String>) -> Self {
        Self {
            records,
            source_path: source_path.into(),
            dedup_applied: false,
        }
    }

    /// Builds a corpus from `(text, label)` pairs, numbering rows from 0.
    pub fn from_pairs<S: Into<String>>(
        pairs: impl IntoIterator<Item = (S, Sentiment)>,
        source_path: impl Into<String>,
    ) -> Self {
        let records = pairs
            .into_iter()
            .enumerate()
            .map(|(row_id, (text, label))| LabeledComment {
                row_id,
                text: text.into(),
                label,
            })
            .collect();
        Self::new(records, source_path)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Vec<Sentiment> {
        self.records.iter().map(|r| r.label).collect()
    }

    fn subset(&self, positions: &[usize], tag: &str) -> Corpus {
        Corpus {
            records: positions.iter().map(|&i| self.records[i].clone()).collect(),
            source_path: format!("{}#{tag}", self.source_path),
            dedup_applied: self.dedup_applied,
        }
    }

    /// Writes the cleaned corpus as `comment,sentiment` CSV with a header.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["comment", "sentiment"])?;
        for r in &self.records {
            wtr.write_record([r.text.as_str(), r.label.as_str()])?;
        }
        wtr.flush().map_err(|e| CorpusError::Io {
            path: PathBuf::from(&self.source_path),
            source: e,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassShare {
    pub count: usize,
    pub fraction: f64,
}

/// Count and fraction of every class, absent classes included.
pub fn label_distribution(c: &Corpus) -> Result<BTreeMap<Sentiment, ClassShare>> {
    label_distribution_of(c.records.iter().map(|r| r.label))
}

pub fn label_distribution_of(
    labels: impl IntoIterator<Item = Sentiment>,
) -> Result<BTreeMap<Sentiment, ClassShare>> {
    let mut counts = [0usize; Sentiment::COUNT];
    for l in labels {
        counts[l.code()] += 1;
    }
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(CorpusError::EmptyCorpus);
    }
    Ok(Sentiment::ALL
        .into_iter()
        .map(|s| {
            let count = counts[s.code()];
            (
                s,
                ClassShare {
                    count,
                    fraction: count as f64 / n as f64,
                },
            )
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult {
    pub train: Corpus,
    pub test: Corpus,
    pub seed: u64,
    pub train_ratio: f64,
}

/// Number of training records for a ratio: `floor(ratio * n)`.
///
/// A relative nudge of a few ulps keeps products such as `0.29 * 100`
/// from flooring one below the exact rational result.
pub fn train_size(n: usize, train_ratio: f64) -> usize {
    let exact = train_ratio * n as f64;
    (exact + exact * 4.0 * f64::EPSILON).floor() as usize
}

/// Positions `0..n` shuffled by the seeded PRNG, then cut into train/test.
pub fn split_indices(n: usize, train_ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(CorpusError::RatioOutOfRange(train_ratio));
    }
    if n < 2 {
        return Err(CorpusError::TooSmall {
            n,
            reason: "a split needs at least 2 records".into(),
        });
    }
    let cut = train_size(n, train_ratio);
    if cut == 0 || cut == n {
        return Err(CorpusError::TooSmall {
            n,
            reason: format!("ratio {train_ratio} leaves one side of the split empty"),
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));
    let test = order.split_off(cut);
    Ok((order, test))
}

/// Seeded, unstratified shuffle split.
pub fn split(c: &Corpus, train_ratio: f64, seed: u64) -> Result<SplitResult> {
    let (train, test) = split_indices(c.len(), train_ratio, seed)?;
    Ok(SplitResult {
        train: c.subset(&train, "train"),
        test: c.subset(&test, "test"),
        seed,
        train_ratio,
    })
}

/// Test-fold positions for k-fold cross-validation.
///
/// The first `n mod k` folds hold one extra record.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(CorpusError::KOutOfRange { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        folds.push(order[start..start + len].to_vec());
        start += len;
    }
    Ok(folds)
}

/// Complement of a test fold, in ascending position order.
pub fn complement(n: usize, fold: &[usize]) -> Vec<usize> {
    let mut in_fold = vec![false; n];
    for &i in fold {
        in_fold[i] = true;
    }
    (0..n).filter(|&i| !in_fold[i]).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fold {
    pub train: Corpus,
    pub test: Corpus,
}

pub fn kfold(c: &Corpus, k: usize, seed: u64) -> Result<Vec<Fold>> {
    let folds = kfold_indices(c.len(), k, seed)?;
    Ok(folds
        .iter()
        .enumerate()
        .map(|(i, test)| Fold {
            train: c.subset(&complement(c.len(), test), &format!("fold{i}-train")),
            test: c.subset(test, &format!("fold{i}-test")),
        })
        .collect())
}
