//! TF-IDF features.
//!
//! Term weights are raw in-document counts multiplied by the smoothed
//! inverse document frequency `ln((1 + N) / (1 + df)) + 1`, and every
//! document vector is scaled to unit l2 norm unless it is all zero. The
//! vocabulary keeps at most `max_features` terms, chosen by descending total
//! corpus frequency with ties going to the lexicographically smaller term;
//! retained terms are indexed in lexicographic order.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Sentiment;
use crate::preprocess::TokenizedComment;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("cannot fit a vocabulary on zero documents")]
    EmptyInput,
    #[error("no terms to fit: every document is empty")]
    NoTerms,
    #[error("max_features must be at least 1")]
    ZeroMaxFeatures,
    #[error("invalid or unfitted TF-IDF model: {0}")]
    InvalidModel(String),
    #[error("invalid sparse vector: {0}")]
    InvalidVector(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = FeatureError> = std::result::Result<T, E>;

/// Sorted `(index, weight)` pairs over a fixed dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    dimension: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    /// Validates that indices are strictly increasing and below `dimension`.
    /// Zero weights are dropped.
    pub fn new(dimension: usize, entries: Vec<(usize, f64)>) -> Result<Self> {
        for w in entries.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(FeatureError::InvalidVector(format!(
                    "indices not strictly increasing at {}",
                    w[1].0
                )));
            }
        }
        if let Some(&(i, _)) = entries.last() {
            if i >= dimension {
                return Err(FeatureError::InvalidVector(format!(
                    "index {i} out of range for dimension {dimension}"
                )));
            }
        }
        if entries.iter().any(|(_, v)| !v.is_finite()) {
            return Err(FeatureError::InvalidVector("non-finite weight".into()));
        }
        let entries = entries.into_iter().filter(|&(_, v)| v != 0.0).collect();
        Ok(Self { dimension, entries })
    }

    pub fn zeros(dimension: usize) -> Self {
        Self {
            dimension,
            entries: Vec::new(),
        }
    }

    pub fn from_dense(values: &[f64]) -> Self {
        Self {
            dimension: values.len(),
            entries: values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i, *v))
                .collect(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut a, mut b) = (
            self.entries.iter().peekable(),
            other.entries.iter().peekable(),
        );
        let mut sum = 0.0;
        while let (Some(&&(i, x)), Some(&&(j, y))) = (a.peek(), b.peek()) {
            match i.cmp(&j) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => {
                    sum += x * y;
                    a.next();
                    b.next();
                }
            }
        }
        sum
    }

    /// Dot product with a dense slice of length `dimension`.
    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| v * dense[i]).sum()
    }

    /// Copy scaled to unit l2 norm; the zero vector stays zero.
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            return self.clone();
        }
        Self {
            dimension: self.dimension,
            entries: self.entries.iter().map(|&(i, v)| (i, v / n)).collect(),
        }
    }
}

/// Rows of sparse vectors with aligned labels and row ids.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub dimension: usize,
    pub rows: Vec<SparseVector>,
    pub labels: Vec<Sentiment>,
    pub row_ids: Vec<usize>,
}

impl FeatureMatrix {
    pub fn new(dimension: usize, rows: Vec<SparseVector>, labels: Vec<Sentiment>) -> Result<Self> {
        let row_ids = (0..rows.len()).collect();
        Self::with_row_ids(dimension, rows, labels, row_ids)
    }

    pub fn with_row_ids(
        dimension: usize,
        rows: Vec<SparseVector>,
        labels: Vec<Sentiment>,
        row_ids: Vec<usize>,
    ) -> Result<Self> {
        if rows.len() != labels.len() || rows.len() != row_ids.len() {
            return Err(FeatureError::InvalidVector(format!(
                "{} rows, {} labels, {} row ids",
                rows.len(),
                labels.len(),
                row_ids.len()
            )));
        }
        if let Some(r) = rows.iter().find(|r| r.dimension != dimension) {
            return Err(FeatureError::InvalidVector(format!(
                "row of dimension {} in a matrix of dimension {dimension}",
                r.dimension
            )));
        }
        Ok(Self {
            dimension,
            rows,
            labels,
            row_ids,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows at the given positions, in that order.
    pub fn select(&self, positions: &[usize]) -> Self {
        Self {
            dimension: self.dimension,
            rows: positions.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: positions.iter().map(|&i| self.labels[i]).collect(),
            row_ids: positions.iter().map(|&i| self.row_ids[i]).collect(),
        }
    }

    pub fn class_counts(&self) -> [usize; Sentiment::COUNT] {
        let mut counts = [0; Sentiment::COUNT];
        for l in &self.labels {
            counts[l.code()] += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    term_to_index: HashMap<String, usize>,
    document_frequency: Vec<usize>,
    total_documents: usize,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.term_to_index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> Option<&str> {
        self.terms.get(index).map(String::as_str)
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn document_frequency(&self, index: usize) -> usize {
        self.document_frequency[index]
    }

    pub fn total_documents(&self) -> usize {
        self.total_documents
    }
}

/// A fitted TF-IDF vocabulary with idf weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfModel {
    vocabulary: Vocabulary,
    idf: Vec<f64>,
    max_features: usize,
}

pub fn smoothed_idf(total_documents: usize, df: usize) -> f64 {
    ((1.0 + total_documents as f64) / (1.0 + df as f64)).ln() + 1.0
}

struct TermStats {
    total: usize,
    df: usize,
    last_doc: usize,
}

impl TfIdfModel {
    pub fn fit<D: AsRef<[String]>>(docs: &[D], max_features: usize) -> Result<Self> {
        if docs.is_empty() {
            return Err(FeatureError::EmptyInput);
        }
        if max_features == 0 {
            return Err(FeatureError::ZeroMaxFeatures);
        }
        let mut stats: HashMap<&str, TermStats> = HashMap::new();
        for (d, doc) in docs.iter().enumerate() {
            for tok in doc.as_ref() {
                let s = stats.entry(tok.as_str()).or_insert(TermStats {
                    total: 0,
                    df: 0,
                    last_doc: usize::MAX,
                });
                s.total += 1;
                if s.last_doc != d {
                    s.df += 1;
                    s.last_doc = d;
                }
            }
        }
        if stats.is_empty() {
            return Err(FeatureError::NoTerms);
        }

        let mut ranked: Vec<(&str, TermStats)> = stats.into_iter().collect();
        if ranked.len() > max_features {
            ranked.sort_unstable_by(|a, b| b.1.total.cmp(&a.1.total).then_with(|| a.0.cmp(b.0)));
            ranked.truncate(max_features);
        }
        ranked.sort_unstable_by(|a, b| a.0.cmp(b.0));

        let n = docs.len();
        let terms: Vec<String> = ranked.iter().map(|(t, _)| t.to_string()).collect();
        let document_frequency: Vec<usize> = ranked.iter().map(|(_, s)| s.df).collect();
        let idf = document_frequency
            .iter()
            .map(|&df| smoothed_idf(n, df))
            .collect();
        let term_to_index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Self {
            vocabulary: Vocabulary {
                terms,
                term_to_index,
                document_frequency,
                total_documents: n,
            },
            idf,
            max_features,
        })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn idf_of(&self, term: &str) -> Option<f64> {
        self.vocabulary.index_of(term).map(|i| self.idf[i])
    }

    pub fn dimension(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn max_features(&self) -> usize {
        self.max_features
    }

    /// Count × idf per in-vocabulary term, l2-normalized. Out-of-vocabulary
    /// tokens are ignored.
    pub fn transform(&self, tokens: &[String]) -> SparseVector {
        let mut counts: Vec<(usize, f64)> = Vec::with_capacity(tokens.len());
        for tok in tokens {
            if let Some(i) = self.vocabulary.index_of(tok) {
                counts.push((i, 1.0));
            }
        }
        counts.sort_unstable_by_key(|&(i, _)| i);
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(counts.len());
        for (i, c) in counts {
            match entries.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => entries.push((i, c)),
            }
        }
        for e in &mut entries {
            e.1 *= self.idf[e.0];
        }
        SparseVector {
            dimension: self.dimension(),
            entries,
        }
        .normalized()
    }

    pub fn transform_corpus(&self, docs: &[TokenizedComment]) -> FeatureMatrix {
        FeatureMatrix {
            dimension: self.dimension(),
            rows: docs.iter().map(|d| self.transform(&d.tokens)).collect(),
            labels: docs.iter().map(|d| d.label).collect(),
            row_ids: docs.iter().map(|d| d.row_id).collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let wire = TfIdfJson {
            terms: self.vocabulary.terms.clone(),
            df: self.vocabulary.document_frequency.clone(),
            idf: self.idf.clone(),
            total_documents: self.vocabulary.total_documents,
            max_features: self.max_features,
        };
        Ok(serde_json::to_string_pretty(&wire)?)
    }

    /// Parses and validates a serialized model.
    pub fn from_json(text: &str) -> Result<Self> {
        let wire: TfIdfJson = serde_json::from_str(text)?;
        let invalid = |m: String| Err(FeatureError::InvalidModel(m));
        let v = wire.terms.len();
        if v == 0 {
            return invalid("empty vocabulary".into());
        }
        if wire.df.len() != v || wire.idf.len() != v {
            return invalid(format!(
                "{} terms but {} df and {} idf values",
                v,
                wire.df.len(),
                wire.idf.len()
            ));
        }
        if v > wire.max_features {
            return invalid(format!(
                "{v} terms exceed max_features {}",
                wire.max_features
            ));
        }
        if let Some(df) = wire
            .df
            .iter()
            .find(|&&df| df == 0 || df > wire.total_documents)
        {
            return invalid(format!(
                "document frequency {df} outside 1..={}",
                wire.total_documents
            ));
        }
        if wire.idf.iter().any(|x| !x.is_finite() || *x <= 0.0) {
            return invalid("idf weights must be finite and positive".into());
        }
        let term_to_index: HashMap<String, usize> = wire
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        if term_to_index.len() != v {
            return invalid("duplicate terms".into());
        }
        Ok(Self {
            vocabulary: Vocabulary {
                terms: wire.terms,
                term_to_index,
                document_frequency: wire.df,
                total_documents: wire.total_documents,
            },
            idf: wire.idf,
            max_features: wire.max_features,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TfIdfJson {
    terms: Vec<String>,
    df: Vec<usize>,
    idf: Vec<f64>,
    #[serde(rename = "N")]
    total_documents: usize,
    max_features: usize,
}

/// Total occurrences of every token, most frequent first (ties ascending).
pub fn word_frequencies<D: AsRef<[String]>>(docs: &[D]) -> Vec<(String, usize)> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for d in docs {
        for t in d.as_ref() {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut out: Vec<(String, usize)> = counts
        .into_iter()
        .map(|(t, c)| (t.to_string(), c))
        .collect();
    out.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

pub fn write_word_frequency_csv<W: Write>(freqs: &[(String, usize)], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["term", "count"])?;
    for (t, c) in freqs {
        wtr.write_record([t.as_str(), &c.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}
