//! k-nearest neighbours under cosine distance.
//!
//! Neighbours are ranked by `(1 − cos(q, x), row_id)`, so equidistant rows
//! at the k-boundary are admitted lowest row id first. A zero vector has
//! cosine similarity 0 with everything. When several classes tie on votes
//! the class of the nearest neighbour among the tied classes wins.

use std::cmp::Ordering;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{ensure_non_empty, ModelError, Result, TrainingMeta};
use crate::corpus::Sentiment;
use crate::features::{FeatureMatrix, SparseVector};

const K: usize = Sentiment::COUNT;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 5 }
    }
}

impl KnnParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(ModelError::InvalidHyperparameter("k must be >= 1".into()));
        }
        Ok(())
    }
}

/// Term → (training row, weight) postings.
#[derive(Debug, Clone)]
struct InvertedIndex {
    postings: Vec<Vec<(u32, f64)>>,
    norms: Vec<f64>,
}

impl InvertedIndex {
    fn build(dimension: usize, rows: &[SparseVector]) -> Self {
        let mut postings = vec![Vec::new(); dimension];
        for (r, row) in rows.iter().enumerate() {
            for &(t, val) in row.entries() {
                postings[t].push((r as u32, val));
            }
        }
        Self {
            postings,
            norms: rows.iter().map(SparseVector::norm).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnnModel {
    pub hyperparams: KnnParams,
    pub dimension: usize,
    pub rows: Vec<SparseVector>,
    pub labels: Vec<Sentiment>,
    pub row_ids: Vec<usize>,
    pub training_meta: TrainingMeta,
    #[serde(skip)]
    index: OnceLock<InvertedIndex>,
}

impl PartialEq for KnnModel {
    fn eq(&self, other: &Self) -> bool {
        self.hyperparams == other.hyperparams
            && self.dimension == other.dimension
            && self.rows == other.rows
            && self.labels == other.labels
            && self.row_ids == other.row_ids
    }
}

/// A ranked neighbour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub position: usize,
    pub row_id: usize,
    pub distance: f64,
    pub label: Sentiment,
}

impl KnnModel {
    /// Stores the training rows verbatim.
    pub fn fit(x: &FeatureMatrix, params: &KnnParams) -> Result<Self> {
        params.validate()?;
        ensure_non_empty(x)?;
        if params.k > x.len() {
            return Err(ModelError::KOutOfRange {
                k: params.k,
                n: x.len(),
            });
        }
        Ok(Self {
            hyperparams: params.clone(),
            dimension: x.dimension,
            rows: x.rows.clone(),
            labels: x.labels.clone(),
            row_ids: x.row_ids.clone(),
            training_meta: TrainingMeta::default(),
            index: OnceLock::new(),
        })
    }

    fn index(&self) -> &InvertedIndex {
        self.index
            .get_or_init(|| InvertedIndex::build(self.dimension, &self.rows))
    }

    /// Cosine similarity between `q` and every training row.
    pub fn similarities(&self, q: &SparseVector) -> Vec<f64> {
        let index = self.index();
        let mut sims = vec![0.0; self.rows.len()];
        for &(t, qv) in q.entries() {
            for &(r, val) in &index.postings[t] {
                sims[r as usize] += qv * val;
            }
        }
        let qn = q.norm();
        for (s, &n) in sims.iter_mut().zip(&index.norms) {
            *s = if qn == 0.0 || n == 0.0 {
                0.0
            } else {
                *s / (qn * n)
            };
        }
        sims
    }

    /// The k nearest training rows, nearest first.
    pub fn neighbors(&self, q: &SparseVector) -> Vec<Neighbor> {
        let sims = self.similarities(q);
        let cmp = |a: &usize, b: &usize| -> Ordering {
            (1.0 - sims[*a])
                .total_cmp(&(1.0 - sims[*b]))
                .then_with(|| self.row_ids[*a].cmp(&self.row_ids[*b]))
        };
        let mut candidates: Vec<usize> = (0..self.rows.len()).collect();
        let k = self.hyperparams.k.min(candidates.len());
        if k < candidates.len() {
            candidates.select_nth_unstable_by(k - 1, cmp);
            candidates.truncate(k);
        }
        candidates.sort_unstable_by(cmp);
        candidates
            .into_iter()
            .map(|p| Neighbor {
                position: p,
                row_id: self.row_ids[p],
                distance: 1.0 - sims[p],
                label: self.labels[p],
            })
            .collect()
    }

    pub fn vote_fractions(&self, q: &SparseVector) -> [f64; K] {
        let neighbors = self.neighbors(q);
        let mut votes = [0.0; K];
        for n in &neighbors {
            votes[n.label.code()] += 1.0;
        }
        votes.map(|v| v / neighbors.len() as f64)
    }

    pub fn predict(&self, q: &SparseVector) -> Sentiment {
        vote(&self.neighbors(q))
    }

    pub(crate) fn validate(&self) -> Result<()> {
        self.hyperparams.validate()?;
        let n = self.rows.len();
        if n == 0 || self.labels.len() != n || self.row_ids.len() != n {
            return Err(ModelError::InvalidModel(
                "rows, labels and row_ids must align".into(),
            ));
        }
        if self.hyperparams.k > n {
            return Err(ModelError::KOutOfRange {
                k: self.hyperparams.k,
                n,
            });
        }
        if self.rows.iter().any(|r| r.dimension() != self.dimension) {
            return Err(ModelError::InvalidModel("row dimension mismatch".into()));
        }
        Ok(())
    }
}

/// Majority vote over neighbours sorted nearest first.
pub fn vote(neighbors: &[Neighbor]) -> Sentiment {
    let mut votes = [0usize; K];
    for n in neighbors {
        votes[n.label.code()] += 1;
    }
    let top = votes.iter().copied().max().unwrap_or(0);
    neighbors
        .iter()
        .map(|n| n.label)
        .find(|l| votes[l.code()] == top)
        .unwrap_or(Sentiment::Negative)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Sentiment::{Negative as Neg, Neutral as Neu, Positive as Pos};

    fn matrix(rows: &[[f64; 2]], labels: &[Sentiment]) -> FeatureMatrix {
        FeatureMatrix::new(
            2,
            rows.iter().map(|r| SparseVector::from_dense(r)).collect(),
            labels.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn identical_query_returns_its_label() {
        let x = matrix(&[[1.0, 0.0], [0.0, 1.0], [0.6, 0.8]], &[Pos, Neg, Neu]);
        let m = KnnModel::fit(&x, &KnnParams { k: 1 }).unwrap();
        for (row, label) in x.rows.iter().zip(&x.labels) {
            assert_eq!(m.predict(row), *label);
        }
    }

    #[test]
    fn majority_of_three() {
        // cos to query (1,0): 0.98, 0.8, 0.6, 0.0
        let x = matrix(
            &[
                [0.98, 0.198_997_487_421_324],
                [0.8, 0.6],
                [0.6, 0.8],
                [0.0, 1.0],
            ],
            &[Pos, Neg, Pos, Neg],
        );
        let m = KnnModel::fit(&x, &KnnParams { k: 3 }).unwrap();
        let q = SparseVector::from_dense(&[1.0, 0.0]);
        let ns = m.neighbors(&q);
        assert_eq!(
            ns.iter().map(|n| n.position).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
        assert!((ns[1].distance - 0.2).abs() < 1e-12);
        assert_eq!(m.predict(&q), Pos);
        let f = m.vote_fractions(&q);
        assert!(
            (f[0] - 1.0 / 3.0).abs() < 1e-15 && f[1] == 0.0 && (f[2] - 2.0 / 3.0).abs() < 1e-15
        );
    }

    #[test]
    fn all_neighbors_gives_global_majority() {
        let x = matrix(
            &[[1.0, 0.0], [0.0, 1.0], [0.6, 0.8], [0.8, 0.6], [0.0, 0.0]],
            &[Pos, Neu, Neu, Neg, Neu],
        );
        let m = KnnModel::fit(&x, &KnnParams { k: 5 }).unwrap();
        for q in [[1.0, 0.0], [0.0, 0.0], [0.3, 0.2]] {
            assert_eq!(m.predict(&SparseVector::from_dense(&q)), Neu);
        }
    }

    #[test]
    fn boundary_ties_prefer_lower_row_id() {
        // three rows at the same distance; k = 2 keeps the two lowest ids
        let x = FeatureMatrix::with_row_ids(
            2,
            vec![SparseVector::from_dense(&[0.0, 1.0]); 3],
            vec![Neg, Pos, Neu],
            vec![30, 10, 20],
        )
        .unwrap();
        let m = KnnModel::fit(&x, &KnnParams { k: 2 }).unwrap();
        let ns = m.neighbors(&SparseVector::from_dense(&[1.0, 0.0]));
        assert_eq!(
            ns.iter().map(|n| n.row_id).collect::<Vec<_>>(),
            vec![10, 20]
        );
        // 1 pos / 1 neu vote tie: nearest tied neighbour (row 10) wins
        assert_eq!(m.predict(&SparseVector::from_dense(&[1.0, 0.0])), Pos);
    }

    #[test]
    fn k_out_of_range() {
        let x = matrix(&[[1.0, 0.0]], &[Pos]);
        assert_eq!(
            KnnModel::fit(&x, &KnnParams { k: 2 }).unwrap_err(),
            ModelError::KOutOfRange { k: 2, n: 1 }
        );
        assert!(KnnModel::fit(&x, &KnnParams { k: 0 }).is_err());
    }
}
