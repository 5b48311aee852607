//! Multinomial Naive Bayes over real-valued (TF-IDF) term weights.

use serde::{Deserialize, Serialize};

use super::{
    check_finite, check_positive, check_shape, ensure_non_empty, ModelError, Result, TrainingMeta,
};
use crate::corpus::Sentiment;
use crate::features::{FeatureMatrix, SparseVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NaiveBayesParams {
    /// Additive smoothing.
    pub alpha: f64,
    /// Train even when a class has no examples; that class then never wins.
    #[serde(default)]
    pub allow_missing_class: bool,
}

impl Default for NaiveBayesParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            allow_missing_class: false,
        }
    }
}

impl NaiveBayesParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("alpha", self.alpha)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    pub hyperparams: NaiveBayesParams,
    pub dimension: usize,
    /// `ln(count_c / n)`; `None` for classes absent from training.
    pub log_priors: [Option<f64>; Sentiment::COUNT],
    /// `ln((weight_ct + alpha) / (weight_c + alpha * V))`, one row per class.
    pub log_likelihoods: Vec<Vec<f64>>,
    pub training_meta: TrainingMeta,
}

impl NaiveBayesModel {
    pub fn fit(x: &FeatureMatrix, params: &NaiveBayesParams) -> Result<Self> {
        params.validate()?;
        ensure_non_empty(x)?;
        let counts = x.class_counts();
        let missing: Vec<Sentiment> = Sentiment::ALL
            .into_iter()
            .filter(|s| counts[s.code()] == 0)
            .collect();
        if !missing.is_empty() && !params.allow_missing_class {
            return Err(ModelError::MissingClass(missing));
        }

        let v = x.dimension;
        let mut weight = vec![vec![0.0; v]; Sentiment::COUNT];
        for (row, label) in x.rows.iter().zip(&x.labels) {
            let w = &mut weight[label.code()];
            for &(t, val) in row.entries() {
                w[t] += val;
            }
        }

        let n = x.len() as f64;
        let log_priors = counts.map(|c| (c > 0).then(|| (c as f64 / n).ln()));
        let alpha = params.alpha;
        let log_likelihoods = weight
            .into_iter()
            .map(|w| {
                let denom = (w.iter().sum::<f64>() + alpha * v as f64).ln();
                w.into_iter().map(|wt| (wt + alpha).ln() - denom).collect()
            })
            .collect();

        Ok(Self {
            hyperparams: params.clone(),
            dimension: v,
            log_priors,
            log_likelihoods,
            training_meta: TrainingMeta::default(),
        })
    }

    /// Unnormalized log joint per class; `None` for absent classes.
    pub fn log_joint(&self, v: &SparseVector) -> [Option<f64>; Sentiment::COUNT] {
        let mut out = [None; Sentiment::COUNT];
        for (c, slot) in out.iter_mut().enumerate() {
            *slot = self.log_priors[c].map(|lp| lp + v.dot_dense(&self.log_likelihoods[c]));
        }
        out
    }

    pub fn posterior(&self, v: &SparseVector) -> [f64; Sentiment::COUNT] {
        let joint = self.log_joint(v);
        let max = joint
            .iter()
            .flatten()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut out = joint.map(|j| j.map_or(0.0, |j| (j - max).exp()));
        let sum: f64 = out.iter().sum();
        for p in &mut out {
            *p /= sum;
        }
        out
    }

    pub(crate) fn validate(&self) -> Result<()> {
        self.hyperparams.validate()?;
        check_shape(
            "log_likelihoods",
            &self.log_likelihoods,
            Sentiment::COUNT,
            self.dimension,
        )?;
        check_finite("log_priors", self.log_priors.iter().flatten())?;
        if self.log_priors.iter().all(Option::is_none) {
            return Err(ModelError::InvalidModel("no class has a prior".into()));
        }
        Ok(())
    }
}
