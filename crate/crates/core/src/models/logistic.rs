//! Multinomial (softmax) logistic regression trained by full-batch gradient
//! descent on mean cross-entropy plus an L2 penalty on the weights.

use serde::{Deserialize, Serialize};

use super::{
    check_finite, check_non_negative, check_positive, check_shape, cross_entropy, ensure_non_empty,
    softmax, Result, TrainingMeta,
};
use crate::corpus::Sentiment;
use crate::features::{FeatureMatrix, SparseVector};

const K: usize = Sentiment::COUNT;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 300,
            l2: 1e-4,
        }
    }
}

impl LogisticParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("learning_rate", self.learning_rate)?;
        check_non_negative("l2", self.l2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub hyperparams: LogisticParams,
    pub dimension: usize,
    /// One row of length `dimension` per class.
    pub weights: Vec<Vec<f64>>,
    pub bias: [f64; K],
    pub training_meta: TrainingMeta,
}

/// Objective value and gradient at a parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub loss: f64,
    pub weights: Vec<Vec<f64>>,
    pub bias: [f64; K],
}

fn logits(weights: &[Vec<f64>], bias: &[f64; K], v: &SparseVector) -> [f64; K] {
    let mut z = *bias;
    for (c, zc) in z.iter_mut().enumerate() {
        *zc += v.dot_dense(&weights[c]);
    }
    z
}

/// `mean_i CE(softmax(W x_i + b), y_i) + (l2 / 2) ||W||²` and its gradient.
/// The bias is not penalized.
pub fn objective(x: &FeatureMatrix, l2: f64, weights: &[Vec<f64>], bias: &[f64; K]) -> Gradient {
    let n = x.len() as f64;
    let mut grad_w: Vec<Vec<f64>> = weights
        .iter()
        .map(|w| w.iter().map(|wt| l2 * wt).collect())
        .collect();
    let mut grad_b = [0.0; K];
    let mut loss = 0.0;
    for (v, &label) in x.rows.iter().zip(&x.labels) {
        let z = logits(weights, bias, v);
        loss += cross_entropy(&z, label);
        let p = softmax(&z);
        for c in 0..K {
            let delta = (p[c] - f64::from(u8::from(c == label.code()))) / n;
            grad_b[c] += delta;
            for &(t, val) in v.entries() {
                grad_w[c][t] += delta * val;
            }
        }
    }
    let penalty: f64 = weights.iter().flatten().map(|w| w * w).sum::<f64>() * l2 / 2.0;
    Gradient {
        loss: loss / n + penalty,
        weights: grad_w,
        bias: grad_b,
    }
}

impl LogisticModel {
    /// Gradient descent from zero weights. Full-batch training has no
    /// randomness, so `seed` is accepted for interface symmetry only.
    pub fn fit(x: &FeatureMatrix, params: &LogisticParams, _seed: u64) -> Result<Self> {
        params.validate()?;
        ensure_non_empty(x)?;
        let mut weights = vec![vec![0.0; x.dimension]; K];
        let mut bias = [0.0; K];
        let mut history = Vec::with_capacity(params.epochs + 1);
        let lr = params.learning_rate;
        for _ in 0..params.epochs {
            let g = objective(x, params.l2, &weights, &bias);
            history.push(g.loss);
            for (w, gw) in weights.iter_mut().zip(&g.weights) {
                for (wt, gt) in w.iter_mut().zip(gw) {
                    *wt -= lr * gt;
                }
            }
            for (b, gb) in bias.iter_mut().zip(g.bias) {
                *b -= lr * gb;
            }
        }
        let final_loss = objective(x, params.l2, &weights, &bias).loss;
        history.push(final_loss);
        Ok(Self {
            hyperparams: params.clone(),
            dimension: x.dimension,
            weights,
            bias,
            training_meta: TrainingMeta {
                epochs_run: params.epochs,
                final_loss: Some(final_loss),
                loss_history: history,
            },
        })
    }

    pub fn logits(&self, v: &SparseVector) -> [f64; K] {
        logits(&self.weights, &self.bias, v)
    }

    pub fn probabilities(&self, v: &SparseVector) -> [f64; K] {
        softmax(&self.logits(v))
    }

    pub(crate) fn validate(&self) -> Result<()> {
        self.hyperparams.validate()?;
        check_shape("weights", &self.weights, K, self.dimension)?;
        check_finite("bias", &self.bias)
    }
}
