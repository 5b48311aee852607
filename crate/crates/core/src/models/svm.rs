//! One-vs-rest linear SVM.
//!
//! Each class gets a binary classifier minimizing
//! `(1/2)||w||² + C · mean_i max(0, 1 − y_i (w·x_i + b))`
//! by stochastic subgradient descent over a seeded shuffle of the training
//! rows. The step size decays as `lr / (1 + lr · t)` with `t` the number of
//! updates so far, the usual schedule for a 1-strongly-convex objective.
//! The bias is not regularized.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{
    check_finite, check_non_negative, check_positive, check_shape, ensure_non_empty, Result,
    TrainingMeta,
};
use crate::corpus::Sentiment;
use crate::features::{FeatureMatrix, SparseVector};
use crate::seed;

const K: usize = Sentiment::COUNT;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSvmParams {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Hinge-loss weight.
    pub c: f64,
}

impl Default for LinearSvmParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 300,
            c: 10.0,
        }
    }
}

impl LinearSvmParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("learning_rate", self.learning_rate)?;
        check_non_negative("c", self.c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmModel {
    pub hyperparams: LinearSvmParams,
    pub dimension: usize,
    /// One weight vector per class, class-code order.
    pub weights: Vec<Vec<f64>>,
    pub bias: [f64; K],
    pub training_meta: TrainingMeta,
}

/// Binary objective value and a subgradient for the `class`-vs-rest problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Subgradient {
    pub value: f64,
    pub weights: Vec<f64>,
    pub bias: f64,
}

fn target(label: Sentiment, class: Sentiment) -> f64 {
    if label == class {
        1.0
    } else {
        -1.0
    }
}

/// The one-vs-rest objective for `class` at `(w, b)`. Points sitting exactly
/// on the hinge contribute zero to the subgradient.
pub fn objective(x: &FeatureMatrix, class: Sentiment, c: f64, w: &[f64], b: f64) -> Subgradient {
    let n = x.len() as f64;
    let mut grad_w = w.to_vec();
    let mut grad_b = 0.0;
    let mut hinge = 0.0;
    for (v, &label) in x.rows.iter().zip(&x.labels) {
        let y = target(label, class);
        let margin = y * (v.dot_dense(w) + b);
        if margin < 1.0 {
            hinge += 1.0 - margin;
            for &(t, val) in v.entries() {
                grad_w[t] -= c * y * val / n;
            }
            grad_b -= c * y / n;
        }
    }
    Subgradient {
        value: 0.5 * w.iter().map(|x| x * x).sum::<f64>() + c * hinge / n,
        weights: grad_w,
        bias: grad_b,
    }
}

/// `w = scale · v`, so the per-step shrink is O(1) instead of O(V).
struct ScaledWeights {
    scale: f64,
    v: Vec<f64>,
}

impl ScaledWeights {
    fn new(dimension: usize) -> Self {
        Self {
            scale: 1.0,
            v: vec![0.0; dimension],
        }
    }

    fn dot(&self, x: &SparseVector) -> f64 {
        self.scale * x.dot_dense(&self.v)
    }

    fn shrink(&mut self, factor: f64) {
        self.scale *= factor;
        if self.scale == 0.0 {
            self.v.iter_mut().for_each(|x| *x = 0.0);
            self.scale = 1.0;
        } else if self.scale.abs() < 1e-9 {
            self.fold();
        }
    }

    fn add(&mut self, coeff: f64, x: &SparseVector) {
        let c = coeff / self.scale;
        for &(t, val) in x.entries() {
            self.v[t] += c * val;
        }
    }

    fn fold(&mut self) {
        let s = self.scale;
        self.v.iter_mut().for_each(|x| *x *= s);
        self.scale = 1.0;
    }

    fn into_dense(mut self) -> Vec<f64> {
        self.fold();
        self.v
    }
}

impl LinearSvmModel {
    pub fn fit(x: &FeatureMatrix, params: &LinearSvmParams, seed: u64) -> Result<Self> {
        params.validate()?;
        ensure_non_empty(x)?;
        let mut rng = seed::rng(seed);
        let mut ws: Vec<ScaledWeights> = (0..K).map(|_| ScaledWeights::new(x.dimension)).collect();
        let mut bias = [0.0; K];
        let mut order: Vec<usize> = (0..x.len()).collect();
        let (lr, c) = (params.learning_rate, params.c);
        let mut step = 0u64;
        let mut history = Vec::with_capacity(params.epochs + 1);
        history.push(K as f64 * c);

        for _ in 0..params.epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                let v = &x.rows[i];
                let eta = lr / (1.0 + lr * step as f64);
                for class in Sentiment::ALL {
                    let k = class.code();
                    let y = target(x.labels[i], class);
                    let margin = y * (ws[k].dot(v) + bias[k]);
                    ws[k].shrink(1.0 - eta);
                    if margin < 1.0 {
                        ws[k].add(eta * c * y, v);
                        bias[k] += eta * c * y;
                    }
                }
                step += 1;
            }
            history.push(total_objective(x, c, &ws, &bias));
        }

        let weights: Vec<Vec<f64>> = ws.into_iter().map(ScaledWeights::into_dense).collect();
        let final_loss = Sentiment::ALL
            .into_iter()
            .map(|s| objective(x, s, c, &weights[s.code()], bias[s.code()]).value)
            .sum();
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

    /// Raw decision value `w_c · x + b_c` for each class.
    pub fn decision_values(&self, v: &SparseVector) -> [f64; K] {
        let mut out = self.bias;
        for (c, o) in out.iter_mut().enumerate() {
            *o += v.dot_dense(&self.weights[c]);
        }
        out
    }

    pub(crate) fn validate(&self) -> Result<()> {
        self.hyperparams.validate()?;
        check_shape("weights", &self.weights, K, self.dimension)?;
        check_finite("bias", &self.bias)
    }
}

fn total_objective(x: &FeatureMatrix, c: f64, ws: &[ScaledWeights], bias: &[f64; K]) -> f64 {
    let n = x.len() as f64;
    let mut value = 0.0;
    for (k, w) in ws.iter().enumerate() {
        let class = Sentiment::ALL[k];
        let sq: f64 = w.v.iter().map(|t| t * t).sum::<f64>() * w.scale * w.scale;
        let hinge: f64 = x
            .rows
            .iter()
            .zip(&x.labels)
            .map(|(v, &l)| (1.0 - target(l, class) * (w.dot(v) + bias[k])).max(0.0))
            .sum();
        value += 0.5 * sq + c * hinge / n;
    }
    value
}
