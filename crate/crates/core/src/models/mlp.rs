//! One-hidden-layer perceptron: ReLU hidden units, softmax output, mean
//! cross-entropy, trained by seeded mini-batch SGD.
//!
//! Hidden weights are stored input-major (`hidden_weights[t * H + h]`) so a
//! sparse input only touches the rows of its nonzero terms. The JSON form
//! uses the conventional `H × V` layout.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    check_finite, check_positive, check_shape, cross_entropy, ensure_non_empty, ModelError, Result,
    TrainingMeta,
};
use crate::corpus::Sentiment;
use crate::features::{FeatureMatrix, SparseVector};
use crate::seed;

const K: usize = Sentiment::COUNT;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpParams {
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden_units: 100,
            learning_rate: 0.05,
            epochs: 50,
            batch_size: 32,
        }
    }
}

impl MlpParams {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_units == 0 {
            return Err(ModelError::InvalidHyperparameter(
                "hidden_units must be >= 1".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(ModelError::InvalidHyperparameter(
                "batch_size must be >= 1".into(),
            ));
        }
        check_positive("learning_rate", self.learning_rate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "MlpJson", try_from = "MlpJson")]
pub struct MlpModel {
    pub hyperparams: MlpParams,
    pub dimension: usize,
    /// Input-major: weight from input `t` to hidden unit `h` is at `t * H + h`.
    pub hidden_weights: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    /// One row of length `H` per class.
    pub output_weights: Vec<Vec<f64>>,
    pub output_bias: [f64; K],
    pub training_meta: TrainingMeta,
}

/// Gradient blocks, laid out like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub loss: f64,
    pub hidden_weights: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    pub output_weights: Vec<Vec<f64>>,
    pub output_bias: [f64; K],
}

struct Forward {
    pre: Vec<f64>,
    act: Vec<f64>,
    logits: [f64; K],
}

/// Uniform in `[-r, r]` with `r = sqrt(6 / (fan_in + fan_out))`.
fn glorot(rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> f64 {
    let r = (6.0 / (fan_in + fan_out) as f64).sqrt();
    rng.random_range(-r..=r)
}

impl MlpModel {
    /// Random initial parameters; biases start at zero.
    pub fn init(dimension: usize, params: &MlpParams, seed: u64) -> Self {
        let h = params.hidden_units;
        let mut rng = seed::rng(seed);
        // drawn in H × V order, stored input-major
        let mut hidden_weights = vec![0.0; dimension * h];
        for unit in 0..h {
            for t in 0..dimension {
                hidden_weights[t * h + unit] = glorot(&mut rng, dimension, h);
            }
        }
        let output_weights = (0..K)
            .map(|_| (0..h).map(|_| glorot(&mut rng, h, K)).collect())
            .collect();
        Self {
            hyperparams: params.clone(),
            dimension,
            hidden_weights,
            hidden_bias: vec![0.0; h],
            output_weights,
            output_bias: [0.0; K],
            training_meta: TrainingMeta::default(),
        }
    }

    pub fn hidden_units(&self) -> usize {
        self.hidden_bias.len()
    }

    pub fn fit(x: &FeatureMatrix, params: &MlpParams, seed: u64) -> Result<Self> {
        params.validate()?;
        ensure_non_empty(x)?;
        let mut model = Self::init(x.dimension, params, seed);
        let mut rng = seed::rng(seed::derive_seed(seed, "mlp-shuffle"));
        let mut scratch = Scratch::new(x.dimension, params.hidden_units);
        let mut order: Vec<usize> = (0..x.len()).collect();
        let mut history = Vec::with_capacity(params.epochs + 1);
        history.push(model.mean_loss(x));
        for _ in 0..params.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(params.batch_size) {
                model.accumulate(x, batch, &mut scratch);
                model.apply(&mut scratch, params.learning_rate / batch.len() as f64);
            }
            history.push(model.mean_loss(x));
        }
        model.training_meta = TrainingMeta {
            epochs_run: params.epochs,
            final_loss: history.last().copied(),
            loss_history: history,
        };
        Ok(model)
    }

    fn forward(&self, v: &SparseVector) -> Forward {
        let h = self.hidden_units();
        let mut pre = self.hidden_bias.clone();
        for &(t, val) in v.entries() {
            let row = &self.hidden_weights[t * h..(t + 1) * h];
            for (p, w) in pre.iter_mut().zip(row) {
                *p += val * w;
            }
        }
        let act: Vec<f64> = pre.iter().map(|z| z.max(0.0)).collect();
        let mut logits = self.output_bias;
        for (c, z) in logits.iter_mut().enumerate() {
            *z += self.output_weights[c]
                .iter()
                .zip(&act)
                .map(|(w, a)| w * a)
                .sum::<f64>();
        }
        Forward { pre, act, logits }
    }

    pub fn logits(&self, v: &SparseVector) -> [f64; K] {
        self.forward(v).logits
    }

    pub fn probabilities(&self, v: &SparseVector) -> [f64; K] {
        super::softmax(&self.logits(v))
    }

    /// Hidden pre-activations, exposed for gradient checks near the ReLU kink.
    pub fn hidden_preactivations(&self, v: &SparseVector) -> Vec<f64> {
        self.forward(v).pre
    }

    pub fn mean_loss(&self, x: &FeatureMatrix) -> f64 {
        let total: f64 = x
            .rows
            .iter()
            .zip(&x.labels)
            .map(|(v, &l)| cross_entropy(&self.logits(v), l))
            .sum();
        total / x.len() as f64
    }

    /// Adds the summed (not averaged) gradient of the given rows to `s`.
    fn accumulate(&self, x: &FeatureMatrix, positions: &[usize], s: &mut Scratch) {
        let h = self.hidden_units();
        for &i in positions {
            let v = &x.rows[i];
            let f = self.forward(v);
            s.loss += cross_entropy(&f.logits, x.labels[i]);
            let mut delta_out = super::softmax(&f.logits);
            delta_out[x.labels[i].code()] -= 1.0;

            let mut delta_hidden = vec![0.0; h];
            for (c, &dc) in delta_out.iter().enumerate() {
                s.output_bias[c] += dc;
                let rows = s.output_weights[c].iter_mut().zip(&self.output_weights[c]);
                for (((gw, w), a), dh) in rows.zip(&f.act).zip(delta_hidden.iter_mut()) {
                    *gw += dc * a;
                    *dh += dc * w;
                }
            }
            for (d, z) in delta_hidden.iter_mut().zip(&f.pre) {
                if *z <= 0.0 {
                    *d = 0.0;
                }
            }
            for (b, d) in s.hidden_bias.iter_mut().zip(&delta_hidden) {
                *b += d;
            }
            for &(t, val) in v.entries() {
                if !s.touched[t] {
                    s.touched[t] = true;
                    s.touched_terms.push(t);
                }
                let row = &mut s.hidden_weights[t * h..(t + 1) * h];
                for (g, d) in row.iter_mut().zip(&delta_hidden) {
                    *g += val * d;
                }
            }
        }
    }

    /// Takes a step of `-step * gradient` and clears the scratch buffers.
    fn apply(&mut self, s: &mut Scratch, step: f64) {
        let h = self.hidden_units();
        for &t in &s.touched_terms {
            let grad = &mut s.hidden_weights[t * h..(t + 1) * h];
            let row = &mut self.hidden_weights[t * h..(t + 1) * h];
            for (w, g) in row.iter_mut().zip(grad.iter_mut()) {
                *w -= step * *g;
                *g = 0.0;
            }
            s.touched[t] = false;
        }
        s.touched_terms.clear();
        for (b, g) in self.hidden_bias.iter_mut().zip(s.hidden_bias.iter_mut()) {
            *b -= step * *g;
            *g = 0.0;
        }
        for c in 0..K {
            for (w, g) in self.output_weights[c]
                .iter_mut()
                .zip(s.output_weights[c].iter_mut())
            {
                *w -= step * *g;
                *g = 0.0;
            }
            self.output_bias[c] -= step * s.output_bias[c];
            s.output_bias[c] = 0.0;
        }
        s.loss = 0.0;
    }

    /// Mean cross-entropy over all rows of `x` and its full gradient.
    pub fn loss_and_gradient(&self, x: &FeatureMatrix) -> Gradient {
        let mut s = Scratch::new(self.dimension, self.hidden_units());
        let all: Vec<usize> = (0..x.len()).collect();
        self.accumulate(x, &all, &mut s);
        let n = x.len() as f64;
        let scale = |v: &mut Vec<f64>| v.iter_mut().for_each(|g| *g /= n);
        scale(&mut s.hidden_weights);
        scale(&mut s.hidden_bias);
        s.output_weights.iter_mut().for_each(scale);
        Gradient {
            loss: s.loss / n,
            hidden_weights: s.hidden_weights,
            hidden_bias: s.hidden_bias,
            output_weights: s.output_weights,
            output_bias: s.output_bias.map(|g| g / n),
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        self.hyperparams.validate()?;
        let h = self.hidden_units();
        if h != self.hyperparams.hidden_units || self.hidden_weights.len() != h * self.dimension {
            return Err(ModelError::InvalidModel(
                "hidden layer shape mismatch".into(),
            ));
        }
        check_finite("hidden_weights", &self.hidden_weights)?;
        check_finite("hidden_bias", &self.hidden_bias)?;
        check_shape("output_weights", &self.output_weights, K, h)?;
        check_finite("output_bias", &self.output_bias)
    }
}

struct Scratch {
    loss: f64,
    hidden_weights: Vec<f64>,
    touched: Vec<bool>,
    touched_terms: Vec<usize>,
    hidden_bias: Vec<f64>,
    output_weights: Vec<Vec<f64>>,
    output_bias: [f64; K],
}

impl Scratch {
    fn new(dimension: usize, h: usize) -> Self {
        Self {
            loss: 0.0,
            hidden_weights: vec![0.0; dimension * h],
            touched: vec![false; dimension],
            touched_terms: Vec::new(),
            hidden_bias: vec![0.0; h],
            output_weights: vec![vec![0.0; h]; K],
            output_bias: [0.0; K],
        }
    }
}

#[derive(Serialize, Deserialize)]
struct MlpJson {
    hyperparams: MlpParams,
    dimension: usize,
    /// `H × V`
    hidden_weights: Vec<Vec<f64>>,
    hidden_bias: Vec<f64>,
    output_weights: Vec<Vec<f64>>,
    output_bias: [f64; K],
    training_meta: TrainingMeta,
}

impl From<MlpModel> for MlpJson {
    fn from(m: MlpModel) -> Self {
        let h = m.hidden_units();
        let hidden_weights = (0..h)
            .map(|u| {
                (0..m.dimension)
                    .map(|t| m.hidden_weights[t * h + u])
                    .collect()
            })
            .collect();
        Self {
            hyperparams: m.hyperparams,
            dimension: m.dimension,
            hidden_weights,
            hidden_bias: m.hidden_bias,
            output_weights: m.output_weights,
            output_bias: m.output_bias,
            training_meta: m.training_meta,
        }
    }
}

impl TryFrom<MlpJson> for MlpModel {
    type Error = ModelError;

    fn try_from(j: MlpJson) -> Result<Self> {
        let h = j.hidden_bias.len();
        check_shape("hidden_weights", &j.hidden_weights, h, j.dimension)?;
        let mut hidden_weights = vec![0.0; h * j.dimension];
        for (u, row) in j.hidden_weights.iter().enumerate() {
            for (t, w) in row.iter().enumerate() {
                hidden_weights[t * h + u] = *w;
            }
        }
        Ok(Self {
            hyperparams: j.hyperparams,
            dimension: j.dimension,
            hidden_weights,
            hidden_bias: j.hidden_bias,
            output_weights: j.output_weights,
            output_bias: j.output_bias,
            training_meta: j.training_meta,
        })
    }
}
