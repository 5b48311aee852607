//! Independent oracles and generators shared by the integration suites.
//!
//! Nothing here calls into the code paths it is used to check: posteriors
//! are products of probabilities rather than sums of logs, neighbours come
//! from a dense full sort, gradients from central differences.

#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roman_sentiment::corpus::{self, Corpus, Sentiment};
use roman_sentiment::eval;
use roman_sentiment::features::{FeatureMatrix, SparseVector, TfIdfModel};
use roman_sentiment::models::mlp::MlpModel;
use roman_sentiment::models::{self, logistic, svm, ClassifierSpec, MlpParams};
use roman_sentiment::preprocess::{preprocess_corpus, StopWordList, TokenizeOptions};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Reference confusion matrices for the five benchmark classifiers, rows =
/// truth (negative, neutral, positive), columns = prediction.
pub const REFERENCE_NB: [[u64; 3]; 3] = [[127, 141, 53], [33, 594, 72], [29, 187, 229]];
pub const REFERENCE_LR: [[u64; 3]; 3] = [[140, 134, 47], [44, 582, 73], [34, 185, 226]];
pub const REFERENCE_SVM: [[u64; 3]; 3] = [[165, 111, 45], [55, 560, 84], [51, 161, 233]];
/// Cell-for-cell identical to the SVM matrix.
pub const REFERENCE_KNN: [[u64; 3]; 3] = [[165, 111, 45], [55, 560, 84], [51, 161, 233]];
pub const REFERENCE_MLP: [[u64; 3]; 3] = [[156, 98, 67], [129, 433, 137], [75, 126, 244]];

/// Exact rational `num / den` pairs hand-derived from the reference
/// matrices: (accuracy, per-class precision, per-class recall).
pub struct ExactMetrics {
    pub accuracy: (u64, u64),
    pub precision: [(u64, u64); 3],
    pub recall: [(u64, u64); 3],
}

pub fn exact_metrics(cells: &[[u64; 3]; 3]) -> ExactMetrics {
    let total: u64 = cells.iter().flatten().sum();
    let trace = cells[0][0] + cells[1][1] + cells[2][2];
    let col = |j: usize| cells[0][j] + cells[1][j] + cells[2][j];
    let row = |i: usize| cells[i][0] + cells[i][1] + cells[i][2];
    ExactMetrics {
        accuracy: (trace, total),
        precision: std::array::from_fn(|c| (cells[c][c], col(c))),
        recall: std::array::from_fn(|c| (cells[c][c], row(c))),
    }
}

pub fn ratio((n, d): (u64, u64)) -> f64 {
    n as f64 / d as f64
}

/// `2pr / (p + r)` written over a common denominator:
/// `2 tp / (row + col)`.
pub fn exact_f1(cells: &[[u64; 3]; 3], c: usize) -> (u64, u64) {
    let col: u64 = (0..3).map(|i| cells[i][c]).sum();
    let row: u64 = cells[c].iter().sum();
    (2 * cells[c][c], row + col)
}

/// Random sparse matrix with labels drawn uniformly from the three classes.
pub fn random_matrix(rng: &mut impl Rng, docs: usize, terms: usize, density: f64) -> FeatureMatrix {
    let rows = (0..docs)
        .map(|_| {
            let dense: Vec<f64> = (0..terms)
                .map(|_| {
                    if rng.random_bool(density) {
                        rng.random_range(0.05..1.0)
                    } else {
                        0.0
                    }
                })
                .collect();
            SparseVector::from_dense(&dense).normalized()
        })
        .collect();
    let labels = (0..docs)
        .map(|_| Sentiment::ALL[rng.random_range(0..3)])
        .collect();
    FeatureMatrix::new(terms, rows, labels).unwrap()
}

/// Exhaustive multinomial Bayes: prior × Π θ^x, normalized over classes.
/// Absent classes get prior 0.
pub fn nb_posterior_brute_force(x: &FeatureMatrix, alpha: f64, query: &[f64]) -> [f64; 3] {
    let v = x.dimension;
    let n = x.len() as f64;
    let mut joint = [0.0; 3];
    for class in Sentiment::ALL {
        let members: Vec<Vec<f64>> = x
            .rows
            .iter()
            .zip(&x.labels)
            .filter(|(_, l)| **l == class)
            .map(|(r, _)| r.to_dense())
            .collect();
        let prior = members.len() as f64 / n;
        let mut per_term = vec![0.0; v];
        for m in &members {
            for t in 0..v {
                per_term[t] += m[t];
            }
        }
        let total: f64 = per_term.iter().sum();
        let mut p = prior;
        for t in 0..v {
            let theta = (per_term[t] + alpha) / (total + alpha * v as f64);
            p *= theta.powf(query[t]);
        }
        joint[class.code()] = p;
    }
    let z: f64 = joint.iter().sum();
    joint.map(|j| j / z)
}

fn dense_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Full sort by (cosine distance, row id), then majority vote; vote ties go
/// to the tied class whose member ranks nearest.
pub fn knn_brute_force(x: &FeatureMatrix, k: usize, query: &[f64]) -> Sentiment {
    let mut ranked: Vec<(f64, usize, Sentiment)> = x
        .rows
        .iter()
        .zip(&x.labels)
        .zip(&x.row_ids)
        .map(|((r, l), id)| (1.0 - dense_cosine(&r.to_dense(), query), *id, *l))
        .collect();
    ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let top = &ranked[..k];
    let mut votes = [0; 3];
    for (_, _, l) in top {
        votes[l.code()] += 1;
    }
    let best = *votes.iter().max().unwrap();
    top.iter()
        .find(|(_, _, l)| votes[l.code()] == best)
        .unwrap()
        .2
}

pub const FD_STEP: f64 = 1e-5;

/// Central difference of `f` with respect to `params[i]`.
pub fn central_difference(params: &mut [f64], i: usize, f: &mut impl FnMut(&[f64]) -> f64) -> f64 {
    let orig = params[i];
    params[i] = orig + FD_STEP;
    let up = f(params);
    params[i] = orig - FD_STEP;
    let down = f(params);
    params[i] = orig;
    (up - down) / (2.0 * FD_STEP)
}

/// `|a − n| / max(|a|, |n|, 1e-6)`; the floor keeps round-off on
/// vanishing components from reading as a large relative error.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Two-class corpus whose classes use disjoint vocabularies.
pub fn separable_corpus(docs: usize, seed: u64) -> Corpus {
    let mut rng = rng(seed);
    let pos: Vec<String> = (0..20).map(|i| format!("khush{i}")).collect();
    let neg: Vec<String> = (0..20).map(|i| format!("naraz{i}")).collect();
    let pairs = (0..docs).map(|i| {
        let (vocab, label) = if i % 2 == 0 {
            (&pos, Sentiment::Positive)
        } else {
            (&neg, Sentiment::Negative)
        };
        let len = rng.random_range(3..=8);
        let words: Vec<&str> = (0..len)
            .map(|_| vocab.choose(&mut rng).unwrap().as_str())
            .collect();
        (words.join(" "), label)
    });
    Corpus::from_pairs(pairs, "separable")
}

/// Three-class corpus with overlapping, class-skewed vocabularies.
pub fn noisy_corpus(docs: usize, seed: u64) -> Corpus {
    let mut rng = rng(seed);
    let shared: Vec<String> = [
        "drama", "show", "episode", "actor", "hai", "ye", "bohat", "kahani",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let class_words = [
        ["bakwas", "bura", "ghatiya", "bekar", "faltu"],
        ["theek", "normal", "dekha", "kal", "waqt"],
        ["acha", "zabardast", "kamal", "pyara", "behtareen"],
    ];
    let pairs = (0..docs).map(|_| {
        let label = Sentiment::ALL[rng.random_range(0..3)];
        let len = rng.random_range(2..=9);
        let words: Vec<String> = (0..len)
            .map(|_| {
                if rng.random_bool(0.45) {
                    class_words[label.code()]
                        .choose(&mut rng)
                        .unwrap()
                        .to_string()
                } else if rng.random_bool(0.15) {
                    class_words[rng.random_range(0..3)]
                        .choose(&mut rng)
                        .unwrap()
                        .to_string()
                } else {
                    shared.choose(&mut rng).unwrap().clone()
                }
            })
            .collect();
        (words.join(" "), label)
    });
    Corpus::from_pairs(pairs, "noisy")
}

/// Largest relative error between the analytic logistic-regression gradient
/// and central differences, at a random parameter point.
pub fn lr_gradient_error(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let docs = rng.random_range(2..=12);
    let terms = rng.random_range(1..=7);
    let x = random_matrix(&mut rng, docs, terms, 0.6);
    let l2 = rng.random_range(0.0..0.5);
    let weights: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..terms).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let bias: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
    let analytic = logistic::objective(&x, l2, &weights, &bias);
    let flat: Vec<f64> = analytic
        .weights
        .iter()
        .flatten()
        .copied()
        .chain(analytic.bias)
        .collect();

    // parameters flattened as [W row-major, b]
    let mut params: Vec<f64> = weights.iter().flatten().copied().chain(bias).collect();
    let mut loss = |p: &[f64]| {
        let w: Vec<Vec<f64>> = p[..3 * terms].chunks(terms).map(<[f64]>::to_vec).collect();
        let b = [p[3 * terms], p[3 * terms + 1], p[3 * terms + 2]];
        logistic::objective(&x, l2, &w, &b).loss
    };
    (0..params.len())
        .map(|i| relative_error(flat[i], central_difference(&mut params, i, &mut loss)))
        .fold(0.0, f64::max)
}

/// As [`lr_gradient_error`] for one one-vs-rest SVM objective. `None` when
/// some training margin lies within 1e-3 of the hinge, where the objective
/// is not differentiable.
pub fn svm_gradient_error(seed: u64) -> Option<f64> {
    let mut rng = rng(seed);
    let docs = rng.random_range(2..=12);
    let terms = rng.random_range(1..=7);
    let x = random_matrix(&mut rng, docs, terms, 0.6);
    let class = Sentiment::ALL[rng.random_range(0..3)];
    let c = rng.random_range(0.0..5.0);
    let w: Vec<f64> = (0..terms).map(|_| rng.random_range(-2.0..2.0)).collect();
    let b = rng.random_range(-1.0..1.0);
    let near_hinge = x.rows.iter().zip(&x.labels).any(|(v, &l)| {
        let y = if l == class { 1.0 } else { -1.0 };
        (y * (v.dot_dense(&w) + b) - 1.0).abs() < 1e-3
    });
    if near_hinge {
        return None;
    }
    let analytic = svm::objective(&x, class, c, &w, b);
    let flat: Vec<f64> = analytic
        .weights
        .iter()
        .copied()
        .chain([analytic.bias])
        .collect();
    let mut params: Vec<f64> = w.iter().copied().chain([b]).collect();
    let mut value = |p: &[f64]| svm::objective(&x, class, c, &p[..terms], p[terms]).value;
    Some(
        (0..params.len())
            .map(|i| relative_error(flat[i], central_difference(&mut params, i, &mut value)))
            .fold(0.0, f64::max),
    )
}

fn mlp_flatten(m: &MlpModel) -> Vec<f64> {
    let mut p = m.hidden_weights.clone();
    p.extend(&m.hidden_bias);
    p.extend(m.output_weights.iter().flatten());
    p.extend(m.output_bias);
    p
}

fn mlp_assign(m: &mut MlpModel, p: &[f64]) {
    let hw = m.hidden_weights.len();
    let h = m.hidden_bias.len();
    m.hidden_weights.copy_from_slice(&p[..hw]);
    m.hidden_bias.copy_from_slice(&p[hw..hw + h]);
    for c in 0..3 {
        let start = hw + h + c * h;
        m.output_weights[c].copy_from_slice(&p[start..start + h]);
    }
    let ob = hw + h + 3 * h;
    m.output_bias = [p[ob], p[ob + 1], p[ob + 2]];
}

/// As [`lr_gradient_error`] for the MLP's backpropagated gradient. `None`
/// when a hidden pre-activation lies within 1e-3 of the ReLU kink.
pub fn mlp_gradient_error(seed: u64) -> Option<f64> {
    let mut rng = rng(seed);
    let docs = rng.random_range(2..=8);
    let terms = rng.random_range(1..=5);
    let x = random_matrix(&mut rng, docs, terms, 0.7);
    let params = MlpParams {
        hidden_units: rng.random_range(1..=6),
        ..MlpParams::default()
    };
    let mut model = MlpModel::init(terms, &params, seed);
    // non-zero biases so their gradients are exercised
    for b in model.hidden_bias.iter_mut() {
        *b = rng.random_range(-0.5..0.5);
    }
    for b in model.output_bias.iter_mut() {
        *b = rng.random_range(-0.5..0.5);
    }
    let near_kink = x.rows.iter().any(|v| {
        model
            .hidden_preactivations(v)
            .iter()
            .any(|a| a.abs() < 1e-3)
    });
    if near_kink {
        return None;
    }
    let g = model.loss_and_gradient(&x);
    assert!((g.loss - model.mean_loss(&x)).abs() < 1e-12);
    let mut flat = g.hidden_weights.clone();
    flat.extend(&g.hidden_bias);
    flat.extend(g.output_weights.iter().flatten());
    flat.extend(g.output_bias);

    let mut p = mlp_flatten(&model);
    let mut probe = model.clone();
    let mut loss = |q: &[f64]| {
        mlp_assign(&mut probe, q);
        probe.mean_loss(&x)
    };
    Some(
        (0..p.len())
            .map(|i| relative_error(flat[i], central_difference(&mut p, i, &mut loss)))
            .fold(0.0, f64::max),
    )
}

/// Collects `count` gradient errors from successive seeds starting at
/// `first_seed`, skipping instances the check declines.
pub fn gradient_errors(
    first_seed: u64,
    count: usize,
    check: impl Fn(u64) -> Option<f64>,
) -> Vec<f64> {
    (first_seed..).filter_map(check).take(count).collect()
}

/// Train and held-out accuracy of `spec` on a seeded 80/20 split of a
/// separable corpus, with TF-IDF fit on the training side only.
pub fn separability_run(spec: &ClassifierSpec, docs: usize, seed: u64) -> (f64, f64) {
    let c = separable_corpus(docs, seed);
    let toks = preprocess_corpus(&c, &StopWordList::empty(), TokenizeOptions::default()).unwrap();
    let (train, test) = corpus::split_indices(toks.len(), 0.8, eval::split_seed(seed)).unwrap();
    let pick = |ids: &[usize]| ids.iter().map(|&i| toks[i].clone()).collect::<Vec<_>>();
    let (train_docs, test_docs) = (pick(&train), pick(&test));
    let tfidf = TfIdfModel::fit(&train_docs, 3000).unwrap();
    let (x_train, x_test) = (
        tfidf.transform_corpus(&train_docs),
        tfidf.transform_corpus(&test_docs),
    );
    let model = models::fit(&spec.with_seed(eval::train_seed(seed)), &x_train).unwrap();
    let acc = |x: &FeatureMatrix| {
        let pred = model.predict_matrix(x).unwrap();
        pred.iter().zip(&x.labels).filter(|(p, t)| p == t).count() as f64 / x.len() as f64
    };
    (acc(&x_train), acc(&x_test))
}
