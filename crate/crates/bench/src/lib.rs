//! Synthetic workloads for the benchmarks.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roman_sentiment::corpus::Sentiment;
use roman_sentiment::TokenizedComment;

/// `docs` tokenized comments over a Zipf-ish vocabulary of `vocab` words,
/// with a class-dependent slice of the vocabulary boosted.
pub fn synthetic_docs(docs: usize, vocab: usize, seed: u64) -> Vec<TokenizedComment> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words: Vec<String> = (0..vocab).map(|i| format!("w{i}")).collect();
    (0..docs)
        .map(|row_id| {
            let label = Sentiment::ALL[rng.random_range(0..3)];
            let len = rng.random_range(4..=20);
            let tokens = (0..len)
                .map(|_| {
                    if rng.random_bool(0.3) {
                        let lo = label.code() * vocab / 3;
                        words[lo + rng.random_range(0..vocab / 3)].clone()
                    } else {
                        // squaring skews draws toward low indices
                        let u: f64 = rng.random();
                        words[((u * u) * vocab as f64) as usize].clone()
                    }
                })
                .collect();
            TokenizedComment::new(row_id, tokens, label)
        })
        .collect()
}

/// A random training row to use as a query.
pub fn pick_query(docs: &[TokenizedComment], seed: u64) -> &TokenizedComment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    docs.choose(&mut rng).expect("non-empty docs")
}
