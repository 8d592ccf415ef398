//! Shared inputs for the criterion benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semoverlap::synth::{generate, SynthConfig, Workload};
use semoverlap::{QuerySet, WeightMatrix};

/// Random `n x n` weight matrix with entries below `alpha` zeroed.
pub fn random_matrix(n: usize, alpha: f64, seed: u64) -> WeightMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    WeightMatrix::from_fn(n, n, |_, _| {
        let w: f64 = rng.gen_range(0.0..1.0);
        if w >= alpha {
            w
        } else {
            0.0
        }
    })
}

/// A synthetic repository and its first query.
pub fn workload(sets: usize, seed: u64) -> (Workload, QuerySet) {
    let w = generate(&SynthConfig {
        sets,
        queries: 1,
        seed,
        min_cardinality: 10,
        ..SynthConfig::default()
    });
    let q = w.collection.query(&w.queries[0]);
    (w, q)
}
