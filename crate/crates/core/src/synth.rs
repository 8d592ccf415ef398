//! Seeded synthetic workloads: clustered embeddings, topical sets and
//! queries with skewed cardinality.
//!
//! Tokens are named `t{cluster}_{j}`. Each vector is a random unit cluster
//! center plus gaussian noise, so tokens of one cluster are mostly similar
//! above typical thresholds and tokens of different clusters are not.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::similarity::EmbeddingSimilarity;
use crate::types::Collection;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub sets: usize,
    pub clusters: usize,
    pub tokens_per_cluster: usize,
    pub dim: usize,
    /// Per-component standard deviation around the cluster center.
    pub noise: f64,
    pub min_cardinality: usize,
    pub max_cardinality: usize,
    pub queries: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            sets: 300,
            clusters: 100,
            tokens_per_cluster: 20,
            dim: 16,
            noise: 0.1,
            min_cardinality: 3,
            max_cardinality: 50,
            queries: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Workload {
    pub collection: Collection,
    pub embeddings: EmbeddingSimilarity,
    /// Query token lists; some tokens may be absent from the collection.
    pub queries: Vec<Vec<String>>,
}

pub fn token_name(cluster: usize, j: usize) -> String {
    format!("t{cluster}_{j}")
}

fn unit(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Clustered embedding vectors for every synthetic token.
pub fn cluster_vectors(cfg: &SynthConfig, rng: &mut impl Rng) -> Vec<(String, Vec<f64>)> {
    let gauss = Normal::new(0.0, 1.0).expect("valid normal");
    let noise = Normal::new(0.0, cfg.noise.max(0.0)).expect("valid normal");
    let mut out = Vec::with_capacity(cfg.clusters * cfg.tokens_per_cluster);
    for c in 0..cfg.clusters {
        let mut center: Vec<f64> = (0..cfg.dim).map(|_| gauss.sample(rng)).collect();
        unit(&mut center);
        for j in 0..cfg.tokens_per_cluster {
            let mut v: Vec<f64> = center.iter().map(|x| x + noise.sample(rng)).collect();
            unit(&mut v);
            out.push((token_name(c, j), v));
        }
    }
    out
}

fn topical_tokens(cfg: &SynthConfig, rng: &mut impl Rng, cardinality: usize) -> Vec<String> {
    let topics = rng.gen_range(1..=3usize.min(cfg.clusters));
    let clusters: Vec<usize> = (0..cfg.clusters).collect();
    let chosen: Vec<usize> = clusters.choose_multiple(rng, topics).copied().collect();
    let mut pool: Vec<String> = chosen
        .iter()
        .flat_map(|&c| (0..cfg.tokens_per_cluster).map(move |j| token_name(c, j)))
        .collect();
    pool.shuffle(rng);
    pool.truncate(cardinality.max(1));
    pool
}

/// Query cardinality with most mass at the small end and a long tail.
fn skewed_cardinality(cfg: &SynthConfig, rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen_range(0.0..1.0);
    let span = (cfg.max_cardinality - cfg.min_cardinality) as f64;
    cfg.min_cardinality + (u * u * u * span).round() as usize
}

pub fn generate(cfg: &SynthConfig) -> Workload {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut embeddings = EmbeddingSimilarity::new(cfg.dim);
    for (tok, v) in cluster_vectors(cfg, &mut rng) {
        embeddings
            .insert(tok, &v)
            .expect("synthetic vectors are valid");
    }
    let mut collection = Collection::default();
    for _ in 0..cfg.sets {
        let card = rng.gen_range(cfg.min_cardinality..=cfg.max_cardinality);
        collection.push_tokens(topical_tokens(cfg, &mut rng, card));
    }
    let queries = (0..cfg.queries)
        .map(|_| {
            let card = skewed_cardinality(cfg, &mut rng);
            topical_tokens(cfg, &mut rng, card)
        })
        .collect();
    Workload {
        collection,
        embeddings,
        queries,
    }
}

/// A workload in which each query has look-alike sets built from typo
/// variants of its tokens (`{token}~`, embedded very close to the original)
/// next to decoy sets that share more tokens verbatim but are otherwise
/// unrelated.
pub fn typo_workload(cfg: &SynthConfig) -> Workload {
    let mut base = generate(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7970_6f73);
    let tight = Normal::new(0.0, 0.01).expect("valid normal");
    let gauss = Normal::new(0.0, 1.0).expect("valid normal");
    let mut fresh = 0usize;
    for q in base.queries.clone() {
        let mut variants = Vec::with_capacity(q.len());
        for tok in &q {
            let name = format!("{tok}~");
            if !base.embeddings.contains(&name) {
                let v = base_vector(&base.embeddings, tok, &tight, &mut rng);
                base.embeddings
                    .insert(name.clone(), &v)
                    .expect("valid vector");
            }
            variants.push(name);
        }
        // look-alike: a fifth verbatim, the rest as variants
        let keep = (q.len() / 5).max(1);
        let look_alike: Vec<String> = q[..keep]
            .iter()
            .cloned()
            .chain(variants[keep..].iter().cloned())
            .collect();
        base.collection.push_tokens(&look_alike);
        // decoys: half verbatim, padded with unrelated one-off tokens
        for _ in 0..3 {
            let mut decoy: Vec<String> = q
                .choose_multiple(&mut rng, q.len().div_ceil(2))
                .cloned()
                .collect();
            for _ in 0..q.len() / 2 {
                let name = format!("noise{fresh}");
                fresh += 1;
                let mut v: Vec<f64> = (0..cfg.dim).map(|_| gauss.sample(&mut rng)).collect();
                unit(&mut v);
                base.embeddings
                    .insert(name.clone(), &v)
                    .expect("valid vector");
                decoy.push(name);
            }
            base.collection.push_tokens(&decoy);
        }
    }
    base
}

fn base_vector(
    e: &EmbeddingSimilarity,
    tok: &str,
    noise: &Normal<f64>,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let mut v: Vec<f64> = e
        .vector(tok)
        .expect("query tokens have vectors")
        .iter()
        .map(|x| x + noise.sample(rng))
        .collect();
    unit(&mut v);
    v
}
