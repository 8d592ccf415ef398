#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use semoverlap::synth::{generate, SynthConfig, Workload};
use semoverlap::{
    exact_so, Collection, QuerySet, SetId, SimilarityProvider, TableSimilarity, WeightMatrix,
};

/// Best assignment by enumerating every permutation of the zero-padded square.
pub fn brute_force_so(w: &WeightMatrix) -> f64 {
    let n = w.rows().max(w.cols());
    let get = |i: usize, j: usize| {
        if i < w.rows() && j < w.cols() {
            w.get(i, j)
        } else {
            0.0
        }
    };
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = 0.0f64;
    permute(&mut perm, 0, &mut |p| {
        let s: f64 = p.iter().enumerate().map(|(i, &j)| get(i, j)).sum();
        best = best.max(s);
    });
    best
}

fn permute(p: &mut Vec<usize>, start: usize, f: &mut impl FnMut(&[usize])) {
    if start == p.len() {
        f(p);
        return;
    }
    for i in start..p.len() {
        p.swap(start, i);
        permute(p, start + 1, f);
        p.swap(start, i);
    }
}

/// Sparse random matrix with weights in `[alpha, 1]` or zero.
pub fn random_matrix(rng: &mut impl Rng, max_n: usize, alpha: f64) -> WeightMatrix {
    let rows = rng.gen_range(1..=max_n);
    let cols = rng.gen_range(1..=max_n);
    let density: f64 = rng.gen_range(0.1..0.9);
    WeightMatrix::from_fn(rows, cols, |_, _| {
        if rng.gen_bool(density) {
            rng.gen_range(alpha..=1.0)
        } else {
            0.0
        }
    })
}

/// Workload `i` of the standard randomized suite: 200 to 500 sets,
/// cardinalities 3 to 50, 16-dimensional clustered embeddings.
pub fn suite_workload(i: u64) -> (Workload, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE + i);
    let cfg = SynthConfig {
        sets: rng.gen_range(200..=500),
        queries: 1,
        seed: 1000 + i,
        ..SynthConfig::default()
    };
    let k = [1, 5, 10][(i % 3) as usize];
    (generate(&cfg), k)
}

/// Semantic overlap of the query with every set, straight from the provider.
pub fn oracle_scores(
    q: &QuerySet,
    c: &Collection,
    provider: &dyn SimilarityProvider,
    alpha: f64,
) -> Vec<(SetId, f64)> {
    let mut out: Vec<(SetId, f64)> = c
        .sets()
        .iter()
        .map(|s| (s.id, exact_so(q, s, c.dictionary(), provider, alpha)))
        .filter(|e| e.1 > 0.0)
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}

/// Score multisets equal within `eps`.
pub fn same_scores(a: &[f64], b: &[f64], eps: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= eps)
}

/// The two-candidate city example: a query of city names, one set the
/// greedy estimate prefers and one with the higher exact overlap.
pub fn cities() -> (Collection, TableSimilarity, Vec<&'static str>) {
    let c = Collection::from_token_sets([
        vec![
            "LA",
            "Blain",
            "Appleton",
            "MtPleasant",
            "Lexington",
            "WestCoast",
        ],
        vec![
            "LA",
            "Sacramento",
            "Southern",
            "Blain",
            "SC",
            "Minnesota",
            "NewYorkCity",
        ],
    ]);
    let sim = TableSimilarity::new()
        .with("Blaine", "Blain", 0.99)
        .with("Seattle", "WestCoast", 0.7)
        .with("Charleston", "MtPleasant", 0.7)
        .with("Columbia", "Lexington", 0.7)
        .with("Blaine", "Minnesota", 0.75)
        .with("BigApple", "NewYorkCity", 0.9)
        .with("Charleston", "SC", 0.85)
        .with("Columbia", "SC", 0.84)
        .with("Charleston", "Southern", 0.8);
    let q = vec![
        "LA",
        "Blaine",
        "Seattle",
        "Columbia",
        "BigApple",
        "Charleston",
    ];
    (c, sim, q)
}
