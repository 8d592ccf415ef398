//! Bipartite matching kernels over thresholded similarity matrices.
//!
//! Greedy matching gives a lower bound that is at least half the optimum.
//! The Hungarian method gives the exact semantic overlap and can abort as
//! soon as its feasible-label sum, an upper bound on the optimum, falls below
//! a caller-supplied threshold.

use crate::similarity::SimilarityProvider;
use crate::types::{apply_threshold, CandidateSet, Dictionary, QuerySet, EPS};

/// Dense row-major matrix of edge weights in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds from nested rows. Panics if rows have different lengths.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        assert!(
            rows.iter().all(|r| r.as_ref().len() == cols),
            "ragged weight matrix"
        );
        Self::from_fn(rows.len(), cols, |i, j| rows[i].as_ref()[j])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, w: f64) {
        self.data[i * self.cols + j] = w;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }
}

/// Result of an exact matching attempt.
#[derive(Debug, Clone, PartialEq)]
pub enum MatchOutcome {
    /// Optimal score and its `(row, col)` pairs with positive weight.
    Exact {
        score: f64,
        pairs: Vec<(usize, usize)>,
    },
    /// Aborted; `bound` is the label sum at abort time, an upper bound on the
    /// optimum that was below the threshold.
    EarlyTerminated { bound: f64 },
}

impl MatchOutcome {
    pub fn score(&self) -> Option<f64> {
        match self {
            MatchOutcome::Exact { score, .. } => Some(*score),
            MatchOutcome::EarlyTerminated { .. } => None,
        }
    }
}

/// Repeatedly takes the heaviest edge between unmatched nodes. Ties go to
/// the smaller `(row, col)`.
pub fn greedy_matching(w: &WeightMatrix) -> (f64, Vec<(usize, usize)>) {
    let mut edges: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..w.rows {
        for (j, &x) in w.row(i).iter().enumerate() {
            if x > 0.0 {
                edges.push((x, i, j));
            }
        }
    }
    edges.sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut row_used = vec![false; w.rows];
    let mut col_used = vec![false; w.cols];
    let mut score = 0.0;
    let mut pairs = Vec::new();
    for (x, i, j) in edges {
        if !row_used[i] && !col_used[j] {
            row_used[i] = true;
            col_used[j] = true;
            score += x;
            pairs.push((i, j));
        }
    }
    (score, pairs)
}

pub fn max_edge(w: &WeightMatrix) -> f64 {
    w.data.iter().copied().fold(0.0, f64::max)
}

/// `max(max_edge, greedy)`, a lower bound on the optimum.
pub fn lower_bound(w: &WeightMatrix) -> f64 {
    max_edge(w).max(greedy_matching(w).0)
}

/// Maximum-weight optional one-to-one matching by Kuhn-Munkres, O(n³).
///
/// All-zero rows and columns are dropped and the rest zero-padded to a
/// square. Starting labels are row maxima and zero. If `probe` is given, the
/// label sum is compared with its current value after the initial labeling
/// and after each label update, and the run aborts once the sum is below it.
pub fn hungarian_so(w: &WeightMatrix, probe: Option<&dyn Fn() -> f64>) -> MatchOutcome {
    let live_rows: Vec<usize> = (0..w.rows)
        .filter(|&i| w.row(i).iter().any(|&x| x > 0.0))
        .collect();
    let live_cols: Vec<usize> = (0..w.cols)
        .filter(|&j| live_rows.iter().any(|&i| w.get(i, j) > 0.0))
        .collect();
    let n = live_rows.len().max(live_cols.len());
    if n == 0 {
        return MatchOutcome::Exact {
            score: 0.0,
            pairs: Vec::new(),
        };
    }
    let mut a = vec![0.0; n * n];
    for (ri, &i) in live_rows.iter().enumerate() {
        for (ci, &j) in live_cols.iter().enumerate() {
            a[ri * n + ci] = w.get(i, j);
        }
    }
    let weight = |i: usize, j: usize| a[i * n + j];
    let aborted = |sum: f64| probe.is_some_and(|p| sum + EPS < p());

    let mut lx: Vec<f64> = (0..n)
        .map(|i| a[i * n..(i + 1) * n].iter().copied().fold(0.0, f64::max))
        .collect();
    let mut ly = vec![0.0; n];
    let mut label_sum: f64 = lx.iter().sum();
    if aborted(label_sum) {
        return MatchOutcome::EarlyTerminated { bound: label_sum };
    }

    let mut match_x: Vec<Option<usize>> = vec![None; n];
    let mut match_y: Vec<Option<usize>> = vec![None; n];
    let mut slack = vec![0.0; n];
    let mut slack_x = vec![0usize; n];
    let mut in_s = vec![false; n];
    let mut in_t = vec![false; n];

    for root in 0..n {
        in_s.fill(false);
        in_t.fill(false);
        in_s[root] = true;
        for j in 0..n {
            slack[j] = lx[root] + ly[j] - weight(root, j);
            slack_x[j] = root;
        }
        loop {
            let mut j = usize::MAX;
            let mut delta = f64::INFINITY;
            for y in 0..n {
                if !in_t[y] && slack[y] < delta {
                    delta = slack[y];
                    j = y;
                }
            }
            debug_assert!(j != usize::MAX, "free column must exist");
            if delta > 0.0 {
                for x in 0..n {
                    if in_s[x] {
                        lx[x] -= delta;
                    }
                }
                for y in 0..n {
                    if in_t[y] {
                        ly[y] += delta;
                    } else {
                        slack[y] -= delta;
                    }
                }
                debug_assert!(
                    (0..n).all(|y| in_t[y] || slack[y] >= -1e-9),
                    "labels lost feasibility"
                );
                label_sum = lx.iter().sum::<f64>() + ly.iter().sum::<f64>();
                if aborted(label_sum) {
                    return MatchOutcome::EarlyTerminated { bound: label_sum };
                }
            }
            in_t[j] = true;
            match match_y[j] {
                None => {
                    let mut y = j;
                    loop {
                        let x = slack_x[y];
                        let next = match_x[x];
                        match_x[x] = Some(y);
                        match_y[y] = Some(x);
                        if x == root {
                            break;
                        }
                        y = next.expect("non-root tree node is matched");
                    }
                    break;
                }
                Some(x) => {
                    in_s[x] = true;
                    for y in 0..n {
                        if !in_t[y] {
                            let s = lx[x] + ly[y] - weight(x, y);
                            if s < slack[y] {
                                slack[y] = s;
                                slack_x[y] = x;
                            }
                        }
                    }
                }
            }
        }
    }

    let mut score = 0.0;
    let mut pairs = Vec::new();
    for (ri, m) in match_x.iter().enumerate() {
        let ci = m.expect("perfect matching on padded square");
        let x = weight(ri, ci);
        if x > 0.0 && ri < live_rows.len() && ci < live_cols.len() {
            score += x;
            pairs.push((live_rows[ri], live_cols[ci]));
        }
    }
    pairs.sort_unstable();
    MatchOutcome::Exact { score, pairs }
}

/// Thresholded similarity matrix between `q` (rows) and `c` (columns),
/// scored directly through the provider.
pub fn weight_matrix(
    q: &QuerySet,
    c: &CandidateSet,
    dictionary: &Dictionary,
    provider: &dyn SimilarityProvider,
    alpha: f64,
) -> WeightMatrix {
    let ctoks: Vec<&str> = c
        .elements()
        .iter()
        .map(|&e| dictionary.token(e).unwrap_or_default())
        .collect();
    WeightMatrix::from_fn(q.len(), c.len(), |i, j| {
        if q.elements()[i] == c.elements()[j] {
            1.0
        } else {
            apply_threshold(
                provider
                    .similarity(&q.tokens()[i], ctoks[j])
                    .clamp(0.0, 1.0),
                alpha,
            )
        }
    })
}

/// Semantic overlap of `q` and `c`, computed from scratch.
pub fn exact_so(
    q: &QuerySet,
    c: &CandidateSet,
    dictionary: &Dictionary,
    provider: &dyn SimilarityProvider,
    alpha: f64,
) -> f64 {
    let w = weight_matrix(q, c, dictionary, provider, alpha);
    hungarian_so(&w, None)
        .score()
        .expect("no threshold, no early termination")
}
