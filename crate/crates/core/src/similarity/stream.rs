use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::sync::Arc;

use super::{brute_force_neighbors, SimilarityProvider};
use crate::types::{Dictionary, ElementId, QuerySet};

/// Per query element, every dictionary entry at or above the threshold,
/// sorted by descending similarity (the element itself first).
///
/// Built once per query and shared read-only by every partition. It doubles
/// as the similarity cache used to fill weight matrices: a pair absent from
/// the table is below the threshold.
#[derive(Debug, Clone)]
pub struct NeighborTable {
    query: Vec<ElementId>,
    alpha: f64,
    lists: Vec<Vec<(ElementId, f64)>>,
    lookup: Vec<HashMap<ElementId, f64>>,
}

impl NeighborTable {
    pub fn build(
        query: &QuerySet,
        provider: &dyn SimilarityProvider,
        dictionary: &Dictionary,
        alpha: f64,
    ) -> Self {
        let lists: Vec<Vec<(ElementId, f64)>> = query
            .tokens()
            .iter()
            .map(|tok| brute_force_neighbors(tok, provider, dictionary, alpha))
            .collect();
        Self::from_lists(query.elements().to_vec(), alpha, lists)
    }

    /// Assembles a table from already sorted neighbour lists, one per query
    /// element in ascending id order.
    pub fn from_lists(
        query: Vec<ElementId>,
        alpha: f64,
        lists: Vec<Vec<(ElementId, f64)>>,
    ) -> Self {
        assert_eq!(
            query.len(),
            lists.len(),
            "one neighbour list per query element"
        );
        let lookup = lists.iter().map(|l| l.iter().copied().collect()).collect();
        Self {
            query,
            alpha,
            lists,
            lookup,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn query(&self) -> &[ElementId] {
        &self.query
    }

    pub fn neighbors(&self, query_pos: usize) -> &[(ElementId, f64)] {
        &self.lists[query_pos]
    }

    /// Thresholded similarity between the query element at `query_pos` and `t`.
    pub fn similarity(&self, query_pos: usize, t: ElementId) -> f64 {
        self.lookup[query_pos].get(&t).copied().unwrap_or(0.0)
    }

    /// Total number of (query element, token) pairs the stream will emit.
    pub fn pair_count(&self) -> usize {
        self.lists.iter().map(Vec::len).sum()
    }

    /// Every token that is similar enough to some query element.
    pub fn tokens(&self) -> impl Iterator<Item = ElementId> + '_ {
        self.lists.iter().flatten().map(|(t, _)| *t)
    }
}

/// One emission of the stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamTuple {
    pub query_pos: usize,
    pub query: ElementId,
    pub token: ElementId,
    pub sim: f64,
}

#[derive(Debug, Clone, Copy)]
struct Head {
    sim: f64,
    query_pos: usize,
    token: ElementId,
}

impl PartialEq for Head {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Head {}

impl PartialOrd for Head {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Head {
    // max-heap: higher similarity first, then lower (query, token) ids
    fn cmp(&self, other: &Self) -> Ordering {
        self.sim
            .total_cmp(&other.sim)
            .then_with(|| other.query_pos.cmp(&self.query_pos))
            .then_with(|| other.token.cmp(&self.token))
    }
}

/// Merged stream of `(q, t, sim)` tuples in non-increasing similarity.
///
/// The frontier holds at most one pending tuple per query element; popping a
/// tuple advances only that element's cursor.
#[derive(Debug, Clone)]
pub struct TokenStream {
    table: Arc<NeighborTable>,
    cursors: Vec<usize>,
    frontier: BinaryHeap<Head>,
    emitted: usize,
    last: Option<f64>,
}

impl TokenStream {
    pub fn open(
        query: &QuerySet,
        provider: &dyn SimilarityProvider,
        dictionary: &Dictionary,
        alpha: f64,
    ) -> Self {
        Self::new(Arc::new(NeighborTable::build(
            query, provider, dictionary, alpha,
        )))
    }

    pub fn new(table: Arc<NeighborTable>) -> Self {
        let n = table.query.len();
        let mut stream = Self {
            table,
            cursors: vec![0; n],
            frontier: BinaryHeap::with_capacity(n),
            emitted: 0,
            last: None,
        };
        for pos in 0..n {
            stream.refill(pos);
        }
        stream
    }

    fn refill(&mut self, query_pos: usize) {
        let cursor = self.cursors[query_pos];
        if let Some(&(token, sim)) = self.table.lists[query_pos].get(cursor) {
            self.cursors[query_pos] += 1;
            self.frontier.push(Head {
                sim,
                query_pos,
                token,
            });
        }
    }

    pub fn table(&self) -> &Arc<NeighborTable> {
        &self.table
    }

    /// Number of tuples emitted so far.
    pub fn emitted(&self) -> usize {
        self.emitted
    }

    /// Similarity of the most recent emission.
    pub fn last_sim(&self) -> Option<f64> {
        self.last
    }

    pub fn is_exhausted(&self) -> bool {
        self.frontier.is_empty()
    }
}

impl Iterator for TokenStream {
    type Item = StreamTuple;

    fn next(&mut self) -> Option<StreamTuple> {
        let head = self.frontier.pop()?;
        self.refill(head.query_pos);
        self.emitted += 1;
        self.last = Some(head.sim);
        Some(StreamTuple {
            query_pos: head.query_pos,
            query: self.table.query[head.query_pos],
            token: head.token,
            sim: head.sim,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::similarity::{ExactSimilarity, TableSimilarity};
    use crate::types::Collection;
    use proptest::prelude::*;

    fn tuples(stream: TokenStream) -> Vec<(u32, u32, f64)> {
        stream.map(|t| (t.query.0, t.token.0, t.sim)).collect()
    }

    #[test]
    fn identity_comes_first() {
        let c = Collection::from_token_sets([vec!["t", "u"]]);
        let q = c.query(["t"]);
        let s = TokenStream::open(&q, &ExactSimilarity, c.dictionary(), 0.8);
        assert_eq!(tuples(s), vec![(0, 0, 1.0)]);
    }

    #[test]
    fn empty_stream_without_neighbors() {
        let c = Collection::from_token_sets([vec!["a", "b"]]);
        let q = c.query(["zzz"]);
        let mut s = TokenStream::open(&q, &ExactSimilarity, c.dictionary(), 0.8);
        assert!(s.is_exhausted());
        assert_eq!(s.next(), None);
    }

    #[test]
    fn single_element_order() {
        let c = Collection::from_token_sets([vec!["a", "b", "c"]]);
        let t = TableSimilarity::new()
            .with("a", "b", 0.9)
            .with("a", "c", 0.85);
        let q = c.query(["a"]);
        let s = TokenStream::open(&q, &t, c.dictionary(), 0.8);
        assert_eq!(tuples(s), vec![(0, 0, 1.0), (0, 1, 0.9), (0, 2, 0.85)]);
    }

    #[test]
    fn cutoff_after_two_pops() {
        let c = Collection::from_token_sets([vec!["a", "b", "c"]]);
        let t = TableSimilarity::new()
            .with("a", "b", 0.9)
            .with("a", "c", 0.5);
        let q = c.query(["a"]);
        let mut s = TokenStream::open(&q, &t, c.dictionary(), 0.8);
        assert!(s.next().is_some());
        assert!(s.next().is_some());
        assert_eq!(s.next(), None);
    }

    #[test]
    fn interleaves_two_query_elements() {
        // out-of-vocabulary query elements so no identity tuples interfere
        let c = Collection::from_token_sets([vec!["x1", "x2", "y1", "y2"]]);
        let t = TableSimilarity::new()
            .with("q1", "x1", 0.95)
            .with("q1", "x2", 0.70)
            .with("q2", "y1", 0.90)
            .with("q2", "y2", 0.85);
        let q = c.query(["q1", "q2"]);
        let sims: Vec<f64> = TokenStream::open(&q, &t, c.dictionary(), 0.8)
            .map(|t| t.sim)
            .collect();
        // flat sort of every pair, cut at alpha
        let mut flat: Vec<f64> = vec![0.95, 0.70, 0.90, 0.85];
        flat.retain(|&s| s >= 0.8);
        flat.sort_by(|a, b| b.total_cmp(a));
        assert_eq!(sims, flat);
    }

    proptest! {
        #[test]
        fn stream_is_monotone_and_complete(
            n_vocab in 2usize..30,
            n_query in 1usize..6,
            seed_sims in proptest::collection::vec(0.0f64..1.0, 30 * 6),
            alpha in 0.3f64..1.0,
        ) {
            let vocab: Vec<String> = (0..n_vocab).map(|i| format!("v{i}")).collect();
            let c = Collection::from_token_sets([vocab.clone()]);
            // query mixes dictionary tokens and unknown ones
            let qtok: Vec<String> = (0..n_query)
                .map(|i| if i % 2 == 0 { format!("v{i}") } else { format!("oov{i}") })
                .collect();
            let mut table = TableSimilarity::new();
            for (qi, qt) in qtok.iter().enumerate() {
                for (vi, vt) in vocab.iter().enumerate() {
                    if qt != vt {
                        table.insert(qt, vt, seed_sims[qi * 30 + vi]);
                    }
                }
            }
            let q = c.query(&qtok);
            let stream = TokenStream::open(&q, &table, c.dictionary(), alpha);
            let got: Vec<StreamTuple> = stream.collect();
            for w in got.windows(2) {
                prop_assert!(w[1].sim <= w[0].sim + 1e-9);
            }
            // all-pairs oracle
            let mut want = Vec::new();
            for (pos, qt) in q.tokens().iter().enumerate() {
                for (id, vt) in c.dictionary().iter() {
                    let s = if qt == vt { 1.0 } else { table.similarity(qt, vt) };
                    if s >= alpha {
                        want.push((q.elements()[pos].0, id.0, s));
                    }
                }
            }
            let mut got_t: Vec<(u32, u32, f64)> =
                got.iter().map(|t| (t.query.0, t.token.0, t.sim)).collect();
            got_t.sort_by_key(|t| (t.0, t.1));
            want.sort_by_key(|t| (t.0, t.1));
            prop_assert_eq!(got_t, want);
        }
    }
}
