//! First phase: consume the token stream, track incremental bounds per
//! candidate and prune every set whose upper bound falls below the running
//! k-th best lower bound.
//!
//! The lower bound of a candidate is its partial greedy matching: the
//! vanilla-overlap identity pairs plus every later stream edge whose two
//! endpoints are still free. The upper bound is the smaller of two sums. The
//! row sum adds, per query element, the first edge seen into the candidate
//! (the element's best edge, since the stream is sorted), keeping at most
//! `min(|Q|, |C|)` rows and charging the current similarity `s` for each row
//! still missing. The column sum does the same from the candidate side. Both
//! have the form `S + m * s`, so each lives in its own [`BucketIndex`].

mod bucket;

use std::time::{Duration, Instant};

pub use bucket::BucketIndex;

use crate::index::InvertedIndex;
use crate::similarity::TokenStream;
use crate::topk::{ThetaCell, TopKList};
use crate::types::{vanilla_overlap, CandidateSet, Collection, QuerySet, SetId, EPS};

/// How often (in tuples) the deadline is checked; a power of two so the
/// check is a mask.
const DEADLINE_STRIDE: usize = 256;

/// First-seen edge sums along one side of the bipartite graph.
#[derive(Debug, Clone)]
struct SideBound {
    seen: Vec<bool>,
    sum: f64,
    count: usize,
    cap: usize,
}

impl SideBound {
    fn new(len: usize, cap: usize) -> Self {
        Self {
            seen: vec![false; len],
            sum: 0.0,
            count: 0,
            cap,
        }
    }

    fn remaining(&self) -> usize {
        self.cap - self.count
    }

    fn bound(&self, s: f64) -> f64 {
        self.sum + self.remaining() as f64 * s
    }

    /// Records the first edge at `pos`. Returns true if the sum changed.
    fn record(&mut self, pos: usize, w: f64) -> bool {
        if self.seen[pos] {
            return false;
        }
        self.seen[pos] = true;
        if self.count < self.cap {
            self.sum += w;
            self.count += 1;
            true
        } else {
            false
        }
    }
}

/// What an edge changed in a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EdgeEffect {
    pub lower: bool,
    pub rows: bool,
    pub cols: bool,
}

/// Incremental bookkeeping for one candidate set.
#[derive(Debug, Clone)]
pub struct CandidateState {
    set_id: SetId,
    greedy: f64,
    matched_query: Vec<bool>,
    matched_cand: Vec<bool>,
    matched: usize,
    vanilla: usize,
    rows: SideBound,
    cols: SideBound,
}

impl CandidateState {
    /// Fresh state with the vanilla-overlap identity pairs matched.
    pub fn new(query: &QuerySet, set: &CandidateSet) -> Self {
        let n = query.len().min(set.len());
        let mut state = Self {
            set_id: set.id,
            greedy: 0.0,
            matched_query: vec![false; query.len()],
            matched_cand: vec![false; set.len()],
            matched: 0,
            vanilla: 0,
            rows: SideBound::new(query.len(), n),
            cols: SideBound::new(set.len(), n),
        };
        for (qi, &e) in query.elements().iter().enumerate() {
            if let Some(ci) = set.position(e) {
                state.apply(qi, ci, 1.0);
                state.vanilla += 1;
            }
        }
        state
    }

    /// Upper bound before any stream edge is applied, when the candidate
    /// first appears at similarity `s`: `vanilla + (n - vanilla) * s`.
    pub fn initial_upper_bound(
        query_len: usize,
        set: &CandidateSet,
        vanilla: usize,
        s: f64,
    ) -> f64 {
        let n = query_len.min(set.len());
        vanilla as f64 + (n - vanilla) as f64 * s
    }

    pub fn set_id(&self) -> SetId {
        self.set_id
    }

    pub fn vanilla(&self) -> usize {
        self.vanilla
    }

    /// Partial greedy sum, a lower bound on the semantic overlap.
    pub fn lower(&self) -> f64 {
        self.greedy
    }

    /// Matched pairs in the partial greedy matching.
    pub fn matched(&self) -> usize {
        self.matched
    }

    /// Upper bound given that every unseen edge weighs at most `s`.
    pub fn upper(&self, s: f64) -> f64 {
        self.rows.bound(s).min(self.cols.bound(s))
    }

    pub fn row_key(&self) -> (usize, f64) {
        (self.rows.remaining(), self.rows.sum)
    }

    pub fn col_key(&self) -> (usize, f64) {
        (self.cols.remaining(), self.cols.sum)
    }

    /// Applies a stream edge between query position `qi` and candidate
    /// position `ci`. Edges must arrive in non-increasing weight.
    pub fn apply(&mut self, qi: usize, ci: usize, w: f64) -> EdgeEffect {
        let mut effect = EdgeEffect::default();
        if !self.matched_query[qi] && !self.matched_cand[ci] {
            self.matched_query[qi] = true;
            self.matched_cand[ci] = true;
            self.greedy += w;
            self.matched += 1;
            effect.lower = true;
        }
        effect.rows = self.rows.record(qi, w);
        effect.cols = self.cols.record(ci, w);
        effect
    }
}

/// A candidate that survived refinement, with its final bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub set_id: SetId,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RefineStats {
    /// Sets that appeared in the stream and were materialized or pruned.
    pub candidates: usize,
    /// Sets removed by the upper-bound filter.
    pub iub_pruned: usize,
    pub tuples_consumed: usize,
    /// Effective threshold after every change, starting at its initial value.
    pub theta_trace: Vec<f64>,
    pub timed_out: bool,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct Refined {
    /// Unpruned candidates in order of first appearance.
    pub candidates: Vec<Candidate>,
    /// k best lower bounds seen.
    pub lower: TopKList,
    pub stats: RefineStats,
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Unseen,
    Live(usize),
    Pruned,
}

struct Refiner<'a> {
    query: &'a QuerySet,
    collection: &'a Collection,
    theta: &'a ThetaCell,
    slots: Vec<Slot>,
    states: Vec<CandidateState>,
    rows: BucketIndex,
    cols: BucketIndex,
    lower: TopKList,
    stats: RefineStats,
}

impl<'a> Refiner<'a> {
    fn theta(&self) -> f64 {
        self.lower.bottom().max(self.theta.get())
    }

    fn trace(&mut self) {
        let t = self.theta();
        if self.stats.theta_trace.last() != Some(&t) {
            self.stats.theta_trace.push(t);
        }
    }

    fn offer_lower(&mut self, id: SetId, lb: f64) {
        if self.lower.update(id, lb) {
            self.theta.raise(self.lower.bottom());
        }
    }

    fn discover(&mut self, set: &CandidateSet, qi: usize, ci: usize, s: f64, theta: f64) {
        self.stats.candidates += 1;
        let vanilla = vanilla_overlap(self.query.elements(), set.elements());
        let init = CandidateState::initial_upper_bound(self.query.len(), set, vanilla, s);
        if init < theta - EPS {
            self.slots[set.id.index()] = Slot::Pruned;
            self.stats.iub_pruned += 1;
            return;
        }
        let mut state = CandidateState::new(self.query, set);
        state.apply(qi, ci, s);
        let (rm, rs) = state.row_key();
        let (cm, cs) = state.col_key();
        self.rows.insert(set.id, rm, rs);
        self.cols.insert(set.id, cm, cs);
        let lb = state.lower();
        self.slots[set.id.index()] = Slot::Live(self.states.len());
        self.states.push(state);
        self.offer_lower(set.id, lb);
    }

    fn update(&mut self, slot: usize, qi: usize, ci: usize, s: f64) {
        let state = &mut self.states[slot];
        let (rm, rs) = state.row_key();
        let (cm, cs) = state.col_key();
        let effect = state.apply(qi, ci, s);
        let id = state.set_id();
        let lb = state.lower();
        if effect.rows {
            let (nm, ns) = self.states[slot].row_key();
            self.rows
                .relocate(id, rm, rs, nm, ns)
                .expect("live candidate is in the row buckets");
        }
        if effect.cols {
            let (nm, ns) = self.states[slot].col_key();
            self.cols
                .relocate(id, cm, cs, nm, ns)
                .expect("live candidate is in the column buckets");
        }
        if effect.lower {
            self.offer_lower(id, lb);
        }
    }

    fn prune(&mut self, s: f64) {
        let theta = self.theta();
        let lower = &self.lower;
        let by_rows = self.rows.prune(s, theta, |id| lower.contains(id));
        for id in by_rows {
            let Slot::Live(i) = self.slots[id.index()] else {
                unreachable!("bucket entries are live")
            };
            let (m, base) = self.states[i].col_key();
            self.cols
                .remove(id, m, base)
                .expect("live candidate is in the column buckets");
            self.slots[id.index()] = Slot::Pruned;
            self.stats.iub_pruned += 1;
        }
        let lower = &self.lower;
        let by_cols = self.cols.prune(s, theta, |id| lower.contains(id));
        for id in by_cols {
            let Slot::Live(i) = self.slots[id.index()] else {
                unreachable!("bucket entries are live")
            };
            let (m, base) = self.states[i].row_key();
            self.rows
                .remove(id, m, base)
                .expect("live candidate is in the row buckets");
            self.slots[id.index()] = Slot::Pruned;
            self.stats.iub_pruned += 1;
        }
    }
}

/// Runs the refinement phase over the sets reachable through `index`.
///
/// `theta` is shared with concurrent searches over other partitions: local
/// improvements of the k-th lower bound are published to it and its value
/// is used for pruning. New candidates are not admitted once `|Q| * s`
/// drops below the threshold, but known candidates keep receiving edges.
pub fn refine(
    query: &QuerySet,
    collection: &Collection,
    index: &InvertedIndex,
    stream: TokenStream,
    k: usize,
    theta: &ThetaCell,
    deadline: Option<Instant>,
) -> Refined {
    let start = Instant::now();
    let mut r = Refiner {
        query,
        collection,
        theta,
        slots: vec![Slot::Unseen; collection.len()],
        states: Vec::new(),
        rows: BucketIndex::new(),
        cols: BucketIndex::new(),
        lower: TopKList::new(k),
        stats: RefineStats::default(),
    };
    r.trace();
    let qlen = query.len() as f64;
    let mut last_s = 1.0;
    for tuple in stream {
        r.stats.tuples_consumed += 1;
        if r.stats.tuples_consumed & (DEADLINE_STRIDE - 1) == 0
            && deadline.is_some_and(|d| Instant::now() >= d)
        {
            r.stats.timed_out = true;
            break;
        }
        let s = tuple.sim;
        last_s = s;
        let theta_now = r.theta();
        let admit = qlen * s >= theta_now - EPS;
        for &id in index.postings(tuple.token) {
            let set = r.collection.set(id);
            let Some(ci) = set.position(tuple.token) else {
                continue;
            };
            match r.slots[id.index()] {
                Slot::Pruned => {}
                Slot::Live(i) => r.update(i, tuple.query_pos, ci, s),
                Slot::Unseen if admit => r.discover(set, tuple.query_pos, ci, s, theta_now),
                Slot::Unseen => {}
            }
        }
        r.prune(s);
        r.trace();
    }
    let final_s = if r.stats.timed_out { last_s } else { 0.0 };
    r.prune(final_s);
    r.trace();

    let candidates = r
        .states
        .iter()
        .filter(|st| matches!(r.slots[st.set_id().index()], Slot::Live(_)))
        .map(|st| Candidate {
            set_id: st.set_id(),
            lower: st.lower(),
            upper: st.upper(final_s).max(st.lower()),
        })
        .collect();
    r.stats.elapsed = start.elapsed();
    Refined {
        candidates,
        lower: r.lower,
        stats: r.stats,
    }
}
