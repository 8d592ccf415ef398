//! Search orchestration: random partitioning, one refinement and
//! verification pass per partition in parallel, and the merge.
//!
//! All partitions share one [`ThetaCell`]. Each publishes its k-th best lower
//! bound there and prunes against the maximum of its own and the shared
//! value, so a strong partition speeds up the others.

use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::error::Result;
use crate::index::InvertedIndex;
use crate::matching::MatchOutcome;
use crate::postproc::{postprocess, TableVerifier, Verifier};
use crate::refinement::refine;
use crate::similarity::{NeighborTable, SimilarityProvider, TokenStream};
use crate::topk::ThetaCell;
use crate::types::{vanilla_overlap, Collection, QuerySet, SearchParams, SetId};

/// Entries, counters and exactness of one partition.
type PartitionRun = (Vec<(SetId, f64)>, Stats, bool);

/// Counters and traces of one search.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Stats {
    pub query_cardinality: usize,
    /// Sets that appeared in the token stream.
    pub candidates: usize,
    pub iub_pruned: usize,
    pub tuples_consumed: usize,
    pub no_em: usize,
    pub em_calls: usize,
    pub em_early_terminated: usize,
    pub postproc_ub_pruned: usize,
    pub left_in_queue: usize,
    pub score_calls: usize,
    pub refine_ms: f64,
    pub postproc_ms: f64,
    pub total_ms: f64,
    /// Effective k-th lower bound after each change. Empty for multi-partition runs.
    pub theta_lb_trace: Vec<f64>,
    /// k-th largest upper bound after each change. Empty for multi-partition runs.
    pub theta_ub_trace: Vec<f64>,
}

impl Stats {
    /// Candidates handed from refinement to verification.
    pub fn unpruned(&self) -> usize {
        self.candidates - self.iub_pruned
    }

    /// Every exact-matching run, including aborted ones.
    pub fn hungarian_calls(&self) -> usize {
        self.em_calls + self.em_early_terminated + self.score_calls
    }

    fn absorb(&mut self, other: &Stats) {
        self.candidates += other.candidates;
        self.iub_pruned += other.iub_pruned;
        self.tuples_consumed += other.tuples_consumed;
        self.no_em += other.no_em;
        self.em_calls += other.em_calls;
        self.em_early_terminated += other.em_early_terminated;
        self.postproc_ub_pruned += other.postproc_ub_pruned;
        self.left_in_queue += other.left_in_queue;
        self.score_calls += other.score_calls;
        self.refine_ms = self.refine_ms.max(other.refine_ms);
        self.postproc_ms = self.postproc_ms.max(other.postproc_ms);
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchResult {
    /// Sorted by score descending, then set id ascending.
    pub entries: Vec<(SetId, f64)>,
    pub stats: Stats,
    /// False if the deadline cut the search short.
    pub exact: bool,
    /// Fewer than k sets have a positive overlap with the query.
    pub too_few_results: bool,
    /// Per-partition result lists, before the global merge.
    pub partition_results: Vec<Vec<(SetId, f64)>>,
    pub partition_stats: Vec<Stats>,
}

impl SearchResult {
    pub fn scores(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.1).collect()
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Assigns every set to one of `p` partitions by a seeded hash of its id.
pub fn partition(collection: &Collection, p: usize, seed: u64) -> Vec<Vec<SetId>> {
    let p = p.max(1);
    let mut parts = vec![Vec::new(); p];
    for set in collection.sets() {
        let slot = if p == 1 {
            0
        } else {
            (mix64(seed ^ mix64(set.id.0 as u64)) % p as u64) as usize
        };
        parts[slot].push(set.id);
    }
    parts
}

fn sort_entries(entries: &mut [(SetId, f64)]) {
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
}

/// A collection prepared for repeated searches under fixed parameters.
pub struct Engine<'a> {
    collection: &'a Collection,
    params: SearchParams,
    index: InvertedIndex,
    parts: Vec<InvertedIndex>,
}

impl<'a> Engine<'a> {
    pub fn new(collection: &'a Collection, params: SearchParams) -> Result<Self> {
        Self::with_index(collection, InvertedIndex::build(collection), params)
    }

    /// Reuses an index already built over the whole collection.
    pub fn with_index(
        collection: &'a Collection,
        index: InvertedIndex,
        params: SearchParams,
    ) -> Result<Self> {
        params.validate()?;
        let parts = if params.partitions == 1 {
            Vec::new()
        } else {
            partition(collection, params.partitions, params.seed)
                .into_iter()
                .map(|ids| InvertedIndex::build_subset(collection, ids))
                .collect()
        };
        Ok(Self {
            collection,
            params,
            index,
            parts,
        })
    }

    pub fn params(&self) -> &SearchParams {
        &self.params
    }

    pub fn collection(&self) -> &Collection {
        self.collection
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }

    fn deadline(&self, start: Instant) -> Option<Instant> {
        self.params
            .timeout_seconds
            .map(|s| start + Duration::from_secs(s))
    }

    fn partition_indexes(&self) -> Vec<&InvertedIndex> {
        if self.parts.is_empty() {
            vec![&self.index]
        } else {
            self.parts.iter().collect()
        }
    }

    /// Exact top-k by semantic overlap.
    pub fn search(&self, query: &QuerySet, provider: &dyn SimilarityProvider) -> SearchResult {
        let start = Instant::now();
        let deadline = self.deadline(start);
        let table = Arc::new(NeighborTable::build(
            query,
            provider,
            self.collection.dictionary(),
            self.params.alpha,
        ));
        let theta = ThetaCell::new(0.0);
        let workers = self.params.worker_count();
        let k = self.params.k;
        let verifier = TableVerifier::new(&table, self.collection);

        let runs: Vec<PartitionRun> = std::thread::scope(|scope| {
            let handles: Vec<_> = self
                .partition_indexes()
                .into_iter()
                .map(|index| {
                    let table = table.clone();
                    let theta = &theta;
                    let verifier = &verifier;
                    scope.spawn(move || {
                        let stream = TokenStream::new(table);
                        let r = refine(query, self.collection, index, stream, k, theta, deadline);
                        let p =
                            postprocess(&r.candidates, r.lower, theta, verifier, workers, deadline);
                        let mut trace = r.stats.theta_trace;
                        for t in p.stats.theta_lb_trace {
                            if trace.last() != Some(&t) {
                                trace.push(t);
                            }
                        }
                        let stats = Stats {
                            query_cardinality: query.len(),
                            candidates: r.stats.candidates,
                            iub_pruned: r.stats.iub_pruned,
                            tuples_consumed: r.stats.tuples_consumed,
                            no_em: p.stats.no_em,
                            em_calls: p.stats.em_calls,
                            em_early_terminated: p.stats.em_early_terminated,
                            postproc_ub_pruned: p.stats.ub_pruned,
                            left_in_queue: p.stats.left_in_queue,
                            score_calls: p.stats.score_calls,
                            refine_ms: ms(r.stats.elapsed),
                            postproc_ms: ms(p.stats.elapsed),
                            total_ms: ms(r.stats.elapsed + p.stats.elapsed),
                            theta_lb_trace: trace,
                            theta_ub_trace: p.stats.theta_ub_trace,
                        };
                        let timed_out = r.stats.timed_out || p.stats.timed_out;
                        (p.entries, stats, timed_out)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("partition search panicked"))
                .collect()
        });

        let mut stats = Stats {
            query_cardinality: query.len(),
            ..Stats::default()
        };
        let mut merged = Vec::new();
        let mut exact = true;
        let mut partition_results = Vec::with_capacity(runs.len());
        let mut partition_stats = Vec::with_capacity(runs.len());
        for (entries, s, timed_out) in runs {
            stats.absorb(&s);
            exact &= !timed_out;
            merged.extend_from_slice(&entries);
            partition_results.push(entries);
            partition_stats.push(s);
        }
        if partition_stats.len() == 1 {
            stats.theta_lb_trace = partition_stats[0].theta_lb_trace.clone();
            stats.theta_ub_trace = partition_stats[0].theta_ub_trace.clone();
        }
        sort_entries(&mut merged);
        merged.truncate(k);
        stats.total_ms = ms(start.elapsed());
        SearchResult {
            too_few_results: merged.len() < k,
            entries: merged,
            stats,
            exact,
            partition_results,
            partition_stats,
        }
    }

    /// Exact matching of every candidate, optionally after upper-bound
    /// pruning. Serves as the reference result.
    pub fn baseline(
        &self,
        query: &QuerySet,
        provider: &dyn SimilarityProvider,
        with_iub: bool,
    ) -> SearchResult {
        let start = Instant::now();
        let deadline = self.deadline(start);
        let table = Arc::new(NeighborTable::build(
            query,
            provider,
            self.collection.dictionary(),
            self.params.alpha,
        ));
        let verifier = TableVerifier::new(&table, self.collection);
        let mut stats = Stats {
            query_cardinality: query.len(),
            ..Stats::default()
        };
        let ids: Vec<SetId> = if with_iub {
            let theta = ThetaCell::new(0.0);
            let r = refine(
                query,
                self.collection,
                &self.index,
                TokenStream::new(table.clone()),
                self.params.k,
                &theta,
                deadline,
            );
            stats.candidates = r.stats.candidates;
            stats.iub_pruned = r.stats.iub_pruned;
            stats.tuples_consumed = r.stats.tuples_consumed;
            stats.refine_ms = ms(r.stats.elapsed);
            r.candidates.iter().map(|c| c.set_id).collect()
        } else {
            let mut seen = vec![false; self.collection.len()];
            let mut ids = Vec::new();
            for t in table.tokens() {
                for &id in self.index.postings(t) {
                    if !std::mem::replace(&mut seen[id.index()], true) {
                        ids.push(id);
                    }
                }
            }
            ids.sort_unstable();
            stats.candidates = ids.len();
            ids
        };

        let verify_start = Instant::now();
        let mut exact = true;
        let mut entries = Vec::with_capacity(ids.len());
        for id in ids {
            if deadline.is_some_and(|d| Instant::now() >= d) {
                exact = false;
                break;
            }
            if let MatchOutcome::Exact { score, .. } = verifier.verify(id, None) {
                stats.em_calls += 1;
                entries.push((id, score));
            }
        }
        stats.postproc_ms = ms(verify_start.elapsed());
        sort_entries(&mut entries);
        entries.truncate(self.params.k);
        stats.total_ms = ms(start.elapsed());
        SearchResult {
            too_few_results: entries.len() < self.params.k,
            partition_results: vec![entries.clone()],
            partition_stats: vec![stats.clone()],
            entries,
            stats,
            exact,
        }
    }

    /// Top-k by plain intersection size, ties by set id.
    pub fn vanilla(&self, query: &QuerySet) -> Vec<(SetId, f64)> {
        let mut seen = vec![false; self.collection.len()];
        let mut entries = Vec::new();
        for &e in query.elements() {
            for &id in self.index.postings(e) {
                if !std::mem::replace(&mut seen[id.index()], true) {
                    let v = vanilla_overlap(query.elements(), self.collection.set(id).elements());
                    entries.push((id, v as f64));
                }
            }
        }
        sort_entries(&mut entries);
        entries.truncate(self.params.k);
        entries
    }
}

/// One-shot [`Engine::search`].
pub fn search(
    query: &QuerySet,
    collection: &Collection,
    provider: &dyn SimilarityProvider,
    params: &SearchParams,
) -> Result<SearchResult> {
    Ok(Engine::new(collection, params.clone())?.search(query, provider))
}

/// One-shot [`Engine::baseline`].
pub fn baseline_search(
    query: &QuerySet,
    collection: &Collection,
    provider: &dyn SimilarityProvider,
    params: &SearchParams,
    with_iub: bool,
) -> Result<SearchResult> {
    let mut params = params.clone();
    params.partitions = 1;
    Ok(Engine::new(collection, params)?.baseline(query, provider, with_iub))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::similarity::{ExactSimilarity, TableSimilarity};

    #[test]
    fn partition_is_total_and_deterministic() {
        let sets: Vec<Vec<String>> = (0..400).map(|i| vec![format!("t{i}")]).collect();
        let c = Collection::from_token_sets(sets);
        assert_eq!(
            partition(&c, 1, 9),
            vec![c.sets().iter().map(|s| s.id).collect::<Vec<_>>()]
        );
        let parts = partition(&c, 4, 7);
        assert_eq!(parts, partition(&c, 4, 7));
        let mut all: Vec<SetId> = parts.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all.len(), 400);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        // expectation 100 each; a loose band
        assert!(parts.iter().all(|p| (60..=140).contains(&p.len())));
    }

    #[test]
    fn too_few_results_returns_everything() {
        let c = Collection::from_token_sets([vec!["a", "b"], vec!["b", "c"], vec!["x"]]);
        let q = c.query(["a", "b"]);
        let params = SearchParams {
            k: 5,
            partitions: 1,
            workers: Some(1),
            ..SearchParams::default()
        };
        let r = search(&q, &c, &ExactSimilarity, &params).unwrap();
        assert!(r.too_few_results);
        assert_eq!(r.entries, vec![(SetId(0), 2.0), (SetId(1), 1.0)]);
        assert!(r.exact);
    }

    #[test]
    fn empty_candidates() {
        let c = Collection::from_token_sets([vec!["a"]]);
        let q = c.query(["zzz"]);
        let params = SearchParams::default();
        let r = baseline_search(&q, &c, &TableSimilarity::new(), &params, false).unwrap();
        assert!(r.entries.is_empty());
        let r = search(&q, &c, &TableSimilarity::new(), &params).unwrap();
        assert!(r.entries.is_empty());
    }
}
