//! Second phase: verify the refinement survivors.
//!
//! The k candidates with the largest upper bounds form `L_ub`. A member is
//! accepted without matching when its lower bound reaches the k-th largest
//! upper bound, otherwise it is matched exactly, highest upper bound first,
//! and the matching aborts as soon as it cannot beat the running k-th lower
//! bound. Matched members whose score drops below the next queued upper bound
//! leave `L_ub` and go back to the queue.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Receiver, Sender};
use ordered_float::OrderedFloat;

use crate::matching::{hungarian_so, MatchOutcome, WeightMatrix};
use crate::refinement::Candidate;
use crate::similarity::NeighborTable;
use crate::topk::{ThetaCell, TopKList};
use crate::types::{Collection, SetId};

/// Slack under which a lower and an upper bound count as the same score.
const SAME_SCORE: f64 = 1e-12;

/// Exact matching of one candidate against the query.
pub trait Verifier: Sync {
    /// Matches the query against set `id`. With a probe, the run may abort
    /// once its label sum drops below the probed value.
    fn verify(&self, id: SetId, probe: Option<&dyn Fn() -> f64>) -> MatchOutcome;
}

/// Builds weight matrices from a query's neighbour table.
pub struct TableVerifier<'a> {
    table: &'a NeighborTable,
    collection: &'a Collection,
}

impl<'a> TableVerifier<'a> {
    pub fn new(table: &'a NeighborTable, collection: &'a Collection) -> Self {
        Self { table, collection }
    }

    pub fn matrix(&self, id: SetId) -> WeightMatrix {
        let set = self.collection.set(id);
        WeightMatrix::from_fn(self.table.query().len(), set.len(), |i, j| {
            self.table.similarity(i, set.elements()[j])
        })
    }
}

impl Verifier for TableVerifier<'_> {
    fn verify(&self, id: SetId, probe: Option<&dyn Fn() -> f64>) -> MatchOutcome {
        hungarian_so(&self.matrix(id), probe)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PostStats {
    /// Accepted without exact matching.
    pub no_em: usize,
    /// Exact matchings that ran to completion.
    pub em_calls: usize,
    /// Exact matchings aborted by the label-sum bound.
    pub em_early_terminated: usize,
    /// Dropped because their upper bound fell to the k-th lower bound.
    pub ub_pruned: usize,
    /// Never examined before termination.
    pub left_in_queue: usize,
    /// Unthresholded matchings run afterwards to report the score of
    /// members accepted without matching.
    pub score_calls: usize,
    pub theta_lb_trace: Vec<f64>,
    pub theta_ub_trace: Vec<f64>,
    pub timed_out: bool,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct PostResult {
    /// Final list sorted by score descending, then set id ascending.
    pub entries: Vec<(SetId, f64)>,
    pub lower: TopKList,
    pub stats: PostStats,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Status {
    Pending,
    NoEm,
    Exact(f64),
    Early,
    Pruned,
}

#[derive(Debug, Clone)]
struct Entry {
    id: SetId,
    lower: f64,
    upper: f64,
    status: Status,
    member: bool,
    in_flight: bool,
}

type QueueKey = (OrderedFloat<f64>, Reverse<SetId>, usize);

enum Pool<'s> {
    Inline(VecDeque<(usize, SetId, bool)>),
    Threads {
        jobs: Option<Sender<(usize, SetId, bool)>>,
        results: Receiver<(usize, MatchOutcome)>,
        _marker: std::marker::PhantomData<&'s ()>,
    },
}

struct Coordinator<'a> {
    k: usize,
    entries: Vec<Entry>,
    members: Vec<usize>,
    queue: BinaryHeap<QueueKey>,
    lower: TopKList,
    theta: &'a ThetaCell,
    theta_ub: f64,
    stats: PostStats,
}

impl Coordinator<'_> {
    fn theta_lb(&self) -> f64 {
        self.lower.bottom().max(self.theta.get())
    }

    fn trace_lb(&mut self) {
        let t = self.theta_lb();
        if self.stats.theta_lb_trace.last() != Some(&t) {
            self.stats.theta_lb_trace.push(t);
        }
    }

    fn offer_lower(&mut self, id: SetId, score: f64) {
        if self.lower.update(id, score) {
            self.theta.raise(self.lower.bottom());
        }
        self.trace_lb();
    }

    fn dead(&self, i: usize) -> bool {
        let e = &self.entries[i];
        e.upper <= self.theta_lb() && !self.lower.contains(e.id)
    }

    fn push(&mut self, i: usize) {
        let e = &self.entries[i];
        self.queue.push((OrderedFloat(e.upper), Reverse(e.id), i));
    }

    /// Drops stale and dead queue heads; returns the best live one.
    fn clean_top(&mut self) -> Option<usize> {
        while let Some(&(ub, _, i)) = self.queue.peek() {
            let e = &self.entries[i];
            let stale =
                e.member || e.upper != ub.0 || matches!(e.status, Status::Early | Status::Pruned);
            if stale {
                self.queue.pop();
                continue;
            }
            if self.dead(i) {
                self.queue.pop();
                if self.entries[i].status == Status::Pending {
                    self.entries[i].status = Status::Pruned;
                }
                continue;
            }
            return Some(i);
        }
        None
    }

    fn refill(&mut self) {
        while self.members.len() < self.k {
            let Some(i) = self.clean_top() else { break };
            self.queue.pop();
            self.entries[i].member = true;
            self.members.push(i);
        }
    }

    fn remove_member(&mut self, i: usize) {
        self.entries[i].member = false;
        self.members.retain(|&m| m != i);
    }

    fn lazy_prune(&mut self) {
        let doomed: Vec<usize> = self
            .members
            .iter()
            .copied()
            .filter(|&i| {
                let e = &self.entries[i];
                e.status == Status::Pending && !e.in_flight && self.dead(i)
            })
            .collect();
        for i in doomed {
            self.entries[i].status = Status::Pruned;
            self.remove_member(i);
        }
    }

    fn update_theta_ub(&mut self) {
        if self.members.len() == self.k {
            let kth = self
                .members
                .iter()
                .map(|&i| self.entries[i].upper)
                .fold(f64::INFINITY, f64::min);
            if kth < self.theta_ub {
                self.theta_ub = kth;
                self.stats.theta_ub_trace.push(kth);
            }
        }
    }

    /// Unchecked members by upper bound descending, set id ascending.
    fn unchecked(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .members
            .iter()
            .copied()
            .filter(|&i| self.entries[i].status == Status::Pending && !self.entries[i].in_flight)
            .collect();
        out.sort_by(|&a, &b| {
            let (ea, eb) = (&self.entries[a], &self.entries[b]);
            eb.upper.total_cmp(&ea.upper).then(ea.id.cmp(&eb.id))
        });
        out
    }

    fn accept_without_matching(&mut self) {
        for i in self.unchecked() {
            let e = &self.entries[i];
            if e.lower >= self.theta_ub || e.upper - e.lower <= SAME_SCORE {
                self.entries[i].status = Status::NoEm;
            }
        }
    }

    fn apply(&mut self, i: usize, outcome: MatchOutcome) {
        self.entries[i].in_flight = false;
        match outcome {
            MatchOutcome::Exact { score, .. } => {
                let id = self.entries[i].id;
                let e = &mut self.entries[i];
                e.status = Status::Exact(score);
                e.lower = score;
                e.upper = score;
                self.offer_lower(id, score);
                let demote = self
                    .clean_top()
                    .is_some_and(|top| self.entries[top].upper > score);
                if demote {
                    self.remove_member(i);
                    if !self.dead(i) {
                        self.push(i);
                    }
                }
            }
            MatchOutcome::EarlyTerminated { bound } => {
                let e = &mut self.entries[i];
                e.status = Status::Early;
                e.upper = e.upper.min(bound);
                self.remove_member(i);
            }
        }
    }
}

/// Runs the verification phase.
///
/// `lower` carries the k best lower bounds from refinement and `theta` is the
/// threshold shared with other partitions. Up to `workers` matchings run
/// concurrently; with one worker everything runs on the calling thread.
pub fn postprocess(
    candidates: &[Candidate],
    lower: TopKList,
    theta: &ThetaCell,
    verifier: &dyn Verifier,
    workers: usize,
    deadline: Option<Instant>,
) -> PostResult {
    let start = Instant::now();
    let k = lower.capacity();
    let mut c = Coordinator {
        k,
        entries: candidates
            .iter()
            .map(|cand| Entry {
                id: cand.set_id,
                lower: cand.lower,
                upper: cand.upper,
                status: Status::Pending,
                member: false,
                in_flight: false,
            })
            .collect(),
        members: Vec::with_capacity(k),
        queue: BinaryHeap::with_capacity(candidates.len()),
        lower,
        theta,
        theta_ub: f64::INFINITY,
        stats: PostStats::default(),
    };
    c.trace_lb();
    for i in 0..c.entries.len() {
        c.push(i);
    }

    let workers = workers.max(1);
    std::thread::scope(|scope| {
        let mut pool = if workers == 1 {
            Pool::Inline(VecDeque::new())
        } else {
            let (job_tx, job_rx) = unbounded::<(usize, SetId, bool)>();
            let (res_tx, res_rx) = unbounded();
            for _ in 0..workers {
                let job_rx = job_rx.clone();
                let res_tx = res_tx.clone();
                scope.spawn(move || {
                    let probe = || theta.get();
                    for (i, id, use_probe) in job_rx {
                        let p: Option<&dyn Fn() -> f64> =
                            if use_probe { Some(&probe) } else { None };
                        if res_tx.send((i, verifier.verify(id, p))).is_err() {
                            break;
                        }
                    }
                });
            }
            Pool::Threads {
                jobs: Some(job_tx),
                results: res_rx,
                _marker: std::marker::PhantomData,
            }
        };
        let mut in_flight = 0usize;
        loop {
            if deadline.is_some_and(|d| Instant::now() >= d) {
                c.stats.timed_out = true;
                break;
            }
            c.lazy_prune();
            c.refill();
            c.update_theta_ub();
            c.accept_without_matching();
            for i in c.unchecked() {
                if in_flight >= workers {
                    break;
                }
                let id = c.entries[i].id;
                let use_probe = !c.lower.contains(id);
                c.entries[i].in_flight = true;
                in_flight += 1;
                match &mut pool {
                    Pool::Inline(q) => q.push_back((i, id, use_probe)),
                    Pool::Threads { jobs, .. } => jobs
                        .as_ref()
                        .expect("job channel open")
                        .send((i, id, use_probe))
                        .expect("workers alive"),
                }
            }
            if in_flight == 0 {
                break;
            }
            let (i, outcome) = match &mut pool {
                Pool::Inline(q) => {
                    let (i, id, use_probe) = q.pop_front().expect("queued job");
                    let probe = || theta.get();
                    let p: Option<&dyn Fn() -> f64> = if use_probe { Some(&probe) } else { None };
                    (i, verifier.verify(id, p))
                }
                Pool::Threads { results, .. } => results.recv().expect("workers alive"),
            };
            in_flight -= 1;
            c.apply(i, outcome);
        }
        if let Pool::Threads { jobs, .. } = &mut pool {
            jobs.take();
        }
    });

    let mut entries = Vec::with_capacity(c.members.len());
    for &i in &c.members.clone() {
        let e = c.entries[i].clone();
        let score = match e.status {
            Status::Exact(s) => s,
            Status::NoEm if e.upper - e.lower > SAME_SCORE && !c.stats.timed_out => {
                c.stats.score_calls += 1;
                verifier
                    .verify(e.id, None)
                    .score()
                    .expect("no threshold, no early termination")
            }
            _ => e.lower,
        };
        entries.push((e.id, score));
    }
    for &(id, score) in &entries {
        c.offer_lower(id, score);
    }
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    for e in &c.entries {
        match e.status {
            Status::Pending => c.stats.left_in_queue += 1,
            Status::NoEm => c.stats.no_em += 1,
            Status::Exact(_) => c.stats.em_calls += 1,
            Status::Early => c.stats.em_early_terminated += 1,
            Status::Pruned => c.stats.ub_pruned += 1,
        }
    }
    c.stats.elapsed = start.elapsed();
    PostResult {
        entries,
        lower: c.lower,
        stats: c.stats,
    }
}
