//! Bounded top-k list and the shared monotone threshold cell.

use std::cmp::Ordering;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use crate::types::SetId;

/// Up to `k` entries ordered by score descending, then set id ascending.
/// Each set appears at most once and keeps its best score.
#[derive(Debug, Clone, PartialEq)]
pub struct TopKList {
    k: usize,
    entries: Vec<(SetId, f64)>,
}

fn rank(a: &(SetId, f64), b: &(SetId, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

impl TopKList {
    pub fn new(k: usize) -> Self {
        assert!(k >= 1, "k must be positive");
        Self {
            k,
            entries: Vec::with_capacity(k + 1),
        }
    }

    pub fn capacity(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.k
    }

    /// k-th score, or 0 while fewer than `k` entries are held.
    pub fn bottom(&self) -> f64 {
        if self.is_full() {
            self.entries[self.k - 1].1
        } else {
            0.0
        }
    }

    pub fn contains(&self, id: SetId) -> bool {
        self.entries.iter().any(|e| e.0 == id)
    }

    pub fn score_of(&self, id: SetId) -> Option<f64> {
        self.entries.iter().find(|e| e.0 == id).map(|e| e.1)
    }

    pub fn entries(&self) -> &[(SetId, f64)] {
        &self.entries
    }

    /// Offers `score` for `id`. Returns true if the list changed.
    pub fn update(&mut self, id: SetId, score: f64) -> bool {
        if let Some(pos) = self.entries.iter().position(|e| e.0 == id) {
            if score <= self.entries[pos].1 {
                return false;
            }
            self.entries[pos].1 = score;
        } else if self.is_full() {
            let last = self.entries[self.k - 1];
            if rank(&(id, score), &last) != Ordering::Less {
                return false;
            }
            self.entries[self.k - 1] = (id, score);
        } else {
            self.entries.push((id, score));
        }
        self.entries.sort_by(rank);
        true
    }

    pub fn into_entries(self) -> Vec<(SetId, f64)> {
        self.entries
    }
}

/// A non-decreasing `f64` shared between threads.
#[derive(Debug, Default)]
pub struct ThetaCell(AtomicU64);

impl ThetaCell {
    pub fn new(v: f64) -> Self {
        Self(AtomicU64::new(v.to_bits()))
    }

    pub fn get(&self) -> f64 {
        f64::from_bits(self.0.load(AtomicOrdering::Acquire))
    }

    /// Raises the value to `v` if larger; returns the value after the call.
    pub fn raise(&self, v: f64) -> f64 {
        let prev = self
            .0
            .fetch_update(AtomicOrdering::AcqRel, AtomicOrdering::Acquire, |cur| {
                (v > f64::from_bits(cur)).then_some(v.to_bits())
            });
        match prev {
            Ok(_) => v,
            Err(cur) => f64::from_bits(cur),
        }
    }
}
