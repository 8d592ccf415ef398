use std::collections::BTreeSet;

use ordered_float::OrderedFloat;

use crate::error::{Error, Result};
use crate::types::{SetId, EPS};

type Entry = (OrderedFloat<f64>, SetId);

/// Candidates grouped by their remaining count `m`, each bucket ordered by
/// ascending base sum `S`. A candidate's bound is `S + m * s` for the current
/// stream similarity `s`, so one scan from the low end of every bucket finds
/// all candidates whose bound has fallen below a threshold.
#[derive(Debug, Clone, Default)]
pub struct BucketIndex {
    buckets: Vec<BTreeSet<Entry>>,
    len: usize,
}

impl BucketIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn insert(&mut self, id: SetId, m: usize, base: f64) {
        if self.buckets.len() <= m {
            self.buckets.resize_with(m + 1, BTreeSet::new);
        }
        if self.buckets[m].insert((OrderedFloat(base), id)) {
            self.len += 1;
        }
    }

    pub fn remove(&mut self, id: SetId, m: usize, base: f64) -> Result<()> {
        let removed = self
            .buckets
            .get_mut(m)
            .is_some_and(|b| b.remove(&(OrderedFloat(base), id)));
        if !removed {
            return Err(Error::MissingEntry {
                set_id: id,
                bucket: m,
            });
        }
        self.len -= 1;
        Ok(())
    }

    /// Moves an entry from `(old_m, old_base)` to `(new_m, new_base)`.
    pub fn relocate(
        &mut self,
        id: SetId,
        old_m: usize,
        old_base: f64,
        new_m: usize,
        new_base: f64,
    ) -> Result<()> {
        self.remove(id, old_m, old_base)?;
        self.insert(id, new_m, new_base);
        Ok(())
    }

    /// Removes and returns every entry with `S + m * s < theta - EPS`.
    ///
    /// Each bucket is scanned from its smallest `S` and the scan stops at the
    /// first entry that survives. Entries for which `keep` holds are never
    /// removed and do not stop the scan.
    pub fn prune(&mut self, s: f64, theta: f64, mut keep: impl FnMut(SetId) -> bool) -> Vec<SetId> {
        let mut out = Vec::new();
        for (m, bucket) in self.buckets.iter_mut().enumerate() {
            let limit = theta - EPS - m as f64 * s;
            let mut doomed = Vec::new();
            for &(base, id) in bucket.iter() {
                if base.0 >= limit {
                    break;
                }
                if !keep(id) {
                    doomed.push((base, id));
                }
            }
            for e in doomed {
                bucket.remove(&e);
                out.push(e.1);
            }
        }
        self.len -= out.len();
        out
    }

    /// All entries as `(m, S, id)`, buckets ascending, each in `S` order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, f64, SetId)> + '_ {
        self.buckets
            .iter()
            .enumerate()
            .flat_map(|(m, b)| b.iter().map(move |&(s, id)| (m, s.0, id)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prune_scans_from_the_low_end() {
        let mut b = BucketIndex::new();
        b.insert(SetId(0), 2, 0.1);
        b.insert(SetId(1), 2, 0.5);
        b.insert(SetId(2), 2, 1.2);
        // 1.4 - 2 * 0.6 = 0.2
        assert_eq!(b.prune(0.6, 1.4, |_| false), vec![SetId(0)]);
        assert_eq!(b.len(), 2);
    }

    #[test]
    fn zero_threshold_prunes_nothing() {
        let mut b = BucketIndex::new();
        b.insert(SetId(0), 0, 0.0);
        b.insert(SetId(1), 3, 0.4);
        assert!(b.prune(0.9, 0.0, |_| false).is_empty());
    }

    #[test]
    fn pruned_set_grows_as_similarity_drops() {
        let build = || {
            let mut b = BucketIndex::new();
            for (i, s) in [0.2, 0.6, 0.9, 1.3].into_iter().enumerate() {
                b.insert(SetId(i as u32), 1, s);
            }
            b
        };
        let first = build().prune(0.8, 1.6, |_| false);
        let second = build().prune(0.5, 1.6, |_| false);
        assert!(first.iter().all(|id| second.contains(id)));
        assert!(second.len() > first.len());
    }

    #[test]
    fn relocate_keeps_order() {
        let mut b = BucketIndex::new();
        b.insert(SetId(7), 3, 1.0);
        b.relocate(SetId(7), 3, 1.0, 2, 1.9).unwrap();
        assert_eq!(b.entries().collect::<Vec<_>>(), vec![(2, 1.9, SetId(7))]);

        for (i, s) in [0.5, 1.5, 2.5].into_iter().enumerate() {
            b.insert(SetId(i as u32), 2, s);
        }
        b.relocate(SetId(0), 2, 0.5, 2, 2.0).unwrap();
        let order: Vec<f64> = b.entries().map(|e| e.1).collect();
        assert!(order.windows(2).all(|w| w[0] <= w[1]));
        assert!(matches!(
            b.relocate(SetId(9), 1, 0.0, 0, 0.0),
            Err(Error::MissingEntry { .. })
        ));
    }

    #[test]
    fn kept_entries_do_not_stop_the_scan() {
        let mut b = BucketIndex::new();
        b.insert(SetId(0), 0, 0.1);
        b.insert(SetId(1), 0, 0.2);
        assert_eq!(b.prune(0.0, 1.0, |id| id == SetId(0)), vec![SetId(1)]);
    }
}
