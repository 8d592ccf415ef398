//! Inverted index from elements to the sets containing them.

use crate::types::{Collection, ElementId, SetId};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InvertedIndex {
    postings: Vec<Vec<SetId>>,
}

impl InvertedIndex {
    /// Indexes every set of the collection in one pass.
    pub fn build(collection: &Collection) -> Self {
        Self::build_subset(collection, (0..collection.len() as u32).map(SetId))
    }

    /// Indexes only the given sets. Ids must be ascending for the postings to
    /// come out sorted; they are re-sorted otherwise.
    pub fn build_subset(collection: &Collection, ids: impl IntoIterator<Item = SetId>) -> Self {
        let mut postings: Vec<Vec<SetId>> = vec![Vec::new(); collection.dictionary().len()];
        let mut sorted = true;
        for id in ids {
            for e in collection.set(id).elements() {
                let list = &mut postings[e.index()];
                if list.last().is_some_and(|&last| last >= id) {
                    sorted = false;
                }
                list.push(id);
            }
        }
        if !sorted {
            for list in &mut postings {
                list.sort_unstable();
                list.dedup();
            }
        }
        while postings.last().is_some_and(Vec::is_empty) {
            postings.pop();
        }
        Self { postings }
    }

    /// Restores an index from stored posting lists, one per element id.
    pub fn from_postings(mut postings: Vec<Vec<SetId>>) -> Self {
        for list in &mut postings {
            list.sort_unstable();
            list.dedup();
        }
        while postings.last().is_some_and(Vec::is_empty) {
            postings.pop();
        }
        Self { postings }
    }

    /// All posting lists indexed by element id.
    pub fn lists(&self) -> &[Vec<SetId>] {
        &self.postings
    }

    /// Ascending ids of the sets containing `t`; empty for unknown ids.
    pub fn postings(&self, t: ElementId) -> &[SetId] {
        self.postings.get(t.index()).map_or(&[], Vec::as_slice)
    }

    /// Sum of all posting list lengths.
    pub fn total_postings(&self) -> usize {
        self.postings.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.postings.iter().all(Vec::is_empty)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_example() {
        // C_0 = {1,2}, C_1 = {2,3} over element ids 0..=3
        let c = Collection::from_parts(
            vec!["e0".into(), "e1".into(), "e2".into(), "e3".into()],
            vec![vec![1, 2], vec![2, 3]],
        )
        .unwrap();
        let idx = InvertedIndex::build(&c);
        assert_eq!(idx.postings(ElementId(1)), &[SetId(0)]);
        assert_eq!(idx.postings(ElementId(2)), &[SetId(0), SetId(1)]);
        assert_eq!(idx.postings(ElementId(3)), &[SetId(1)]);
        assert!(idx.postings(ElementId(0)).is_empty());
        assert!(idx.postings(ElementId(99)).is_empty());
    }

    #[test]
    fn empty_collection() {
        let idx = InvertedIndex::build(&Collection::default());
        assert!(idx.is_empty());
        assert_eq!(idx.total_postings(), 0);
    }

    #[test]
    fn subset_in_any_order_is_sorted() {
        let c = Collection::from_token_sets([vec!["a"], vec!["a", "b"], vec!["a"]]);
        let idx = InvertedIndex::build_subset(&c, [SetId(2), SetId(0)]);
        assert_eq!(idx.postings(ElementId(0)), &[SetId(0), SetId(2)]);
        assert!(idx.postings(ElementId(1)).is_empty());
    }
}
