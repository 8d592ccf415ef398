//! Domain types shared by every stage of the search.
//!
//! Element ids are dense and assigned in first-seen order while a collection
//! is ingested, so posting lists and matched-element sets can be flat arrays.
//! Query tokens that never occur in the collection get temporary ids above the
//! dictionary range for the lifetime of one query.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

/// Absolute tolerance for comparing scores across modules.
pub const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ElementId(pub u32);

impl ElementId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SetId(pub u32);

impl SetId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for SetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Bidirectional token <-> id map with per-id occurrence counts.
#[derive(Debug, Clone, Default)]
pub struct Dictionary {
    tokens: Vec<String>,
    ids: HashMap<String, ElementId>,
    counts: Vec<u32>,
}

impl Dictionary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id of `token`, assigning the next dense id if it is new.
    pub fn intern(&mut self, token: &str) -> ElementId {
        if let Some(&id) = self.ids.get(token) {
            return id;
        }
        let id = ElementId(self.tokens.len() as u32);
        self.tokens.push(token.to_owned());
        self.ids.insert(token.to_owned(), id);
        self.counts.push(0);
        id
    }

    pub fn get(&self, token: &str) -> Option<ElementId> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: ElementId) -> Option<&str> {
        self.tokens.get(id.index()).map(String::as_str)
    }

    /// Number of sets containing `id`.
    pub fn count(&self, id: ElementId) -> u32 {
        self.counts.get(id.index()).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn iter(&self) -> impl Iterator<Item = (ElementId, &str)> {
        self.tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (ElementId(i as u32), t.as_str()))
    }
}

/// A repository set: strictly ascending, non-empty element ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSet {
    pub id: SetId,
    elements: Vec<ElementId>,
}

impl CandidateSet {
    /// Sorts and deduplicates `elements`. Returns `None` for an empty set.
    pub fn new(id: SetId, mut elements: Vec<ElementId>) -> Option<Self> {
        elements.sort_unstable();
        elements.dedup();
        if elements.is_empty() {
            None
        } else {
            Some(Self { id, elements })
        }
    }

    pub fn elements(&self) -> &[ElementId] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, e: ElementId) -> bool {
        self.position(e).is_some()
    }

    /// Position of `e` within the sorted element list.
    pub fn position(&self, e: ElementId) -> Option<usize> {
        self.elements.binary_search(&e).ok()
    }
}

/// The repository: all sets plus the dictionary over their elements.
#[derive(Debug, Clone, Default)]
pub struct Collection {
    sets: Vec<CandidateSet>,
    dictionary: Dictionary,
}

impl Collection {
    /// Builds a collection from token lists. Duplicate tokens within a list
    /// collapse; empty lists are skipped, so set ids stay dense.
    pub fn from_token_sets<I, S, T>(sets: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: IntoIterator<Item = T>,
        T: AsRef<str>,
    {
        let mut collection = Collection::default();
        for tokens in sets {
            collection.push_tokens(tokens);
        }
        collection
    }

    /// Appends one set; returns its id, or `None` if it had no tokens.
    pub fn push_tokens<S, T>(&mut self, tokens: S) -> Option<SetId>
    where
        S: IntoIterator<Item = T>,
        T: AsRef<str>,
    {
        let ids: Vec<ElementId> = tokens
            .into_iter()
            .map(|t| self.dictionary.intern(t.as_ref()))
            .collect();
        let id = SetId(self.sets.len() as u32);
        let set = CandidateSet::new(id, ids)?;
        for e in set.elements() {
            self.dictionary.counts[e.index()] += 1;
        }
        self.sets.push(set);
        Some(id)
    }

    /// Rebuilds a collection from an already interned dictionary and id lists.
    pub fn from_parts(tokens: Vec<String>, sets: Vec<Vec<u32>>) -> Result<Self> {
        let mut dictionary = Dictionary::new();
        for (i, t) in tokens.iter().enumerate() {
            if dictionary.intern(t).index() != i {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("duplicate dictionary token `{t}`"),
                });
            }
        }
        let mut out = Collection {
            sets: Vec::with_capacity(sets.len()),
            dictionary,
        };
        for (i, raw) in sets.into_iter().enumerate() {
            if let Some(&bad) = raw.iter().find(|&&e| e as usize >= tokens.len()) {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("set {i} references unknown element id {bad}"),
                });
            }
            let elements = raw.into_iter().map(ElementId).collect();
            let set = CandidateSet::new(SetId(i as u32), elements).ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("set {i} is empty"),
            })?;
            for e in set.elements() {
                out.dictionary.counts[e.index()] += 1;
            }
            out.sets.push(set);
        }
        Ok(out)
    }

    pub fn sets(&self) -> &[CandidateSet] {
        &self.sets
    }

    pub fn set(&self, id: SetId) -> &CandidateSet {
        &self.sets[id.index()]
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dictionary
    }

    /// Resolves query tokens against the dictionary. Unknown tokens get
    /// temporary ids starting at `|D|`, in first-seen order.
    pub fn query<I, T>(&self, tokens: I) -> QuerySet
    where
        I: IntoIterator<Item = T>,
        T: AsRef<str>,
    {
        let mut next_temp = self.dictionary.len() as u32;
        let mut seen: HashMap<String, ElementId> = HashMap::new();
        let mut pairs = Vec::new();
        for t in tokens {
            let t = t.as_ref();
            if seen.contains_key(t) {
                continue;
            }
            let id = match self.dictionary.get(t) {
                Some(id) => id,
                None => {
                    let id = ElementId(next_temp);
                    next_temp += 1;
                    id
                }
            };
            seen.insert(t.to_owned(), id);
            pairs.push((id, t.to_owned()));
        }
        pairs.sort_unstable_by_key(|(id, _)| *id);
        let vocabulary = self.dictionary.len();
        let (elements, tokens) = pairs.into_iter().unzip();
        QuerySet {
            elements,
            tokens,
            vocabulary,
        }
    }
}

/// A resolved query: ascending ids with their surface strings alongside.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuerySet {
    elements: Vec<ElementId>,
    tokens: Vec<String>,
    vocabulary: usize,
}

impl QuerySet {
    pub fn elements(&self) -> &[ElementId] {
        &self.elements
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn position(&self, e: ElementId) -> Option<usize> {
        self.elements.binary_search(&e).ok()
    }

    /// True if the element at `pos` occurs in the collection dictionary.
    pub fn in_dictionary(&self, pos: usize) -> bool {
        self.elements[pos].index() < self.vocabulary
    }
}

/// Parameters of one top-k search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchParams {
    pub k: usize,
    pub alpha: f64,
    pub partitions: usize,
    pub timeout_seconds: Option<u64>,
    /// Concurrent exact matchings per partition; `None` uses available parallelism.
    pub workers: Option<usize>,
    /// Seed for the random partitioning of the repository.
    pub seed: u64,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            k: 10,
            alpha: 0.8,
            partitions: 10,
            timeout_seconds: Some(2500),
            workers: None,
            seed: 0,
        }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParams("k must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if self.partitions == 0 {
            return Err(Error::InvalidParams("partitions must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidParams("workers must be at least 1".into()));
        }
        if self.timeout_seconds == Some(0) {
            return Err(Error::InvalidParams("timeout must be positive".into()));
        }
        Ok(())
    }

    pub fn worker_count(&self) -> usize {
        self.workers.unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
    }
}

/// Thresholded similarity: `sim` if it reaches `alpha`, otherwise zero.
#[inline]
pub fn apply_threshold(sim: f64, alpha: f64) -> f64 {
    if sim >= alpha {
        sim
    } else {
        0.0
    }
}

/// `|Q ∩ C|` by id equality.
pub fn vanilla_overlap(query: &[ElementId], set: &[ElementId]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < query.len() && j < set.len() {
        match query[i].cmp(&set[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(v: &[u32]) -> Vec<ElementId> {
        v.iter().copied().map(ElementId).collect()
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(apply_threshold(0.85, 0.8), 0.85);
        assert_eq!(apply_threshold(0.79, 0.8), 0.0);
        assert_eq!(apply_threshold(1.0, 0.8), 1.0);
    }

    #[test]
    fn vanilla_examples() {
        assert_eq!(vanilla_overlap(&ids(&[1, 2, 3]), &ids(&[1, 2, 3])), 3);
        assert_eq!(vanilla_overlap(&ids(&[1, 2]), &ids(&[3, 4])), 0);
        assert_eq!(vanilla_overlap(&ids(&[1, 2, 3]), &ids(&[2, 3, 4])), 2);
    }

    #[test]
    fn dictionary_assigns_dense_first_seen_ids() {
        let c = Collection::from_token_sets([vec!["b", "a", "b"], vec!["c", "a"], vec![]]);
        assert_eq!(c.len(), 2);
        assert_eq!(c.dictionary().len(), 3);
        assert_eq!(c.dictionary().get("b"), Some(ElementId(0)));
        assert_eq!(c.dictionary().get("a"), Some(ElementId(1)));
        assert_eq!(c.dictionary().count(ElementId(1)), 2);
        assert_eq!(c.set(SetId(0)).elements(), &ids(&[0, 1])[..]);
    }

    #[test]
    fn query_keeps_out_of_vocabulary_tokens() {
        let c = Collection::from_token_sets([vec!["a", "b"]]);
        let q = c.query(["zz", "b", "b", "yy"]);
        assert_eq!(q.len(), 3);
        assert_eq!(q.elements(), &ids(&[1, 2, 3])[..]);
        assert_eq!(q.tokens(), &["b", "zz", "yy"]);
        assert!(q.in_dictionary(0));
        assert!(!q.in_dictionary(1));
    }

    #[test]
    fn params_validation() {
        assert!(SearchParams::default().validate().is_ok());
        let bad = SearchParams {
            alpha: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SearchParams {
            k: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn threshold_lands_in_zero_or_alpha_range(x in 0.0f64..=1.0, alpha in 0.01f64..=1.0) {
            let y = apply_threshold(x, alpha);
            prop_assert!(y == 0.0 || (alpha..=1.0).contains(&y));
        }

        #[test]
        fn vanilla_is_symmetric(a in proptest::collection::btree_set(0u32..40, 0..20),
                                b in proptest::collection::btree_set(0u32..40, 0..20)) {
            let a: Vec<_> = a.into_iter().map(ElementId).collect();
            let b: Vec<_> = b.into_iter().map(ElementId).collect();
            prop_assert_eq!(vanilla_overlap(&a, &b), vanilla_overlap(&b, &a));
            prop_assert_eq!(vanilla_overlap(&a, &a), a.len());
        }
    }
}
