use std::collections::HashSet;

use super::SimilarityProvider;

/// Distinct character q-grams of `s`, without boundary padding. A non-empty
/// string shorter than `q` yields itself as its only gram.
pub fn qgrams(s: &str, q: usize) -> HashSet<&str> {
    let q = q.max(1);
    let bounds: Vec<usize> = s
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(s.len()))
        .collect();
    let chars = bounds.len() - 1;
    if chars == 0 {
        return HashSet::new();
    }
    if chars < q {
        return HashSet::from([s]);
    }
    (0..=chars - q)
        .map(|i| &s[bounds[i]..bounds[i + q]])
        .collect()
}

/// Jaccard similarity of the distinct q-gram sets of `a` and `b`.
pub fn qgram_jaccard(a: &str, b: &str, q: usize) -> f64 {
    if a == b {
        return 1.0;
    }
    let ga = qgrams(a, q);
    let gb = qgrams(b, q);
    let inter = ga.intersection(&gb).count();
    let union = ga.len() + gb.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Character-level fuzzy similarity: Jaccard over q-grams.
#[derive(Debug, Clone, Copy)]
pub struct QGramJaccard {
    q: usize,
}

impl QGramJaccard {
    pub fn new(q: usize) -> Self {
        Self { q: q.max(1) }
    }

    pub fn q(&self) -> usize {
        self.q
    }
}

impl Default for QGramJaccard {
    fn default() -> Self {
        Self::new(3)
    }
}

impl SimilarityProvider for QGramJaccard {
    fn name(&self) -> &'static str {
        "qgram-jaccard"
    }

    fn similarity(&self, a: &str, b: &str) -> f64 {
        qgram_jaccard(a, b, self.q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn jaccard_examples() {
        // {Bla, lai, ain, ine} vs {Bla, lai, ain}
        assert_eq!(qgram_jaccard("Blaine", "Blain", 3), 0.75);
        assert_eq!(qgram_jaccard("abc", "abc", 3), 1.0);
        assert_eq!(qgram_jaccard("abc", "xyz", 3), 0.0);
    }

    #[test]
    fn short_strings_are_one_gram() {
        assert_eq!(qgrams("ab", 3), HashSet::from(["ab"]));
        assert!(qgrams("", 3).is_empty());
        assert_eq!(qgram_jaccard("ab", "abc", 3), 0.0);
        assert_eq!(qgrams("héllo", 4).len(), 2);
    }

    proptest! {
        #[test]
        fn symmetric_bounded_reflexive(a in "[a-c]{0,7}", b in "[a-c]{0,7}", q in 1usize..4) {
            let s = qgram_jaccard(&a, &b, q);
            prop_assert_eq!(s, qgram_jaccard(&b, &a, q));
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert_eq!(qgram_jaccard(&a, &a, q), 1.0);
        }
    }
}
