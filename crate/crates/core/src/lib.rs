//! Exact top-k set search under semantic overlap.
//!
//! The semantic overlap of two sets is the weight of a maximum one-to-one
//! matching between their elements, where an edge weighs the similarity of
//! its endpoints if that reaches a threshold `alpha` and zero otherwise.
//!
//! A search streams `(query element, token, similarity)` tuples in
//! decreasing similarity, keeps cheap lower and upper bounds for every set
//! the stream reaches, and prunes sets that cannot enter the top k. The
//! survivors are verified with the Hungarian method, most promising first,
//! skipping or aborting matchings whenever the bounds already decide.
//!
//! ```
//! use semoverlap::{search, Collection, SearchParams, TableSimilarity};
//!
//! let collection = Collection::from_token_sets([
//!     vec!["LA", "Blain", "Appleton"],
//!     vec!["LA", "Blain", "NewYorkCity"],
//! ]);
//! let sim = TableSimilarity::new()
//!     .with("Blaine", "Blain", 0.99)
//!     .with("BigApple", "NewYorkCity", 0.9);
//! let query = collection.query(["LA", "Blaine", "BigApple"]);
//! let params = SearchParams { k: 1, alpha: 0.7, partitions: 1, ..SearchParams::default() };
//! let result = search(&query, &collection, &sim, &params).unwrap();
//! assert_eq!(result.entries[0].0 .0, 1);
//! assert!((result.entries[0].1 - 2.89).abs() < 1e-9);
//! ```

pub mod engine;
pub mod error;
pub mod index;
pub mod matching;
pub mod postproc;
pub mod refinement;
pub mod similarity;
pub mod synth;
pub mod topk;
pub mod types;

pub use engine::{baseline_search, partition, search, Engine, SearchResult, Stats};
pub use error::{Error, Result};
pub use index::InvertedIndex;
pub use matching::{
    exact_so, greedy_matching, hungarian_so, lower_bound, max_edge, weight_matrix, MatchOutcome,
    WeightMatrix,
};
pub use postproc::{postprocess, PostResult, PostStats, TableVerifier, Verifier};
pub use refinement::{refine, BucketIndex, Candidate, CandidateState, RefineStats, Refined};
pub use similarity::{
    brute_force_neighbors, cosine_sim, qgram_jaccard, EmbeddingSimilarity, ExactSimilarity,
    NeighborTable, ProviderConfig, QGramJaccard, SimilarityProvider, StreamTuple, TableSimilarity,
    TokenStream,
};
pub use topk::{ThetaCell, TopKList};
pub use types::{
    apply_threshold, vanilla_overlap, CandidateSet, Collection, Dictionary, ElementId, QuerySet,
    SearchParams, SetId, EPS,
};
