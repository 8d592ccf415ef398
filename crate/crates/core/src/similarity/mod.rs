//! Element similarity providers and the similarity-ordered token stream.
//!
//! A provider is any symmetric, deterministic function into `[0, 1]` that
//! returns 1 for identical surface strings. The stream merges, per query
//! element, the dictionary entries at or above the threshold into a single
//! sequence of non-increasing similarity.

mod embedding;
mod qgram;
mod stream;
mod table;

use std::path::PathBuf;

pub use embedding::{cosine_sim, EmbeddingSimilarity};
pub use qgram::{qgram_jaccard, qgrams, QGramJaccard};
pub use stream::{NeighborTable, StreamTuple, TokenStream};
pub use table::TableSimilarity;

use crate::error::{Error, Result};
use crate::types::{Dictionary, ElementId};

/// Dictionary entries are scored in chunks of this size.
pub const NEIGHBOR_BATCH: usize = 100;

pub trait SimilarityProvider: Send + Sync {
    /// Registered name of the provider (`"cosine"`, `"qgram-jaccard"`, ...).
    fn name(&self) -> &'static str;

    /// Similarity of two surface strings, in `[0, 1]`.
    fn similarity(&self, a: &str, b: &str) -> f64;
}

/// Identity only: 1 for equal strings, 0 otherwise. Reduces semantic overlap
/// to vanilla overlap.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactSimilarity;

impl SimilarityProvider for ExactSimilarity {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn similarity(&self, a: &str, b: &str) -> f64 {
        if a == b {
            1.0
        } else {
            0.0
        }
    }
}

/// How to construct a provider; persisted alongside an index.
#[derive(Debug, Clone, PartialEq)]
pub enum ProviderConfig {
    Exact,
    Cosine { embeddings: PathBuf },
    QGramJaccard { q: usize },
    Table { path: PathBuf },
}

impl ProviderConfig {
    pub const NAMES: [&'static str; 4] = ["cosine", "qgram-jaccard", "exact", "table"];

    pub fn name(&self) -> &'static str {
        match self {
            ProviderConfig::Exact => "exact",
            ProviderConfig::Cosine { .. } => "cosine",
            ProviderConfig::QGramJaccard { .. } => "qgram-jaccard",
            ProviderConfig::Table { .. } => "table",
        }
    }

    /// Resolves a provider name plus its optional resource into a config.
    pub fn from_name(name: &str, resource: Option<PathBuf>, q: usize) -> Result<Self> {
        let need = |what: &str| {
            resource
                .clone()
                .ok_or_else(|| Error::InvalidParams(format!("provider `{name}` needs {what}")))
        };
        match name {
            "exact" => Ok(ProviderConfig::Exact),
            "cosine" => Ok(ProviderConfig::Cosine {
                embeddings: need("an embedding file")?,
            }),
            "qgram-jaccard" => {
                if q == 0 {
                    return Err(Error::InvalidParams("q must be at least 1".into()));
                }
                Ok(ProviderConfig::QGramJaccard { q })
            }
            "table" => Ok(ProviderConfig::Table {
                path: need("a similarity table file")?,
            }),
            other => Err(Error::UnknownProvider(other.to_owned())),
        }
    }

    pub fn build(&self) -> Result<Box<dyn SimilarityProvider>> {
        Ok(match self {
            ProviderConfig::Exact => Box::new(ExactSimilarity),
            ProviderConfig::Cosine { embeddings } => {
                Box::new(EmbeddingSimilarity::from_path(embeddings)?)
            }
            ProviderConfig::QGramJaccard { q } => Box::new(QGramJaccard::new(*q)),
            ProviderConfig::Table { path } => Box::new(TableSimilarity::from_path(path)?),
        })
    }
}

/// All dictionary entries with similarity at least `alpha` to `token`,
/// descending by similarity, ties by ascending id. The dictionary entry equal
/// to `token` (if any) is reported first, with similarity exactly 1.
///
/// Exact replacement for an approximate threshold index: every entry is
/// scored, one batch at a time.
pub fn brute_force_neighbors(
    token: &str,
    provider: &dyn SimilarityProvider,
    dictionary: &Dictionary,
    alpha: f64,
) -> Vec<(ElementId, f64)> {
    let itself = dictionary.get(token);
    let mut out = Vec::new();
    for (b, batch) in dictionary.tokens().chunks(NEIGHBOR_BATCH).enumerate() {
        let base = b * NEIGHBOR_BATCH;
        for (offset, candidate) in batch.iter().enumerate() {
            let id = ElementId((base + offset) as u32);
            let s = if Some(id) == itself {
                1.0
            } else {
                provider.similarity(token, candidate).clamp(0.0, 1.0)
            };
            if s >= alpha {
                out.push((id, s));
            }
        }
    }
    out.sort_unstable_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| (Some(b.0) == itself).cmp(&(Some(a.0) == itself)))
            .then(a.0.cmp(&b.0))
    });
    out
}
