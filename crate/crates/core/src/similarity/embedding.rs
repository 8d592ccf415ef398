use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use log::warn;

use super::SimilarityProvider;
use crate::error::{Error, Result};

/// Cosine of two vectors, clamped to `[0, 1]`.
pub fn cosine_sim(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() || u.is_empty() {
        return Err(Error::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(0.0, 1.0))
}

#[inline]
fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

#[inline]
fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

/// Cosine similarity over word embeddings.
///
/// Vectors are normalized on load. Tokens without a vector are only similar
/// to themselves.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingSimilarity {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingSimilarity {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vectors.contains_key(token)
    }

    /// Normalized vector of `token`.
    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Adds or replaces the vector of `token`.
    pub fn insert(&mut self, token: impl Into<String>, vector: &[f64]) -> Result<()> {
        if self.dim == 0 {
            self.dim = vector.len();
        }
        if vector.len() != self.dim || vector.is_empty() {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: vector.len(),
            });
        }
        let n = norm(vector);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroVector);
        }
        self.vectors
            .insert(token.into(), vector.iter().map(|x| x / n).collect());
        Ok(())
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(File::open(path)?)
    }

    /// Parses `token v1 ... vd` lines. A first line of exactly two integers
    /// is taken as a `count dim` header. Zero vectors are skipped.
    pub fn from_reader(reader: impl Read) -> Result<Self> {
        let mut out = EmbeddingSimilarity::default();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            let mut fields = line.split_whitespace();
            let Some(token) = fields.next() else {
                continue;
            };
            let rest: Vec<&str> = fields.collect();
            if i == 0 && rest.len() == 1 {
                if let (Ok(_), Ok(dim)) = (token.parse::<usize>(), rest[0].parse::<usize>()) {
                    out.dim = dim;
                    continue;
                }
            }
            let vector = rest
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    line: i + 1,
                    message: format!("bad vector component: {e}"),
                })?;
            match out.insert(token, &vector) {
                Ok(()) => {}
                Err(Error::ZeroVector) => {
                    warn!("line {}: zero vector for `{token}` skipped", i + 1)
                }
                Err(Error::DimensionMismatch { left, right }) => {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: format!("expected {left} components, found {right}"),
                    })
                }
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }
}

impl SimilarityProvider for EmbeddingSimilarity {
    fn name(&self) -> &'static str {
        "cosine"
    }

    fn similarity(&self, a: &str, b: &str) -> f64 {
        if a == b {
            return 1.0;
        }
        match (self.vectors.get(a), self.vectors.get(b)) {
            (Some(u), Some(v)) => dot(u, v).clamp(0.0, 1.0),
            _ => 0.0,
        }
    }
}
