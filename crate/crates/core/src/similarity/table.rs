use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use super::SimilarityProvider;
use crate::error::{Error, Result};

/// Explicit similarity table: listed pairs get their value (both directions),
/// identical strings get 1, everything else 0.
#[derive(Debug, Clone, Default)]
pub struct TableSimilarity {
    pairs: HashMap<String, HashMap<String, f64>>,
}

impl TableSimilarity {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, a: &str, b: &str, sim: f64) {
        let sim = sim.clamp(0.0, 1.0);
        self.pairs
            .entry(a.to_owned())
            .or_default()
            .insert(b.to_owned(), sim);
        self.pairs
            .entry(b.to_owned())
            .or_default()
            .insert(a.to_owned(), sim);
    }

    pub fn with(mut self, a: &str, b: &str, sim: f64) -> Self {
        self.insert(a, b, sim);
        self
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(File::open(path)?)
    }

    /// Reads `a<TAB>b<TAB>sim` lines; blank lines and `#` comments are ignored.
    pub fn from_reader(reader: impl Read) -> Result<Self> {
        let mut out = TableSimilarity::new();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let parse_err = |message: String| Error::Parse {
                line: i + 1,
                message,
            };
            if fields.len() != 3 {
                return Err(parse_err(format!(
                    "expected 3 tab-separated fields, found {}",
                    fields.len()
                )));
            }
            let sim: f64 = fields[2]
                .trim()
                .parse()
                .map_err(|e| parse_err(format!("bad similarity: {e}")))?;
            if !(0.0..=1.0).contains(&sim) {
                return Err(parse_err(format!("similarity {sim} outside [0, 1]")));
            }
            out.insert(fields[0], fields[1], sim);
        }
        Ok(out)
    }
}

impl SimilarityProvider for TableSimilarity {
    fn name(&self) -> &'static str {
        "table"
    }

    fn similarity(&self, a: &str, b: &str) -> f64 {
        if a == b {
            return 1.0;
        }
        self.pairs
            .get(a)
            .and_then(|row| row.get(b))
            .copied()
            .unwrap_or(0.0)
    }
}
