//! On-disk index bundle: a versioned JSON document holding the dictionary,
//! the sets as element id lists, the posting lists and the provider
//! configuration.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use semoverlap::{Collection, InvertedIndex, ProviderConfig, SetId};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resource: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
}

impl ProviderSpec {
    pub fn from_config(config: &ProviderConfig) -> Self {
        let (resource, q) = match config {
            ProviderConfig::Exact => (None, None),
            ProviderConfig::Cosine { embeddings } => (Some(embeddings.clone()), None),
            ProviderConfig::QGramJaccard { q } => (None, Some(*q)),
            ProviderConfig::Table { path } => (Some(path.clone()), None),
        };
        Self {
            name: config.name().to_owned(),
            resource,
            q,
        }
    }

    pub fn to_config(&self) -> Result<ProviderConfig, CliError> {
        Ok(ProviderConfig::from_name(
            &self.name,
            self.resource.clone(),
            self.q.unwrap_or(3),
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexBundle {
    pub format_version: u32,
    pub provider: ProviderSpec,
    /// Dictionary tokens; position is the element id.
    pub tokens: Vec<String>,
    /// Sets as ascending element id lists; position is the set id.
    pub sets: Vec<Vec<u32>>,
    /// Posting lists indexed by element id.
    pub postings: Vec<Vec<u32>>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
}

impl IndexBundle {
    pub fn new(collection: &Collection, index: &InvertedIndex, provider: ProviderSpec) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            provider,
            tokens: collection.dictionary().tokens().to_vec(),
            sets: collection
                .sets()
                .iter()
                .map(|s| s.elements().iter().map(|e| e.0).collect())
                .collect(),
            postings: index
                .lists()
                .iter()
                .map(|l| l.iter().map(|s| s.0).collect())
                .collect(),
        }
    }

    pub fn collection(&self) -> Result<Collection, CliError> {
        Ok(Collection::from_parts(
            self.tokens.clone(),
            self.sets.clone(),
        )?)
    }

    pub fn index(&self) -> Result<InvertedIndex, CliError> {
        let sets = self.sets.len() as u32;
        if self.postings.len() > self.tokens.len() {
            return Err(CliError::Data(format!(
                "{} posting lists for {} tokens",
                self.postings.len(),
                self.tokens.len()
            )));
        }
        if let Some(bad) = self.postings.iter().flatten().find(|&&s| s >= sets) {
            return Err(CliError::Data(format!(
                "posting references unknown set {bad}"
            )));
        }
        Ok(InvertedIndex::from_postings(
            self.postings
                .iter()
                .map(|l| l.iter().copied().map(SetId).collect())
                .collect(),
        ))
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, self).map_err(|e| CliError::Data(e.to_string()))?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        let header: Header = serde_json::from_str(&text)
            .map_err(|e| CliError::Data(format!("{}: not an index bundle: {e}", path.display())))?;
        if header.format_version != FORMAT_VERSION {
            return Err(CliError::Data(format!(
                "{}: bundle format version {} is not supported (expected {FORMAT_VERSION})",
                path.display(),
                header.format_version
            )));
        }
        serde_json::from_str(&text)
            .map_err(|e| CliError::Data(format!("{}: malformed bundle: {e}", path.display())))
    }
}
