// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::shard::{read_shard, write_shard, ActivationShard};
use crate::error::{io_err, Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// `manifest.json` of a corpus directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    /// Shard file names, in document order.
    pub files: Vec<String>,
    /// Optional JSON array mapping token id to its decoded text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_strings: Option<String>,
}

/// Ordered set of documents sharing one model.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    documents: Vec<ActivationShard>,
    token_strings: Option<Vec<String>>,
}

impl Corpus {
    pub fn new(documents: Vec<ActivationShard>) -> Result<Self> {
        let mut seen = HashSet::new();
        for d in &documents {
            if !seen.insert(d.doc_id.as_str()) {
                return Err(Error::InvalidShard(format!("duplicate doc_id {:?}", d.doc_id)));
            }
        }
        if let Some(first) = documents.first() {
            for d in &documents[1..] {
                if d.meta.hidden_dim != first.meta.hidden_dim || d.meta.vocab_size != first.meta.vocab_size {
                    return Err(Error::InvalidShard(format!(
                        "document {:?} has model dims ({}, {}), expected ({}, {})",
                        d.doc_id,
                        d.meta.hidden_dim,
                        d.meta.vocab_size,
                        first.meta.hidden_dim,
                        first.meta.vocab_size
                    )));
                }
            }
        }
        Ok(Self {
            documents,
            token_strings: None,
        })
    }

    pub fn with_token_strings(mut self, strings: Vec<String>) -> Self {
        self.token_strings = Some(strings);
        self
    }

    pub fn documents(&self) -> &[ActivationShard] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, doc_id: &str) -> Option<&ActivationShard> {
        self.documents.iter().find(|d| d.doc_id == doc_id)
    }

    pub fn token_strings(&self) -> Option<&[String]> {
        self.token_strings.as_deref()
    }

    /// Decoded text of a token sequence. Without a token table, ids are
    /// rendered as `<id>`.
    pub fn surface(&self, ids: &[u32]) -> String {
        match &self.token_strings {
            Some(table) => ids
                .iter()
                .map(|&id| {
                    table
                        .get(id as usize)
                        .cloned()
                        .unwrap_or_else(|| format!("<{id}>"))
                })
                .collect(),
            None => ids.iter().map(|id| format!("<{id}>")).collect(),
        }
    }

    pub fn load_dir(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
        let manifest: CorpusManifest = serde_json::from_str(&text)?;
        let documents = manifest
            .files
            .iter()
            .map(|f| read_shard(&dir.join(f)))
            .collect::<Result<Vec<_>>>()?;
        let mut corpus = Corpus::new(documents)?;
        if let Some(name) = &manifest.token_strings {
            let path = dir.join(name);
            let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
            corpus.token_strings = Some(serde_json::from_str(&text)?);
        }
        Ok(corpus)
    }

    /// Writes one `<doc_id>.acts` file per document plus the manifest.
    pub fn save_dir(&self, dir: &Path) -> Result<CorpusManifest> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut files = Vec::with_capacity(self.documents.len());
        for d in &self.documents {
            let name = format!("{}.acts", d.doc_id);
            write_shard(d, &dir.join(&name))?;
            files.push(name);
        }
        let token_strings = match &self.token_strings {
            Some(table) => {
                let name = "tokens.json".to_string();
                let path = dir.join(&name);
                std::fs::write(&path, serde_json::to_vec(table)?).map_err(io_err(&path))?;
                Some(name)
            }
            None => None,
        };
        let manifest = CorpusManifest { files, token_strings };
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, serde_json::to_vec_pretty(&manifest)?).map_err(io_err(&path))?;
        Ok(manifest)
    }
}
