//! Project-scoped retrieval database of fixed-size token chunks.
//!
//! Each record pairs a key chunk of at most `m` tokens with the chunk that
//! follows it in the same file. Queries rank keys by Jaccard similarity of
//! distinct token sets, or by squared L2 distance between embeddings.

mod build;
mod embedding;
mod format;
mod jaccard;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use build::{build_database, relative_path, BuildOptions, BuildOutput, BuildWarning};
pub use embedding::{EmbeddingMatrix, EmbeddingProvider, HashEmbedding};
pub use format::{load_database, save_database, FORMAT_VERSION};
pub use jaccard::jaccard;

use crate::error::{Error, Result};
use crate::tokenizer::{TokenId, TokenSequence, TokenizerSpec};

/// One key chunk `N` with its continuation `F`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkRecord {
    pub file_path: String,
    pub chunk_index: u32,
    pub key_tokens: TokenSequence,
    pub continuation_tokens: TokenSequence,
    key_token_set: Vec<TokenId>,
}

impl ChunkRecord {
    pub fn new(
        file_path: impl Into<String>,
        chunk_index: u32,
        key_tokens: Vec<TokenId>,
        continuation_tokens: Vec<TokenId>,
    ) -> Self {
        let mut set = key_tokens.clone();
        set.sort_unstable();
        set.dedup();
        ChunkRecord {
            file_path: file_path.into(),
            chunk_index,
            key_tokens: TokenSequence(key_tokens),
            continuation_tokens: TokenSequence(continuation_tokens),
            key_token_set: set,
        }
    }

    /// Distinct token ids of the key chunk, ascending.
    pub fn key_token_set(&self) -> &[TokenId] {
        &self.key_token_set
    }
}

/// How a snippet was scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    /// Jaccard similarity in [0, 1]; higher is better.
    Jaccard,
    /// Squared L2 distance; lower is better.
    SquaredL2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievedSnippet {
    pub record: ChunkRecord,
    pub score: f64,
    pub kind: ScoreKind,
    /// 1-based.
    pub rank: usize,
    /// Position of the record in the database.
    pub record_index: usize,
}

/// Records ordered by `(file_path, chunk_index)`, plus the lookup structures
/// used at query time. Immutable once built.
#[derive(Debug, Clone)]
pub struct RetrievalDatabase {
    records: Vec<ChunkRecord>,
    m: usize,
    tokenizer_id: String,
    embeddings: Option<EmbeddingMatrix>,
    paths: Vec<String>,
    path_ids: HashMap<String, u32>,
    record_file: Vec<u32>,
    postings: Vec<Vec<u32>>,
}

impl PartialEq for RetrievalDatabase {
    fn eq(&self, other: &Self) -> bool {
        self.records == other.records
            && self.m == other.m
            && self.tokenizer_id == other.tokenizer_id
            && self.embeddings == other.embeddings
    }
}

impl RetrievalDatabase {
    /// Chunks already-tokenized files. Files are ordered by path; empty
    /// files contribute no records.
    pub fn from_token_files(
        mut files: Vec<(String, Vec<TokenId>)>,
        m: usize,
        tokenizer_id: impl Into<String>,
    ) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidArgument(format!(
                "chunk size must be at least 2, got {m}"
            )));
        }
        files.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = files.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Integrity(format!("duplicate file path {}", w[0].0)));
        }
        let mut records = Vec::new();
        for (path, tokens) in &files {
            records.extend(chunk_file(path, tokens, m));
        }
        Self::from_records(records, m, tokenizer_id.into())
    }

    pub(crate) fn from_records(records: Vec<ChunkRecord>, m: usize, tokenizer_id: String) -> Result<Self> {
        let mut paths: Vec<String> = Vec::new();
        let mut path_ids: HashMap<String, u32> = HashMap::new();
        let mut record_file = Vec::with_capacity(records.len());
        let mut max_token = 0;
        for r in &records {
            let id = *path_ids.entry(r.file_path.clone()).or_insert_with(|| {
                paths.push(r.file_path.clone());
                (paths.len() - 1) as u32
            });
            record_file.push(id);
            if let Some(&t) = r.key_token_set.last() {
                max_token = max_token.max(t as usize + 1);
            }
        }
        let mut postings: Vec<Vec<u32>> = vec![Vec::new(); max_token];
        for (i, r) in records.iter().enumerate() {
            for &t in &r.key_token_set {
                postings[t as usize].push(i as u32);
            }
        }
        let db = RetrievalDatabase {
            records,
            m,
            tokenizer_id,
            embeddings: None,
            paths,
            path_ids,
            record_file,
            postings,
        };
        db.validate()?;
        Ok(db)
    }

    fn validate(&self) -> Result<()> {
        for (i, r) in self.records.iter().enumerate() {
            if r.key_tokens.is_empty() || r.key_tokens.len() > self.m {
                return Err(Error::Integrity(format!(
                    "record {i} ({}#{}) has key length {}",
                    r.file_path,
                    r.chunk_index,
                    r.key_tokens.len()
                )));
            }
            let next = self.records.get(i + 1).filter(|n| n.file_path == r.file_path);
            let expected_index = match i.checked_sub(1).map(|p| &self.records[p]) {
                Some(p) if p.file_path == r.file_path => p.chunk_index + 1,
                Some(p) if p.file_path > r.file_path => {
                    return Err(Error::Integrity("records are not ordered by path".into()))
                }
                _ => 0,
            };
            if r.chunk_index != expected_index {
                return Err(Error::Integrity(format!(
                    "{}: chunk {} out of sequence (expected {expected_index})",
                    r.file_path, r.chunk_index
                )));
            }
            let expected_cont: &[TokenId] = next.map(|n| &n.key_tokens[..]).unwrap_or(&[]);
            if r.continuation_tokens[..] != *expected_cont || (next.is_some() && r.key_tokens.len() != self.m) {
                return Err(Error::Integrity(format!(
                    "{}#{}: continuation does not match the following chunk",
                    r.file_path, r.chunk_index
                )));
            }
        }
        Ok(())
    }

    pub fn records(&self) -> &[ChunkRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn chunk_size(&self) -> usize {
        self.m
    }

    pub fn tokenizer_id(&self) -> &str {
        &self.tokenizer_id
    }

    pub fn embeddings(&self) -> Option<&EmbeddingMatrix> {
        self.embeddings.as_ref()
    }

    /// Distinct file paths, sorted.
    pub fn file_paths(&self) -> &[String] {
        &self.paths
    }

    pub fn token_count(&self) -> usize {
        self.records.iter().map(|r| r.key_tokens.len()).sum()
    }

    /// The file's full token sequence, rebuilt from its key chunks.
    pub fn file_tokens(&self, path: &str) -> Option<Vec<TokenId>> {
        let id = *self.path_ids.get(path)?;
        Some(
            self.records
                .iter()
                .zip(&self.record_file)
                .filter(|(_, &f)| f == id)
                .flat_map(|(r, _)| r.key_tokens.iter().copied())
                .collect(),
        )
    }

    /// Fails unless the database was built with `spec`'s vocabulary.
    pub fn check_tokenizer(&self, spec: &TokenizerSpec) -> Result<()> {
        if self.tokenizer_id != spec.id() {
            return Err(Error::TokenizerMismatch {
                expected: self.tokenizer_id.clone(),
                found: spec.id().to_string(),
            });
        }
        Ok(())
    }

    /// Attaches precomputed key embeddings (one row per record).
    pub fn set_embeddings(&mut self, matrix: EmbeddingMatrix) -> Result<()> {
        if matrix.rows() != self.records.len() {
            return Err(Error::Integrity(format!(
                "{} embedding rows for {} records",
                matrix.rows(),
                self.records.len()
            )));
        }
        self.embeddings = Some(matrix);
        Ok(())
    }

    /// Embeds every key chunk with `provider`.
    pub fn compute_embeddings(&mut self, provider: &dyn EmbeddingProvider) -> Result<()> {
        let matrix = EmbeddingMatrix::compute(provider, &self.records)?;
        self.set_embeddings(matrix)
    }

    fn excluded_file(&self, exclude_file: Option<&str>) -> Option<u32> {
        // a path that is not in the database excludes nothing
        exclude_file.and_then(|p| self.path_ids.get(p).copied())
    }

    fn snippet(&self, index: usize, score: f64, kind: ScoreKind, rank: usize) -> RetrievedSnippet {
        RetrievedSnippet {
            record: self.records[index].clone(),
            score,
            kind,
            rank,
            record_index: index,
        }
    }
}

/// Splits one file's tokens into consecutive chunks of `m` tokens, each with
/// the following chunk as its continuation.
pub fn chunk_file(path: &str, tokens: &[TokenId], m: usize) -> Vec<ChunkRecord> {
    tokens
        .chunks(m)
        .enumerate()
        .map(|(i, key)| {
            let start = (i + 1) * m;
            let cont = if start < tokens.len() {
                &tokens[start..(start + m).min(tokens.len())]
            } else {
                &[]
            };
            ChunkRecord::new(path, i as u32, key.to_vec(), cont.to_vec())
        })
        .collect()
}
