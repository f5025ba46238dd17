use rayon::prelude::*;

use super::jaccard::top_k;
use super::{ChunkRecord, RetrievalDatabase, RetrievedSnippet, ScoreKind};
use crate::error::{Error, Result};
use crate::tokenizer::TokenId;

/// Maps a chunk of tokens to a fixed-dimension vector.
pub trait EmbeddingProvider: Sync {
    /// Stored with the embeddings so queries use the same provider.
    fn id(&self) -> String;
    fn dimension(&self) -> usize;
    fn normalized(&self) -> bool;
    fn embed(&self, tokens: &[TokenId]) -> Vec<f32>;
}

/// Deterministic bag-of-tokens random projection: each token id hashes to a
/// ±1 vector and a chunk's embedding is the sum over its tokens.
#[derive(Debug, Clone)]
pub struct HashEmbedding {
    pub dimension: usize,
    pub seed: u64,
    pub normalize: bool,
}

impl HashEmbedding {
    pub fn new(dimension: usize, seed: u64, normalize: bool) -> Self {
        HashEmbedding {
            dimension,
            seed,
            normalize,
        }
    }
}

impl HashEmbedding {
    /// Rebuilds the provider from the id stored with a database.
    pub fn from_id(id: &str) -> Option<Self> {
        let mut parts = id.strip_prefix("hash-projection:")?.split(':');
        let dimension = parts.next()?.parse().ok()?;
        let seed = parts.next()?.parse().ok()?;
        let normalize = parts.next()?.parse().ok()?;
        if parts.next().is_some() || dimension == 0 {
            return None;
        }
        Some(HashEmbedding::new(dimension, seed, normalize))
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl EmbeddingProvider for HashEmbedding {
    fn id(&self) -> String {
        format!("hash-projection:{}:{}:{}", self.dimension, self.seed, self.normalize)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn normalized(&self) -> bool {
        self.normalize
    }

    fn embed(&self, tokens: &[TokenId]) -> Vec<f32> {
        let mut v = vec![0f32; self.dimension];
        for &t in tokens {
            let base = splitmix64(self.seed ^ (u64::from(t) << 20));
            for (j, x) in v.iter_mut().enumerate() {
                let h = splitmix64(base ^ j as u64);
                *x += if h & 1 == 0 { 1.0 } else { -1.0 };
            }
        }
        if self.normalize {
            let norm = v.iter().map(|x| x * x).sum::<f32>().sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
            }
        }
        v
    }
}

/// Row-major key embeddings, one row per database record.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dimension: usize,
    provider_id: String,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(dimension: usize, provider_id: impl Into<String>, data: Vec<f32>) -> Result<Self> {
        if dimension == 0 || !data.len().is_multiple_of(dimension) {
            return Err(Error::DimensionMismatch {
                expected: dimension,
                found: data.len(),
            });
        }
        Ok(EmbeddingMatrix {
            dimension,
            provider_id: provider_id.into(),
            data,
        })
    }

    pub(super) fn compute(provider: &dyn EmbeddingProvider, records: &[ChunkRecord]) -> Result<Self> {
        let dim = provider.dimension();
        let rows: Vec<Vec<f32>> = records.par_iter().map(|r| provider.embed(&r.key_tokens)).collect();
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        Self::new(dim, provider.id(), rows.concat())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn provider_id(&self) -> &str {
        &self.provider_id
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dimension
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }
}

pub(crate) fn squared_l2(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum()
}

impl RetrievalDatabase {
    /// Exact k-nearest keys by squared L2 distance to the query's embedding.
    pub fn retrieve_embedding(
        &self,
        provider: &dyn EmbeddingProvider,
        query: &[TokenId],
        k: usize,
        exclude_file: Option<&str>,
    ) -> Result<Vec<RetrievedSnippet>> {
        let matrix = self
            .embeddings
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("database has no embeddings".into()))?;
        if matrix.provider_id != provider.id() {
            return Err(Error::InvalidArgument(format!(
                "database embeddings come from `{}`, not `{}`",
                matrix.provider_id,
                provider.id()
            )));
        }
        let v = provider.embed(query);
        self.retrieve_by_vector(&v, k, exclude_file)
    }

    /// Exact k-nearest keys to a raw query vector.
    pub fn retrieve_by_vector(
        &self,
        query: &[f32],
        k: usize,
        exclude_file: Option<&str>,
    ) -> Result<Vec<RetrievedSnippet>> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be positive".into()));
        }
        let matrix = self
            .embeddings
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("database has no embeddings".into()))?;
        if query.len() != matrix.dimension {
            return Err(Error::DimensionMismatch {
                expected: matrix.dimension,
                found: query.len(),
            });
        }
        let excluded = self.excluded_file(exclude_file);
        let cands: Vec<(f64, usize)> = (0..self.records.len())
            .filter(|&r| Some(self.record_file[r]) != excluded)
            .map(|r| (squared_l2(query, matrix.row(r)), r))
            .collect();
        let best = top_k(cands, k, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(best
            .into_iter()
            .enumerate()
            .map(|(i, (d, r))| self.snippet(r, d, ScoreKind::SquaredL2, i + 1))
            .collect())
    }
}
