//! Text embeddings.

use thiserror::Error;

use crate::text::tokenize;

pub const DEFAULT_DIM: usize = 256;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbedError {
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding is not unit length (norm {0})")]
    NotUnit(f64),
    #[error("embedder failed: {0}")]
    Backend(String),
}

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;

    /// Raw embedding; callers go through [`embed_checked`].
    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, EmbedError>;

    /// Identifies the embedding scheme in persisted manifests.
    fn scheme(&self) -> &str;
}

/// Embeds and enforces the contract every embedder must meet: dimension
/// `expected_dim` and unit norm (or exactly zero).
pub fn embed_checked(embedder: &dyn Embedder, text: &str, expected_dim: usize) -> Result<Vec<f64>, EmbedError> {
    let v = embedder.embed_raw(text)?;
    if v.len() != expected_dim {
        return Err(EmbedError::DimensionMismatch { expected: expected_dim, got: v.len() });
    }
    let norm = l2_norm(&v);
    if norm != 0.0 && (norm - 1.0).abs() > 1e-6 {
        return Err(EmbedError::NotUnit(norm));
    }
    Ok(v)
}

/// 64-bit FNV-1a.
pub fn stable_hash(token: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    token
        .bytes()
        .fold(OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

/// Signed feature hashing over lowercase alphanumeric tokens.
///
/// Each token lands in bucket `hash mod dim` with sign `+1` when the hash has
/// an even number of set bits and `-1` otherwise; the accumulated term
/// frequencies are L2-normalized. If signs cancel every bucket of a
/// non-empty text, unsigned counts are used instead so only token-free text
/// maps to the zero vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedder {
    dim: usize,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        Self { dim: dim.max(1) }
    }

    pub fn embed(&self, text: &str) -> Vec<f64> {
        let tokens = tokenize(text);
        let mut v = vec![0.0; self.dim];
        let hashes: Vec<u64> = tokens.iter().map(|t| stable_hash(t)).collect();
        for &h in &hashes {
            let sign = if h.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            v[(h % self.dim as u64) as usize] += sign;
        }
        if !hashes.is_empty() && v.iter().all(|&x| x == 0.0) {
            for &h in &hashes {
                v[(h % self.dim as u64) as usize] += 1.0;
            }
        }
        normalize(&mut v);
        v
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_DIM)
    }
}

impl Embedder for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        Ok(self.embed(text))
    }

    fn scheme(&self) -> &str {
        "fnv1a-signed-hash"
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn normalize(v: &mut [f64]) {
    let n = l2_norm(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine similarity; zero when either side is the zero vector.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let denom = l2_norm(a) * l2_norm(b);
    if denom == 0.0 {
        0.0
    } else {
        dot(a, b) / denom
    }
}
