//! The Indexer agent: trusted corpus storage and retrieval.
//!
//! Documents are chunked, embedded and inserted into a BM25 inverted index
//! and a flat vector index. Both queries are exact (exhaustive semantics);
//! ties are broken by `(doc_id, ordinal)` ascending so results never depend
//! on insertion order. [`SharedIndex`] gives many readers / one writer.

mod authenticity;
mod chunk;
mod embed;
mod normalize;
mod persist;
mod reputation;

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, OnceLock};

use chrono::{DateTime, Utc};
use parking_lot::RwLock;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{validate_document, Chunk, Document, Validation, Violation};
use crate::text::tokenize;

pub use authenticity::{authenticity, citation_norm, recency, AuthenticityWeights};
pub use chunk::{chunk_document, chunk_spans, ChunkingKind, ChunkingPolicy};
pub use embed::{
    cosine, dot, embed_checked, l2_norm, normalize, stable_hash, EmbedError, Embedder,
    HashEmbedder, DEFAULT_DIM,
};
pub use normalize::{
    html_to_text, normalize_document, LiteralStringPdfExtractor, NormalizeError, PdfTextExtractor,
    Provenance,
};
pub use persist::{IndexManifest, INDEX_SCHEMA_VERSION};
pub use reputation::{
    ReputationEntry, ReputationError, ReputationTable, SourceCategory, DEFAULT_REPUTATION,
};

pub type SharedIndex = Arc<RwLock<Index>>;

/// Okapi BM25 constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    /// `ln(1 + (N - n + 0.5) / (n + 0.5))` for a term in `n` of `N` chunks.
    pub fn idf(&self, n_chunks: usize, doc_freq: usize) -> f64 {
        let (big_n, n) = (n_chunks as f64, doc_freq as f64);
        (1.0 + (big_n - n + 0.5) / (n + 0.5)).ln()
    }

    pub fn term_weight(&self, tf: f64, chunk_len: f64, avg_len: f64) -> f64 {
        let norm = if avg_len > 0.0 { chunk_len / avg_len } else { 0.0 };
        tf * (self.k1 + 1.0) / (tf + self.k1 * (1.0 - self.b + self.b * norm))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexConfig {
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub policy: ChunkingPolicy,
    #[serde(default)]
    pub bm25: Bm25Params,
    #[serde(default)]
    pub authenticity: AuthenticityWeights,
}

fn default_dim() -> usize {
    DEFAULT_DIM
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            dim: DEFAULT_DIM,
            policy: ChunkingPolicy::default(),
            bm25: Bm25Params::default(),
            authenticity: AuthenticityWeights::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexStats {
    pub n_docs: usize,
    pub n_chunks: usize,
    pub avg_chunk_len_tokens: f64,
    pub vocabulary_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceProfile {
    pub domain: String,
    pub reputation: f64,
    pub citation_count: u64,
    #[serde(with = "crate::domain::timestamp")]
    pub last_seen: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AddReport {
    pub chunk_count: usize,
}

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("document {0} is already indexed")]
    DuplicateId(String),
    #[error("document {id} is invalid: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Validation { id: String, violations: Vec<Violation> },
    #[error("query has no terms")]
    EmptyQuery,
    #[error("index is empty")]
    EmptyIndex,
    #[error("dimension mismatch: index has {expected}, query has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("unknown document {0}")]
    UnknownDocument(String),
    #[error("index schema version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("index data is corrupt: {0}")]
    Corruption(String),
    #[error("invalid index configuration: {0}")]
    Config(String),
    #[error("index I/O: {0}")]
    Io(#[from] std::io::Error),
}

/// A query hit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredChunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub ordinal: u32,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub(crate) struct Posting {
    pub chunk: u32,
    pub tf: u32,
}

#[derive(Debug, Clone)]
pub(crate) struct StoredChunk {
    pub chunk: Chunk,
    pub n_tokens: u32,
    pub norm: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct DocEntry {
    pub doc: Document,
    pub chunks: Vec<usize>,
    /// Mean of the document's chunk embeddings.
    pub mean_embedding: Vec<f64>,
}

pub struct Index {
    config: IndexConfig,
    embedder: Arc<dyn Embedder>,
    reputation: ReputationTable,
    doc_order: Vec<String>,
    docs: HashMap<String, DocEntry>,
    chunks: Vec<StoredChunk>,
    chunk_ids: HashMap<String, usize>,
    postings: HashMap<String, Vec<Posting>>,
    total_tokens: u64,
    /// Domains seen as document sources, with their latest publication time.
    sources: BTreeMap<String, DateTime<Utc>>,
    /// Cross-domain mentions observed in document bodies.
    mentions: BTreeMap<String, u64>,
}

impl std::fmt::Debug for Index {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Index")
            .field("config", &self.config)
            .field("stats", &self.stats())
            .finish()
    }
}

fn domain_mention_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b[a-z0-9][a-z0-9-]*(?:\.[a-z0-9-]+)*\.[a-z]{2,}\b").unwrap())
}

fn cmp_hits(a: &ScoredChunk, b: &ScoredChunk) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.doc_id.cmp(&b.doc_id))
        .then_with(|| a.ordinal.cmp(&b.ordinal))
}

/// Sorts hits by score descending, ties by `(doc_id, ordinal)`, and keeps `k`.
pub fn top_k(mut hits: Vec<ScoredChunk>, k: usize) -> Vec<ScoredChunk> {
    if hits.len() > k && k > 0 {
        hits.select_nth_unstable_by(k - 1, cmp_hits);
        hits.truncate(k);
    }
    hits.sort_by(cmp_hits);
    hits.truncate(k);
    hits
}

impl Index {
    pub fn new(config: IndexConfig) -> Result<Self, IndexError> {
        Self::with_embedder(config, Arc::new(HashEmbedder::new(config.dim)))
    }

    pub fn with_embedder(config: IndexConfig, embedder: Arc<dyn Embedder>) -> Result<Self, IndexError> {
        config.policy.validate().map_err(IndexError::Config)?;
        if config.dim == 0 {
            return Err(IndexError::Config("dim must be positive".into()));
        }
        if embedder.dim() != config.dim {
            return Err(IndexError::DimensionMismatch { expected: config.dim, got: embedder.dim() });
        }
        Ok(Self {
            config,
            embedder,
            reputation: ReputationTable::new(),
            doc_order: Vec::new(),
            docs: HashMap::new(),
            chunks: Vec::new(),
            chunk_ids: HashMap::new(),
            postings: HashMap::new(),
            total_tokens: 0,
            sources: BTreeMap::new(),
            mentions: BTreeMap::new(),
        })
    }

    pub fn into_shared(self) -> SharedIndex {
        Arc::new(RwLock::new(self))
    }

    pub fn config(&self) -> &IndexConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn set_reputation_table(&mut self, table: ReputationTable) {
        self.reputation = table;
    }

    pub fn reputation_table(&self) -> &ReputationTable {
        &self.reputation
    }

    pub fn embed(&self, text: &str) -> Result<Vec<f64>, IndexError> {
        Ok(embed_checked(self.embedder.as_ref(), text, self.config.dim)?)
    }

    /// Validates, chunks, embeds and inserts a document.
    pub fn add(&mut self, doc: Document) -> Result<AddReport, IndexError> {
        if let Validation::Invalid(violations) = validate_document(&doc) {
            return Err(IndexError::Validation { id: doc.id.clone(), violations });
        }
        if self.docs.contains_key(&doc.id) {
            return Err(IndexError::DuplicateId(doc.id));
        }
        let mut pieces = chunk_document(&doc, &self.config.policy);
        // embed everything before mutating so a failure leaves the index untouched
        for c in &mut pieces {
            c.embedding = self.embed(&c.text)?;
        }
        let chunk_count = pieces.len();
        let mut positions = Vec::with_capacity(chunk_count);
        for c in pieces {
            positions.push(self.insert_chunk(c));
        }
        self.record_source(&doc);
        let mean_embedding = self.mean_of(&positions);
        self.doc_order.push(doc.id.clone());
        self.docs.insert(doc.id.clone(), DocEntry { doc, chunks: positions, mean_embedding });
        Ok(AddReport { chunk_count })
    }

    fn insert_chunk(&mut self, chunk: Chunk) -> usize {
        let pos = self.chunks.len();
        let tokens = tokenize(&chunk.text);
        let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
        for t in &tokens {
            *tf.entry(t.as_str()).or_default() += 1;
        }
        for (term, count) in tf {
            self.postings
                .entry(term.to_string())
                .or_default()
                .push(Posting { chunk: pos as u32, tf: count });
        }
        self.total_tokens += tokens.len() as u64;
        self.chunk_ids.insert(chunk.id.clone(), pos);
        let norm = l2_norm(&chunk.embedding);
        self.chunks.push(StoredChunk { chunk, n_tokens: tokens.len() as u32, norm });
        pos
    }

    fn record_source(&mut self, doc: &Document) {
        let seen = self.sources.entry(doc.domain.clone()).or_insert(doc.published_at);
        if doc.published_at > *seen {
            *seen = doc.published_at;
        }
        let body = doc.body.to_lowercase();
        let mut cited: Vec<&str> = domain_mention_regex()
            .find_iter(&body)
            .map(|m| m.as_str())
            .filter(|d| *d != doc.domain)
            .collect();
        cited.sort_unstable();
        cited.dedup();
        for d in cited {
            *self.mentions.entry(d.to_string()).or_default() += 1;
        }
    }

    fn mean_of(&self, positions: &[usize]) -> Vec<f64> {
        let mut mean = vec![0.0; self.config.dim];
        for &p in positions {
            for (m, x) in mean.iter_mut().zip(&self.chunks[p].chunk.embedding) {
                *m += x;
            }
        }
        if !positions.is_empty() {
            let n = positions.len() as f64;
            for m in &mut mean {
                *m /= n;
            }
        }
        mean
    }

    pub fn stats(&self) -> IndexStats {
        IndexStats {
            n_docs: self.docs.len(),
            n_chunks: self.chunks.len(),
            avg_chunk_len_tokens: self.avg_chunk_len(),
            vocabulary_size: self.postings.len(),
        }
    }

    pub fn avg_chunk_len(&self) -> f64 {
        if self.chunks.is_empty() {
            0.0
        } else {
            self.total_tokens as f64 / self.chunks.len() as f64
        }
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn contains_document(&self, id: &str) -> bool {
        self.docs.contains_key(id)
    }

    pub fn document(&self, id: &str) -> Option<&Document> {
        self.docs.get(id).map(|e| &e.doc)
    }

    /// Documents in insertion order.
    pub fn documents(&self) -> impl Iterator<Item = &Document> {
        self.doc_order.iter().map(move |id| &self.docs[id].doc)
    }

    pub fn chunk(&self, chunk_id: &str) -> Option<&Chunk> {
        self.chunk_ids.get(chunk_id).map(|&p| &self.chunks[p].chunk)
    }

    /// Chunks in insertion order.
    pub fn chunks(&self) -> impl Iterator<Item = &Chunk> {
        self.chunks.iter().map(|c| &c.chunk)
    }

    pub fn document_chunks(&self, doc_id: &str) -> Vec<&Chunk> {
        self.docs
            .get(doc_id)
            .map(|e| e.chunks.iter().map(|&p| &self.chunks[p].chunk).collect())
            .unwrap_or_default()
    }

    /// Mean chunk embedding of a document.
    pub fn document_embedding(&self, doc_id: &str) -> Option<&[f64]> {
        self.docs.get(doc_id).map(|e| e.mean_embedding.as_slice())
    }

    /// Doc-level similarity: cosine of mean chunk embeddings.
    pub fn document_similarity(&self, a: &str, b: &str) -> Option<f64> {
        Some(cosine(self.document_embedding(a)?, self.document_embedding(b)?))
    }

    pub fn source_category(&self, domain: &str) -> SourceCategory {
        self.reputation.category(domain)
    }

    /// Profile of a source domain. Citation count is the number of indexed
    /// documents from other domains that mention it, plus any curated count.
    pub fn profile(&self, domain: &str) -> SourceProfile {
        let observed = self.mentions.get(domain).copied().unwrap_or(0);
        SourceProfile {
            domain: domain.to_string(),
            reputation: self.reputation.reputation(domain),
            citation_count: observed + self.reputation.curated_citations(domain),
            last_seen: self.sources.get(domain).copied().unwrap_or(DateTime::<Utc>::MIN_UTC),
        }
    }

    /// Profiles of every domain that has contributed a document.
    pub fn profiles(&self) -> Vec<SourceProfile> {
        self.sources.keys().map(|d| self.profile(d)).collect()
    }

    pub fn authenticity_of(&self, doc_id: &str, now: DateTime<Utc>) -> Option<f64> {
        let doc = self.document(doc_id)?;
        Some(authenticity(&self.profile(&doc.domain), doc, now, &self.config.authenticity))
    }

    /// Top-`k` chunks under Okapi BM25. Query terms are tokenized and
    /// deduplicated; chunks matching no term are not returned.
    pub fn bm25_query(&self, terms: &[String], k: usize) -> Result<Vec<ScoredChunk>, IndexError> {
        let mut query: Vec<String> = terms.iter().flat_map(|t| tokenize(t)).collect();
        query.sort_unstable();
        query.dedup();
        if query.is_empty() {
            return Err(IndexError::EmptyQuery);
        }
        if self.chunks.is_empty() {
            return Err(IndexError::EmptyIndex);
        }
        let n = self.chunks.len();
        let avg = self.avg_chunk_len();
        let params = self.config.bm25;
        let mut scores = vec![0.0f64; n];
        let mut touched = Vec::new();
        for term in &query {
            let Some(list) = self.postings.get(term) else { continue };
            let idf = params.idf(n, list.len());
            for p in list {
                let c = p.chunk as usize;
                if scores[c] == 0.0 {
                    touched.push(c);
                }
                scores[c] += idf * params.term_weight(f64::from(p.tf), f64::from(self.chunks[c].n_tokens), avg);
            }
        }
        let hits = touched
            .into_iter()
            .map(|c| self.hit(c, scores[c]))
            .collect();
        Ok(top_k(hits, k))
    }

    /// Exact top-`k` chunks by cosine similarity to `query`.
    pub fn vector_query(&self, query: &[f64], k: usize) -> Result<Vec<ScoredChunk>, IndexError> {
        if query.len() != self.config.dim {
            return Err(IndexError::DimensionMismatch { expected: self.config.dim, got: query.len() });
        }
        let qn = l2_norm(query);
        let hits = self
            .chunks
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let denom = qn * c.norm;
                let s = if denom == 0.0 { 0.0 } else { dot(query, &c.chunk.embedding) / denom };
                self.hit(i, s)
            })
            .collect();
        Ok(top_k(hits, k))
    }

    fn hit(&self, pos: usize, score: f64) -> ScoredChunk {
        let c = &self.chunks[pos].chunk;
        ScoredChunk {
            chunk_id: c.id.clone(),
            doc_id: c.doc_id.clone(),
            ordinal: c.ordinal,
            score,
        }
    }
}
