//! On-disk index layout.
//!
//! ```text
//! <dir>/manifest.json    schema_version, dim, k1, b, policy, embedder, checksums
//! <dir>/documents.jsonl  one Document per line, insertion order
//! <dir>/chunks.jsonl     chunk id, doc id, ordinal, text, token count
//! <dir>/embeddings.bin   chunk embeddings, f64 little-endian, chunk order
//! <dir>/postings.json    term -> [[chunk position, tf], ...]
//! <dir>/sources.json     source last-seen times and observed mentions
//! <dir>/reputation.json  reputation table in effect
//! ```
//!
//! Every data file is covered by a SHA-256 checksum in the manifest, and the
//! manifest by the hex digest in `manifest.json.sha256`.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{
    l2_norm, Bm25Params, ChunkingPolicy, DocEntry, Embedder, HashEmbedder, Index, IndexConfig,
    IndexError, Posting, ReputationTable, StoredChunk,
};
use crate::domain::{sha256, Chunk, Document};

pub const INDEX_SCHEMA_VERSION: u32 = 1;

const MANIFEST_DIGEST: &str = "manifest.json.sha256";

const DATA_FILES: [&str; 6] = [
    "documents.jsonl",
    "chunks.jsonl",
    "embeddings.bin",
    "postings.json",
    "sources.json",
    "reputation.json",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexManifest {
    pub schema_version: u32,
    pub dim: usize,
    pub k1: f64,
    pub b: f64,
    pub policy: ChunkingPolicy,
    pub authenticity: super::AuthenticityWeights,
    pub embedder: String,
    pub n_docs: usize,
    pub n_chunks: usize,
    pub checksums: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct ChunkLine {
    id: String,
    doc_id: String,
    ordinal: u32,
    text: String,
    n_tokens: u32,
}

#[derive(Serialize, Deserialize)]
struct Sources {
    last_seen: BTreeMap<String, String>,
    mentions: BTreeMap<String, u64>,
}

fn corrupt(what: &str, e: impl std::fmt::Display) -> IndexError {
    IndexError::Corruption(format!("{what}: {e}"))
}

fn jsonl<T: Serialize>(items: impl Iterator<Item = T>) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        out.extend(serde_json::to_vec(&item).expect("serializable"));
        out.push(b'\n');
    }
    out
}

fn parse_jsonl<T: for<'de> Deserialize<'de>>(name: &str, bytes: &[u8]) -> Result<Vec<T>, IndexError> {
    bytes
        .split(|&b| b == b'\n')
        .filter(|l| !l.is_empty())
        .map(|l| serde_json::from_slice(l).map_err(|e| corrupt(name, e)))
        .collect()
}

impl Index {
    /// Writes the index into `dir`, creating it if needed.
    pub fn persist(&self, dir: &Path) -> Result<IndexManifest, IndexError> {
        fs::create_dir_all(dir)?;
        let documents = jsonl(self.documents());
        let chunks = jsonl(self.chunks.iter().map(|c| ChunkLine {
            id: c.chunk.id.clone(),
            doc_id: c.chunk.doc_id.clone(),
            ordinal: c.chunk.ordinal,
            text: c.chunk.text.clone(),
            n_tokens: c.n_tokens,
        }));
        let mut embeddings = Vec::with_capacity(self.chunks.len() * self.config.dim * 8);
        for c in &self.chunks {
            for x in &c.chunk.embedding {
                embeddings.extend_from_slice(&x.to_le_bytes());
            }
        }
        let postings: BTreeMap<&str, Vec<(u32, u32)>> = self
            .postings
            .iter()
            .map(|(t, ps)| (t.as_str(), ps.iter().map(|p| (p.chunk, p.tf)).collect()))
            .collect();
        let postings = serde_json::to_vec(&postings).expect("serializable");
        let sources = Sources {
            last_seen: self
                .sources
                .iter()
                .map(|(d, t)| (d.clone(), crate::domain::timestamp::render(t)))
                .collect(),
            mentions: self.mentions.clone(),
        };
        let sources = serde_json::to_vec(&sources).expect("serializable");
        let reputation = serde_json::to_vec(&self.reputation).expect("serializable");

        let mut checksums = BTreeMap::new();
        for (name, bytes) in DATA_FILES
            .iter()
            .zip([&documents, &chunks, &embeddings, &postings, &sources, &reputation])
        {
            fs::write(dir.join(name), bytes)?;
            checksums.insert(name.to_string(), hex::encode(sha256(bytes)));
        }
        let manifest = IndexManifest {
            schema_version: INDEX_SCHEMA_VERSION,
            dim: self.config.dim,
            k1: self.config.bm25.k1,
            b: self.config.bm25.b,
            policy: self.config.policy,
            authenticity: self.config.authenticity,
            embedder: self.embedder.scheme().to_string(),
            n_docs: self.docs.len(),
            n_chunks: self.chunks.len(),
            checksums,
        };
        let manifest_bytes = serde_json::to_vec_pretty(&manifest).expect("serializable");
        fs::write(dir.join(MANIFEST_DIGEST), hex::encode(sha256(&manifest_bytes)))?;
        fs::write(dir.join("manifest.json"), manifest_bytes)?;
        Ok(manifest)
    }

    /// Loads an index written by [`Index::persist`] using the default hash
    /// embedder.
    pub fn load(dir: &Path) -> Result<Self, IndexError> {
        let manifest = read_manifest(dir)?;
        let embedder = Arc::new(HashEmbedder::new(manifest.dim));
        Self::load_with_embedder(dir, embedder)
    }

    pub fn load_with_embedder(dir: &Path, embedder: Arc<dyn Embedder>) -> Result<Self, IndexError> {
        let manifest = read_manifest(dir)?;
        if embedder.scheme() != manifest.embedder {
            return Err(IndexError::Config(format!(
                "index was built with embedder {:?}, got {:?}",
                manifest.embedder,
                embedder.scheme()
            )));
        }
        let mut files = HashMap::new();
        for name in DATA_FILES {
            let bytes = fs::read(dir.join(name)).map_err(|e| corrupt(name, e))?;
            let expected = manifest
                .checksums
                .get(name)
                .ok_or_else(|| corrupt(name, "no checksum in manifest"))?;
            if &hex::encode(sha256(&bytes)) != expected {
                return Err(corrupt(name, "checksum mismatch"));
            }
            files.insert(name, bytes);
        }

        let config = IndexConfig {
            dim: manifest.dim,
            policy: manifest.policy,
            bm25: Bm25Params { k1: manifest.k1, b: manifest.b },
            authenticity: manifest.authenticity,
        };
        let mut index = Index::with_embedder(config, embedder)?;
        index.reputation = serde_json::from_slice::<ReputationTable>(&files["reputation.json"])
            .map_err(|e| corrupt("reputation.json", e))?;

        let documents: Vec<Document> = parse_jsonl("documents.jsonl", &files["documents.jsonl"])?;
        let lines: Vec<ChunkLine> = parse_jsonl("chunks.jsonl", &files["chunks.jsonl"])?;
        let raw = &files["embeddings.bin"];
        let dim = manifest.dim;
        if documents.len() != manifest.n_docs || lines.len() != manifest.n_chunks || raw.len() != lines.len() * dim * 8 {
            return Err(corrupt("index", "file sizes disagree with manifest"));
        }

        let mut doc_chunks: HashMap<String, Vec<usize>> = HashMap::new();
        for (pos, line) in lines.into_iter().enumerate() {
            let embedding: Vec<f64> = raw[pos * dim * 8..(pos + 1) * dim * 8]
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                .collect();
            index.total_tokens += u64::from(line.n_tokens);
            index.chunk_ids.insert(line.id.clone(), pos);
            doc_chunks.entry(line.doc_id.clone()).or_default().push(pos);
            let norm = l2_norm(&embedding);
            index.chunks.push(StoredChunk {
                chunk: Chunk {
                    id: line.id,
                    doc_id: line.doc_id,
                    ordinal: line.ordinal,
                    text: line.text,
                    embedding,
                },
                n_tokens: line.n_tokens,
                norm,
            });
        }

        for doc in documents {
            let positions = doc_chunks
                .remove(&doc.id)
                .ok_or_else(|| corrupt("chunks.jsonl", format!("document {} has no chunks", doc.id)))?;
            let mean_embedding = index.mean_of(&positions);
            index.doc_order.push(doc.id.clone());
            index.docs.insert(doc.id.clone(), DocEntry { doc, chunks: positions, mean_embedding });
        }
        if let Some(orphan) = doc_chunks.keys().next() {
            return Err(corrupt("chunks.jsonl", format!("chunks for unknown document {orphan}")));
        }

        let postings: BTreeMap<String, Vec<(u32, u32)>> =
            serde_json::from_slice(&files["postings.json"]).map_err(|e| corrupt("postings.json", e))?;
        let n = index.chunks.len() as u32;
        for (term, list) in postings {
            if list.iter().any(|&(c, tf)| c >= n || tf == 0) {
                return Err(corrupt("postings.json", format!("bad posting for {term:?}")));
            }
            index
                .postings
                .insert(term, list.into_iter().map(|(chunk, tf)| Posting { chunk, tf }).collect());
        }

        let sources: Sources =
            serde_json::from_slice(&files["sources.json"]).map_err(|e| corrupt("sources.json", e))?;
        for (domain, ts) in sources.last_seen {
            let t: DateTime<Utc> = crate::domain::timestamp::parse(&ts).map_err(|e| corrupt("sources.json", e))?;
            index.sources.insert(domain, t);
        }
        index.mentions = sources.mentions;
        Ok(index)
    }
}

pub fn read_manifest(dir: &Path) -> Result<IndexManifest, IndexError> {
    let bytes = fs::read(dir.join("manifest.json"))?;
    let digest = fs::read(dir.join(MANIFEST_DIGEST)).map_err(|e| corrupt(MANIFEST_DIGEST, e))?;
    if digest.trim_ascii() != hex::encode(sha256(&bytes)).as_bytes() {
        return Err(corrupt("manifest.json", "checksum mismatch"));
    }
    let value: serde_json::Value =
        serde_json::from_slice(&bytes).map_err(|e| corrupt("manifest.json", e))?;
    let found = value
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| corrupt("manifest.json", "missing schema_version"))?;
    if found != u64::from(INDEX_SCHEMA_VERSION) {
        return Err(IndexError::VersionMismatch {
            found: u32::try_from(found).unwrap_or(u32::MAX),
            expected: INDEX_SCHEMA_VERSION,
        });
    }
    serde_json::from_value(value).map_err(|e| corrupt("manifest.json", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ContentKind;
    use chrono::TimeZone;

    fn build() -> Index {
        let mut idx = Index::new(IndexConfig { policy: ChunkingPolicy::fixed(5, 1), ..Default::default() }).unwrap();
        let mut table = ReputationTable::new();
        table.insert("a.org", 0.9, crate::indexer::SourceCategory::Statistics);
        idx.set_reputation_table(table);
        for i in 0..6 {
            idx.add(Document {
                id: format!("d{i}"),
                url: format!("https://a.org/{i}"),
                domain: if i % 2 == 0 { "a.org".into() } else { "b.org".into() },
                title: format!("t{i}"),
                author: Some("x".into()),
                published_at: Utc.with_ymd_and_hms(2024, 1, 1 + i, 0, 0, 0).unwrap(),
                modified_at: None,
                body: format!("alpha beta gamma {i} delta epsilon a.org zeta eta theta iota kappa lambda {i}"),
                content_kind: ContentKind::Plain,
            })
            .unwrap();
        }
        idx
    }

    #[test]
    fn round_trip_is_query_exact() {
        let dir = tempfile::tempdir().unwrap();
        let idx = build();
        let manifest = idx.persist(dir.path()).unwrap();
        assert_eq!(manifest.schema_version, 1);
        assert_eq!(manifest.k1, 1.2);
        let loaded = Index::load(dir.path()).unwrap();
        assert_eq!(loaded.stats(), idx.stats());
        for q in ["alpha", "3 kappa", "theta iota", "zzz"] {
            let terms = vec![q.to_string()];
            assert_eq!(loaded.bm25_query(&terms, 10).unwrap(), idx.bm25_query(&terms, 10).unwrap());
        }
        let v = idx.embed("gamma delta").unwrap();
        assert_eq!(loaded.vector_query(&v, 10).unwrap(), idx.vector_query(&v, 10).unwrap());
        assert_eq!(loaded.profiles(), idx.profiles());
        assert_eq!(loaded.reputation_table(), idx.reputation_table());
    }

    #[test]
    fn unknown_schema_version() {
        let dir = tempfile::tempdir().unwrap();
        build().persist(dir.path()).unwrap();
        let path = dir.path().join("manifest.json");
        let text = fs::read_to_string(&path).unwrap().replace("\"schema_version\": 1", "\"schema_version\": 7");
        fs::write(dir.path().join(MANIFEST_DIGEST), hex::encode(sha256(text.as_bytes()))).unwrap();
        fs::write(&path, text).unwrap();
        assert!(matches!(Index::load(dir.path()), Err(IndexError::VersionMismatch { found: 7, .. })));
    }

    #[test]
    fn edited_manifest_detected() {
        let dir = tempfile::tempdir().unwrap();
        build().persist(dir.path()).unwrap();
        let path = dir.path().join("manifest.json");
        let text = fs::read_to_string(&path).unwrap().replace("\"k1\": 1.2", "\"k1\": 1.3");
        fs::write(&path, text).unwrap();
        assert!(matches!(Index::load(dir.path()), Err(IndexError::Corruption(_))));
    }

    #[test]
    fn truncated_postings_detected() {
        let dir = tempfile::tempdir().unwrap();
        build().persist(dir.path()).unwrap();
        let path = dir.path().join("postings.json");
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(Index::load(dir.path()), Err(IndexError::Corruption(_))));
    }
}
