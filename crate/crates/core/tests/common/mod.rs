//! Brute-force reference implementations shared by the integration tests.
//! Nothing here calls into the scoring code under test.

#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::hash::Hasher;

use chrono::{DateTime, TimeZone, Utc};
use factline_core::domain::{Chunk, ContentKind, Document};
use factline_core::indexer::{Index, IndexConfig};
use rand::prelude::*;

pub fn tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn fnv1a(token: &str) -> u64 {
    let mut h = fnv::FnvHasher::default();
    h.write(token.as_bytes());
    h.finish()
}

/// Signed hashed bag of words, L2 normalized.
pub fn embed(text: &str, dim: usize) -> Vec<f64> {
    let toks = tokens(text);
    let mut v = vec![0.0; dim];
    for t in &toks {
        let h = fnv1a(t);
        v[(h % dim as u64) as usize] += if h.count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
    }
    if !toks.is_empty() && v.iter().all(|x| *x == 0.0) {
        for t in &toks {
            v[(fnv1a(t) % dim as u64) as usize] += 1.0;
        }
    }
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

#[derive(Debug, Clone)]
pub struct Hit {
    pub chunk_id: String,
    pub doc_id: String,
    pub ordinal: u32,
    pub score: f64,
}

fn order(a: &Hit, b: &Hit) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap()
        .then_with(|| a.doc_id.cmp(&b.doc_id))
        .then_with(|| a.ordinal.cmp(&b.ordinal))
}

fn top(mut hits: Vec<Hit>, k: usize) -> Vec<Hit> {
    hits.sort_by(order);
    hits.truncate(k);
    hits
}

/// Okapi BM25 (k1 1.2, b 0.75) recomputed from chunk texts.
pub fn bm25(chunks: &[&Chunk], query: &str, k: usize) -> Vec<Hit> {
    let terms: BTreeSet<String> = tokens(query).into_iter().collect();
    let docs: Vec<Vec<String>> = chunks.iter().map(|c| tokens(&c.text)).collect();
    let n = docs.len() as f64;
    let avg = docs.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let mut df: HashMap<&str, f64> = HashMap::new();
    for t in &terms {
        df.insert(t, docs.iter().filter(|d| d.contains(t)).count() as f64);
    }
    let hits = chunks
        .iter()
        .zip(&docs)
        .filter_map(|(c, d)| {
            let mut score = 0.0;
            let mut matched = false;
            for t in &terms {
                let tf = d.iter().filter(|x| *x == t).count() as f64;
                if tf == 0.0 {
                    continue;
                }
                matched = true;
                let nt = df[t.as_str()];
                let idf = (1.0 + (n - nt + 0.5) / (nt + 0.5)).ln();
                score += idf * tf * 2.2 / (tf + 1.2 * (0.25 + 0.75 * d.len() as f64 / avg));
            }
            matched.then(|| Hit { chunk_id: c.id.clone(), doc_id: c.doc_id.clone(), ordinal: c.ordinal, score })
        })
        .collect();
    top(hits, k)
}

/// Exhaustive cosine ranking against freshly embedded chunk texts.
pub fn cosine(chunks: &[&Chunk], query: &str, dim: usize, k: usize) -> Vec<Hit> {
    let q = embed(query, dim);
    let hits = chunks
        .iter()
        .map(|c| {
            let v = embed(&c.text, dim);
            let dot: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
            let nq = q.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let score = if nq * nv == 0.0 { 0.0 } else { dot / (nq * nv) };
            Hit { chunk_id: c.id.clone(), doc_id: c.doc_id.clone(), ordinal: c.ordinal, score }
        })
        .collect();
    top(hits, k)
}

pub fn at(hours: i64) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap() + chrono::Duration::hours(hours)
}

pub fn vocabulary(size: usize) -> Vec<String> {
    (0..size).map(|i| format!("w{i}")).collect()
}

/// Random short documents over a skewed vocabulary, one chunk each under the
/// default chunking policy.
pub fn random_documents(rng: &mut impl Rng, n: usize, vocab: &[String]) -> Vec<Document> {
    (0..n)
        .map(|i| {
            let len = rng.gen_range(8..60);
            let body: Vec<&str> = (0..len)
                .map(|_| {
                    let u: f64 = rng.gen();
                    vocab[((u * u) * vocab.len() as f64) as usize].as_str()
                })
                .collect();
            Document {
                id: format!("doc-{i:05}"),
                url: format!("https://site{}.example/{i}", i % 17),
                domain: format!("site{}.example", i % 17),
                title: String::new(),
                author: None,
                published_at: at(i as i64),
                modified_at: None,
                body: body.join(" "),
                content_kind: ContentKind::Plain,
            }
        })
        .collect()
}

pub fn random_query(rng: &mut impl Rng, vocab: &[String]) -> String {
    let n = rng.gen_range(1..5);
    let mut words: Vec<String> = (0..n).map(|_| vocab[rng.gen_range(0..vocab.len())].clone()).collect();
    if rng.gen_bool(0.2) {
        words.push("unseenterm".into());
    }
    words.join(" ")
}

pub fn build_index(docs: &[Document]) -> Index {
    let mut index = Index::new(IndexConfig::default()).unwrap();
    for d in docs {
        index.add(d.clone()).unwrap();
    }
    index
}

/// Same chunks in the same order with scores within `tol`.
pub fn same_ranking(got: &[factline_core::indexer::ScoredChunk], want: &[Hit], tol: f64) -> Result<(), String> {
    if got.len() != want.len() {
        return Err(format!("length {} vs {}", got.len(), want.len()));
    }
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        if g.chunk_id != w.chunk_id {
            return Err(format!("rank {i}: {} vs {}", g.chunk_id, w.chunk_id));
        }
        if (g.score - w.score).abs() > tol {
            return Err(format!("rank {i}: score {} vs {}", g.score, w.score));
        }
    }
    Ok(())
}
