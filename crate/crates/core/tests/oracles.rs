//! Scores, hashes and fused rankings checked against values recomputed here.

mod common;

use chrono::Duration;
use factline_core::domain::{AgentMessage, AgentName, ContentKind, Document, Stage, Verdict};
use factline_core::extractor::rrf_fuse;
use factline_core::indexer::{Index, IndexConfig, ReputationEntry, ReputationTable, ScoredChunk, SourceCategory};
use factline_core::orchestrator::{append_audit, verify_audit_chain, GENESIS_HASH};
use factline_core::verifier::CredibilityLedger;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

#[test]
fn bm25_and_cosine_match_brute_force_on_small_corpora() {
    for seed in 0..8 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vocab = common::vocabulary(40);
        let docs = common::random_documents(&mut rng, 60, &vocab);
        let index = common::build_index(&docs);
        let chunks: Vec<_> = index.chunks().collect();
        for _ in 0..20 {
            let q = common::random_query(&mut rng, &vocab);
            let got = index.bm25_query(std::slice::from_ref(&q), 15).unwrap();
            common::same_ranking(&got, &common::bm25(&chunks, &q, 15), 1e-9).unwrap_or_else(|e| panic!("bm25 {q}: {e}"));
            let got = index.vector_query(&index.embed(&q).unwrap(), 15).unwrap();
            common::same_ranking(&got, &common::cosine(&chunks, &q, index.dim(), 15), 1e-9)
                .unwrap_or_else(|e| panic!("cosine {q}: {e}"));
        }
    }
}

#[test]
fn embedding_matches_reference_hashing() {
    let index = Index::new(IndexConfig::default()).unwrap();
    for text in ["alpha beta gamma", "Mixed CASE, punctuation! and 42 numbers", "x"] {
        let got = index.embed(text).unwrap();
        let want = common::embed(text, index.dim());
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12, "{text}");
        }
    }
}

fn hit(chunk: &str, score: f64) -> ScoredChunk {
    let (doc, ordinal) = chunk.split_once('#').unwrap();
    ScoredChunk { chunk_id: chunk.into(), doc_id: doc.into(), ordinal: ordinal.parse().unwrap(), score }
}

#[test]
fn rrf_by_hand() {
    let lexical = [hit("a#0", 9.0), hit("b#0", 5.0), hit("c#0", 1.0)];
    let semantic = [hit("c#0", 0.9), hit("a#0", 0.8), hit("d#1", 0.1)];
    let fused = rrf_fuse(&[&lexical, &semantic], 60);
    let want = [
        ("a#0", 1.0 / 61.0 + 1.0 / 62.0),
        ("c#0", 1.0 / 63.0 + 1.0 / 61.0),
        ("b#0", 1.0 / 62.0),
        ("d#1", 1.0 / 63.0),
    ];
    assert_eq!(fused.len(), want.len());
    for (f, (id, score)) in fused.iter().zip(want) {
        assert_eq!(f.chunk_id, id);
        assert!((f.rrf - score).abs() < 1e-15, "{id}");
    }
}

#[test]
fn rrf_ties_order_by_document_then_ordinal() {
    let one = [hit("z#0", 1.0)];
    let two = [hit("b#2", 1.0)];
    let three = [hit("b#1", 1.0)];
    let fused = rrf_fuse(&[&one, &two, &three], 60);
    let ids: Vec<&str> = fused.iter().map(|f| f.chunk_id.as_str()).collect();
    assert_eq!(ids, ["b#1", "b#2", "z#0"]);
}

fn message(i: u64) -> AgentMessage {
    AgentMessage {
        message_id: format!("m-{i}"),
        correlation_id: "claim-1".into(),
        sender: AgentName::Orchestrator,
        recipient: AgentName::Classifier,
        stage: Stage::Classify,
        payload_kind: "note".into(),
        payload: format!("{{\"n\":{i}}}"),
        sent_at: common::at(i as i64),
        schema_version: 1,
    }
}

#[test]
fn audit_chain_hashes_recomputed_independently() {
    let mut chain = Vec::new();
    for i in 0..5 {
        append_audit(&mut chain, message(i));
    }
    let mut prev = [0u8; 32];
    assert_eq!(chain[0].prev_hash, GENESIS_HASH);
    for (i, record) in chain.iter().enumerate() {
        let payload: [u8; 32] = Sha256::digest(serde_json::to_vec(&record.message).unwrap()).into();
        assert_eq!(record.payload_hash, hex::encode(payload));
        assert_eq!(record.prev_hash, hex::encode(prev));
        assert_eq!(record.seq, i as u64);
        let mut h = Sha256::new();
        h.update(prev);
        h.update(payload);
        h.update((i as u64).to_be_bytes());
        prev = h.finalize().into();
    }
    assert!(verify_audit_chain(&chain).valid);

    chain[3].message.payload.push(' ');
    let check = verify_audit_chain(&chain);
    assert_eq!((check.valid, check.first_bad_seq), (false, Some(3)));
}

#[test]
fn ema_worked_steps() {
    let mut ledger = CredibilityLedger::new(0.1);
    let now = common::at(0);
    let mut scores = Vec::new();
    for verdict in [Verdict::Verified, Verdict::Rejected, Verdict::Verified, Verdict::NeedsReview] {
        ledger.update(["a.example", "a.example"], verdict, now);
        scores.push(ledger.get("a.example").unwrap().score);
    }
    let want = [0.55, 0.495, 0.5455, 0.5455];
    for (s, w) in scores.iter().zip(want) {
        assert!((s - w).abs() < 1e-12, "{scores:?}");
    }
    assert_eq!(ledger.get("a.example").unwrap().n_updates, 3);
}

#[test]
fn authenticity_recomputed() {
    let now = common::at(0);
    let mut table = ReputationTable::new();
    table.insert_entry(
        "gazette.example",
        ReputationEntry { reputation: 0.8, category: SourceCategory::News, citations: 5 },
    );
    let mut index = Index::new(IndexConfig::default()).unwrap();
    index.set_reputation_table(table);
    let doc = |id: &str, domain: &str, body: &str, days: i64| Document {
        id: id.into(),
        url: format!("https://{domain}/{id}"),
        domain: domain.into(),
        title: String::new(),
        author: None,
        published_at: now - Duration::days(days),
        modified_at: None,
        body: body.into(),
        content_kind: ContentKind::Plain,
    };
    index.add(doc("p", "gazette.example", "plain report text", 73)).unwrap();
    index.add(doc("q", "blog.example", "as gazette.example reported earlier", 0)).unwrap();
    index.add(doc("r", "other.example", "see gazette.example", 400)).unwrap();

    let want = 0.5 * 0.8 + 0.25 * (-73.0f64 / 365.0).exp() + 0.25 * (7.0 / 17.0);
    let got = index.authenticity_of("p", now).unwrap();
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");

    let unknown = index.authenticity_of("q", now).unwrap();
    let unknown_rep = index.reputation_table().reputation("blog.example");
    let want = 0.5 * unknown_rep + 0.25 + 0.0;
    assert!((unknown - want).abs() < 1e-12, "{unknown} vs {want}");
}
