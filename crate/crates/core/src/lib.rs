//! Misinformation lifecycle engine.
//!
//! A claim flows through five cooperating agents coordinated by a central
//! orchestrator:
//!
//! * [`classifier`] labels the claim against a closed misinformation taxonomy
//!   by ensemble voting over model backends and a keyword rule voter.
//! * [`indexer`] maintains the trusted corpus: normalization, chunking,
//!   embeddings, a BM25 inverted index, a vector index and source profiles.
//! * [`extractor`] plans a label-aware query, fuses keyword and vector
//!   retrieval, re-ranks by alignment and authenticity, and traces lineage.
//! * [`corrector`] cross-validates evidence, widens the search when too few
//!   independent sources agree, and writes a cited correction.
//! * [`verifier`] runs the quality checklist, renders the final report and
//!   keeps the per-domain credibility ledger.
//!
//! Every inter-agent handoff is recorded in a hash-chained audit trail
//! ([`orchestrator::audit`]). All model calls go through [`backend`], which
//! ships a deterministic scripted mock so the whole pipeline runs offline.
//! [`harness`] generates synthetic corpora with known ground truth.

pub mod backend;
pub mod classifier;
pub mod clock;
pub mod corrector;
pub mod domain;
pub mod extractor;
pub mod harness;
pub mod indexer;
pub mod orchestrator;
pub mod sync;
pub mod text;
pub mod verifier;

pub use domain::{
    Claim, Document, EvidenceItem, LabelDistribution, LineageGraph, MisinfoLabel,
    UserInstructions,
};
