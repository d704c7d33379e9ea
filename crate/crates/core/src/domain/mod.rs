//! Shared vocabulary of the pipeline and its canonical serialization.
//!
//! Every type here is an immutable value. The canonical form is compact JSON
//! with struct fields in declaration order, maps keyed in sorted order and
//! timestamps rendered as RFC 3339 in UTC with a `Z` suffix. The same text is
//! the wire and file representation, and its SHA-256 feeds the audit chain.

mod canonical;
mod label;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use canonical::{canonical_bytes, from_canonical_bytes, sha256, timestamp, CanonicalError};
pub use label::{
    parse_label, DistributionError, LabelDistribution, MisinfoLabel, UnknownLabel,
    DISTRIBUTION_TOLERANCE,
};

/// Message schema version carried by every [`AgentMessage`].
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Tone {
    #[default]
    Neutral,
    Formal,
    Accessible,
}

impl Tone {
    pub fn name(self) -> &'static str {
        match self {
            Tone::Neutral => "neutral",
            Tone::Formal => "formal",
            Tone::Accessible => "accessible",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Prose,
    Bullet,
    #[default]
    Report,
}

/// Preferences supplied with a claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserInstructions {
    pub tone: Tone,
    pub format: OutputFormat,
    pub min_independent_sources: u32,
    pub min_authenticity: f64,
}

impl Default for UserInstructions {
    fn default() -> Self {
        Self {
            tone: Tone::Neutral,
            format: OutputFormat::Report,
            min_independent_sources: 2,
            min_authenticity: 0.6,
        }
    }
}

impl UserInstructions {
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.min_independent_sources < 1 {
            out.push(Violation::new("min_independent_sources", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.min_authenticity) {
            out.push(Violation::new("min_authenticity", "must lie in [0, 1]"));
        }
        out
    }
}

/// A statement under analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Claim {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub topic_hints: Vec<String>,
    #[serde(with = "timestamp")]
    pub received_at: DateTime<Utc>,
    #[serde(default)]
    pub instructions: Option<UserInstructions>,
}

impl Claim {
    pub fn new(id: impl Into<String>, text: impl Into<String>, received_at: DateTime<Utc>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            topic_hints: Vec::new(),
            received_at,
            instructions: None,
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.id.trim().is_empty() {
            out.push(Violation::new("id", "id empty"));
        }
        if self.text.trim().is_empty() {
            out.push(Violation::new("text", "text empty"));
        }
        if let Some(instr) = &self.instructions {
            out.extend(instr.violations());
        }
        out
    }

    /// Instructions in effect, falling back to defaults.
    pub fn effective_instructions(&self) -> UserInstructions {
        self.instructions.clone().unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContentKind {
    Html,
    Pdf,
    Plain,
}

/// Normalized source content with provenance metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub id: String,
    pub url: String,
    pub domain: String,
    pub title: String,
    #[serde(default)]
    pub author: Option<String>,
    #[serde(with = "timestamp")]
    pub published_at: DateTime<Utc>,
    #[serde(default, with = "timestamp::option")]
    pub modified_at: Option<DateTime<Utc>>,
    pub body: String,
    pub content_kind: ContentKind,
}

/// One broken rule on a value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    pub fn new(field: &str, rule: &str) -> Self {
        Self {
            field: field.to_string(),
            rule: rule.to_string(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Validation {
    Ok,
    Invalid(Vec<Violation>),
}

impl Validation {
    pub fn is_ok(&self) -> bool {
        matches!(self, Validation::Ok)
    }

    pub fn violations(&self) -> &[Violation] {
        match self {
            Validation::Ok => &[],
            Validation::Invalid(v) => v,
        }
    }
}

pub fn validate_document(doc: &Document) -> Validation {
    let mut v = Vec::new();
    if doc.id.trim().is_empty() {
        v.push(Violation::new("id", "id empty"));
    }
    if doc.domain.is_empty() {
        v.push(Violation::new("domain", "domain empty"));
    } else if doc.domain != doc.domain.to_lowercase() {
        v.push(Violation::new("domain", "domain not lowercase"));
    }
    if doc.body.trim().is_empty() {
        v.push(Violation::new("body", "body empty"));
    }
    if let Some(modified) = doc.modified_at {
        if modified < doc.published_at {
            v.push(Violation::new("modified_at", "modified_at precedes published_at"));
        }
    }
    if v.is_empty() {
        Validation::Ok
    } else {
        Validation::Invalid(v)
    }
}

/// A contiguous window of a document, the unit of retrieval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub id: String,
    pub doc_id: String,
    pub ordinal: u32,
    pub text: String,
    pub embedding: Vec<f64>,
}

/// A ranked chunk with its scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceItem {
    pub chunk_id: String,
    pub doc_id: String,
    pub authenticity: f64,
    pub alignment: f64,
    pub final_score: f64,
    pub rank: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineageEdge {
    pub from: String,
    pub to: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeTimes {
    #[serde(with = "timestamp")]
    pub published_at: DateTime<Utc>,
    #[serde(default, with = "timestamp::option")]
    pub modified_at: Option<DateTime<Utc>>,
}

/// Timestamp-ordered similarity graph with an identified origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineageGraph {
    pub nodes: BTreeSet<String>,
    pub edges: Vec<LineageEdge>,
    pub origin_id: String,
    /// Publication and modification times per node.
    pub node_times: BTreeMap<String, NodeTimes>,
}

impl LineageGraph {
    /// Checks the structural invariants: edges stay inside the node set,
    /// point forward in time (ties broken by id) and the origin is earliest.
    pub fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if !self.nodes.contains(&self.origin_id) {
            v.push(Violation::new("origin_id", "origin not a node"));
        }
        let key = |id: &str| self.node_times.get(id).map(|t| (t.published_at, id.to_string()));
        for e in &self.edges {
            if !self.nodes.contains(&e.from) || !self.nodes.contains(&e.to) {
                v.push(Violation::new("edges", "edge endpoint outside node set"));
                continue;
            }
            match (key(&e.from), key(&e.to)) {
                (Some(a), Some(b)) if a < b => {}
                _ => v.push(Violation::new("edges", "edge not ordered by publication time")),
            }
        }
        if let Some(origin) = key(&self.origin_id) {
            if self.nodes.iter().filter_map(|n| key(n)).any(|k| k < origin) {
                v.push(Violation::new("origin_id", "origin not earliest node"));
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Citation {
    pub doc_id: String,
    pub url: String,
    pub domain: String,
    pub authenticity: f64,
    #[serde(with = "timestamp")]
    pub published_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correction {
    pub claim_id: String,
    pub label: MisinfoLabel,
    pub corrected_statement: String,
    pub citations: Vec<Citation>,
    pub confidence: f64,
    pub lineage: LineageGraph,
    /// Degradations that happened while producing this value, e.g. a
    /// template fallback after a backend failure.
    #[serde(default)]
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    CitationsExist,
    ReliabilityThreshold,
    LabelAlignment,
    FormatSpec,
    LogicalConsistency,
    Tone,
}

impl CheckName {
    pub const ALL: [CheckName; 6] = [
        CheckName::CitationsExist,
        CheckName::ReliabilityThreshold,
        CheckName::LabelAlignment,
        CheckName::FormatSpec,
        CheckName::LogicalConsistency,
        CheckName::Tone,
    ];

    /// The first four checks gate the verdict; the rest are advisory.
    pub fn is_mandatory(self) -> bool {
        !matches!(self, CheckName::LogicalConsistency | CheckName::Tone)
    }

    pub fn name(self) -> &'static str {
        match self {
            CheckName::CitationsExist => "citations_exist",
            CheckName::ReliabilityThreshold => "reliability_threshold",
            CheckName::LabelAlignment => "label_alignment",
            CheckName::FormatSpec => "format_spec",
            CheckName::LogicalConsistency => "logical_consistency",
            CheckName::Tone => "tone",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: CheckName,
    pub passed: bool,
    pub mandatory: bool,
    pub detail: String,
}

impl CheckResult {
    pub fn new(name: CheckName, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name,
            passed,
            mandatory: name.is_mandatory(),
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Verified,
    Rejected,
    NeedsReview,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub claim_id: String,
    pub checks: Vec<CheckResult>,
    pub verdict: Verdict,
    pub final_text: String,
    /// The correction the checks were run against.
    pub correction: Correction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Classify,
    Extract,
    Correct,
    Verify,
    Done,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Classify => "classify",
            Stage::Extract => "extract",
            Stage::Correct => "correct",
            Stage::Verify => "verify",
            Stage::Done => "done",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentName {
    Orchestrator,
    Classifier,
    Indexer,
    Extractor,
    Corrector,
    Verifier,
    Client,
}

/// Envelope for every inter-agent handoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentMessage {
    pub message_id: String,
    pub correlation_id: String,
    pub sender: AgentName,
    pub recipient: AgentName,
    pub stage: Stage,
    pub payload_kind: String,
    /// Canonical serialization of the payload value.
    pub payload: String,
    #[serde(with = "timestamp")]
    pub sent_at: DateTime<Utc>,
    pub schema_version: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditRecord {
    pub seq: u64,
    pub prev_hash: String,
    pub payload_hash: String,
    pub message: AgentMessage,
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn doc() -> Document {
        Document {
            id: "d1".into(),
            url: "https://stats.example.gov/a".into(),
            domain: "stats.example.gov".into(),
            title: "A".into(),
            author: None,
            published_at: Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(),
            modified_at: None,
            body: "some body".into(),
            content_kind: ContentKind::Plain,
        }
    }

    #[test]
    fn well_formed_document_is_ok() {
        assert!(validate_document(&doc()).is_ok());
    }

    #[test]
    fn modified_before_published_is_flagged() {
        let mut d = doc();
        d.modified_at = Some(d.published_at - chrono::Duration::days(1));
        let v = validate_document(&d);
        assert_eq!(v.violations().len(), 1);
        assert_eq!(v.violations()[0].rule, "modified_at precedes published_at");
        assert_eq!(v.violations()[0].field, "modified_at");
    }

    #[test]
    fn empty_body_is_flagged() {
        let mut d = doc();
        d.body = "   ".into();
        let v = validate_document(&d);
        assert_eq!(v.violations()[0].rule, "body empty");
    }

    #[test]
    fn uppercase_domain_is_flagged() {
        let mut d = doc();
        d.domain = "Stats.example.gov".into();
        assert!(!validate_document(&d).is_ok());
    }

    #[test]
    fn mandatory_checks() {
        let mandatory: Vec<_> = CheckName::ALL.iter().filter(|c| c.is_mandatory()).collect();
        assert_eq!(mandatory.len(), 4);
        assert!(!CheckName::Tone.is_mandatory());
    }
}
