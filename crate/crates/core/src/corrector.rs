//! The Corrector agent: stance assessment of ranked evidence, conditional
//! search expansion, correction generation and citation assembly.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{ChatRequest, SharedBackend};
use crate::domain::{validate_document, Citation, Claim, Correction, Document, EvidenceItem, LineageGraph, MisinfoLabel, UserInstructions};
use crate::extractor::{ExtractError, ExtractorAgent, QueryPlan};
use crate::indexer::{cosine, Index, SharedIndex};
use crate::text::{collapse_whitespace, tokenize};

pub const NO_CORRECTION_MARKER: &str = "[no correction needed]";

pub const FLAG_STANCE_FALLBACK: &str = "stance_rule_fallback";
pub const FLAG_TEMPLATE_CORRECTION: &str = "template_correction";
pub const FLAG_EXTERNAL_SEARCH_FAILED: &str = "external_search_failed";

const NEGATION_MARKERS: &[&str] = &[
    "not", "no", "never", "false", "myth", "debunked", "incorrect", "untrue", "denied", "nor",
];

const SNIPPET_CHARS: usize = 300;

#[derive(Debug, Error)]
pub enum CorrectError {
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error("invalid corrector config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectionPolicy {
    #[serde(default = "d_theta")]
    pub theta_min_authenticity: f64,
    #[serde(default = "d_n_min")]
    pub n_min_independent: u32,
    #[serde(default = "d_factor")]
    pub k_expand_factor: usize,
    #[serde(default = "d_k_max")]
    pub k_max: usize,
    #[serde(default)]
    pub external_search_enabled: bool,
    #[serde(default = "d_agree")]
    pub stance_agree_threshold: f64,
}

fn d_theta() -> f64 {
    0.6
}
fn d_n_min() -> u32 {
    2
}
fn d_factor() -> usize {
    2
}
fn d_k_max() -> usize {
    80
}
fn d_agree() -> f64 {
    0.55
}

impl Default for CorrectionPolicy {
    fn default() -> Self {
        Self {
            theta_min_authenticity: d_theta(),
            n_min_independent: d_n_min(),
            k_expand_factor: d_factor(),
            k_max: d_k_max(),
            external_search_enabled: false,
            stance_agree_threshold: d_agree(),
        }
    }
}

impl CorrectionPolicy {
    pub fn validate(&self, initial_k: usize) -> Result<(), CorrectError> {
        if !(0.0..=1.0).contains(&self.theta_min_authenticity) {
            return Err(CorrectError::Config("theta_min_authenticity must be in [0, 1]".into()));
        }
        if self.k_expand_factor < 2 {
            return Err(CorrectError::Config("k_expand_factor must be at least 2".into()));
        }
        if self.k_max < initial_k {
            return Err(CorrectError::Config(format!("k_max {} below initial k {initial_k}", self.k_max)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stance {
    Supports,
    Contradicts,
    Neutral,
}

pub fn parse_stance(answer: &str) -> Option<Stance> {
    let first = tokenize(answer).into_iter().next()?;
    match first.as_str() {
        "supports" | "support" | "supported" => Some(Stance::Supports),
        "contradicts" | "contradict" | "contradicted" | "refutes" => Some(Stance::Contradicts),
        "neutral" | "unrelated" => Some(Stance::Neutral),
        _ => None,
    }
}

fn has_negation(text: &str) -> bool {
    tokenize(text).iter().any(|t| NEGATION_MARKERS.contains(&t.as_str()))
}

/// Offline stance rule: close enough and no negation mismatch means
/// support; everything else is neutral.
pub fn rule_stance(claim_text: &str, claim_vec: &[f64], chunk_text: &str, chunk_vec: &[f64], threshold: f64) -> Stance {
    if cosine(claim_vec, chunk_vec) >= threshold && has_negation(claim_text) == has_negation(chunk_text) {
        Stance::Supports
    } else {
        Stance::Neutral
    }
}

pub fn stance_request(claim_text: &str, evidence_text: &str) -> ChatRequest {
    ChatRequest::with_system(
        "Decide whether the evidence supports the claim, contradicts it, or is neutral. \
         Answer with one word: supports, contradicts or neutral.",
        format!("Claim: {claim_text}\nEvidence: {evidence_text}"),
    )
    .max_tokens(4)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportAssessment {
    pub supporting: Vec<EvidenceItem>,
    pub contradicting: Vec<EvidenceItem>,
    /// Distinct domains at or above the authenticity threshold among the
    /// evidence that backs the correction: contradicting items for a
    /// misinformation label, supporting items otherwise.
    pub independent_domains: u32,
    pub expanded: bool,
    /// Retrieval depths tried during expansion, in order.
    #[serde(default)]
    pub depths_tried: Vec<usize>,
    #[serde(default)]
    pub flags: Vec<String>,
}

impl SupportAssessment {
    pub fn backing(&self, label: MisinfoLabel) -> &[EvidenceItem] {
        if label.is_misinformation() {
            &self.contradicting
        } else {
            &self.supporting
        }
    }

    pub fn is_sufficient(&self, policy: &CorrectionPolicy) -> bool {
        self.independent_domains >= policy.n_min_independent
    }
}

/// Queries an outside search service for more documents.
pub trait ExternalSearch: Send + Sync {
    fn search(&self, terms: &[String], max_results: usize) -> Result<Vec<Document>, String>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalSearchConfig {
    pub endpoint: String,
    #[serde(default = "d_search_timeout")]
    pub timeout_ms: u64,
    #[serde(default = "d_max_results")]
    pub max_results: usize,
}

fn d_search_timeout() -> u64 {
    10_000
}
fn d_max_results() -> usize {
    10
}

/// POSTs `{"terms": [..], "max_results": n}` and expects a JSON array of
/// documents back.
pub struct HttpExternalSearch {
    endpoint: String,
    agent: ureq::Agent,
}

impl HttpExternalSearch {
    pub fn new(cfg: &ExternalSearchConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(cfg.timeout_ms)))
            .build()
            .into();
        Self { endpoint: cfg.endpoint.clone(), agent }
    }
}

impl ExternalSearch for HttpExternalSearch {
    fn search(&self, terms: &[String], max_results: usize) -> Result<Vec<Document>, String> {
        let body = serde_json::json!({ "terms": terms, "max_results": max_results });
        let mut resp = self.agent.post(&self.endpoint).send_json(&body).map_err(|e| e.to_string())?;
        resp.body_mut().read_json::<Vec<Document>>().map_err(|e| e.to_string())
    }
}

/// Outcome of the correct stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionOutcome {
    pub correction: Correction,
    pub assessment: SupportAssessment,
    /// Evidence after any expansion.
    pub evidence: Vec<EvidenceItem>,
}

#[derive(Clone, Default)]
pub struct CorrectorAgent {
    pub policy: CorrectionPolicy,
    pub stance_backend: Option<SharedBackend>,
    pub generator: Option<SharedBackend>,
    pub external: Option<Arc<dyn ExternalSearch>>,
    pub external_max_results: usize,
}

struct StanceCache {
    stances: HashMap<String, Stance>,
    fell_back: bool,
}

impl CorrectorAgent {
    pub fn new(policy: CorrectionPolicy) -> Self {
        Self { policy, external_max_results: d_max_results(), ..Default::default() }
    }

    pub fn with_stance_backend(mut self, backend: SharedBackend) -> Self {
        self.stance_backend = Some(backend);
        self
    }

    pub fn with_generator(mut self, backend: SharedBackend) -> Self {
        self.generator = Some(backend);
        self
    }

    pub fn with_external_search(mut self, client: Arc<dyn ExternalSearch>, max_results: usize) -> Self {
        self.external = Some(client);
        self.external_max_results = max_results;
        self
    }

    fn stance(&self, index: &Index, claim: &Claim, claim_vec: &[f64], item: &EvidenceItem, cache: &mut StanceCache) -> Stance {
        if let Some(s) = cache.stances.get(&item.chunk_id) {
            return *s;
        }
        let Some(chunk) = index.chunk(&item.chunk_id) else {
            return Stance::Neutral;
        };
        let from_backend = self
            .stance_backend
            .as_ref()
            .and_then(|b| b.complete(&stance_request(&claim.text, &chunk.text)).ok())
            .and_then(|answer| parse_stance(&answer));
        let stance = match from_backend {
            Some(s) => s,
            None => {
                cache.fell_back |= self.stance_backend.is_some();
                rule_stance(&claim.text, claim_vec, &chunk.text, &chunk.embedding, self.policy.stance_agree_threshold)
            }
        };
        cache.stances.insert(item.chunk_id.clone(), stance);
        stance
    }

    fn assess(
        &self,
        index: &Index,
        claim: &Claim,
        label: MisinfoLabel,
        evidence: &[EvidenceItem],
        cache: &mut StanceCache,
    ) -> Result<SupportAssessment, CorrectError> {
        let claim_vec = index.embed(&claim.text).map_err(ExtractError::from)?;
        let mut supporting = Vec::new();
        let mut contradicting = Vec::new();
        for item in evidence {
            match self.stance(index, claim, &claim_vec, item, cache) {
                Stance::Supports => supporting.push(item.clone()),
                Stance::Contradicts => contradicting.push(item.clone()),
                Stance::Neutral => {}
            }
        }
        let backing = if label.is_misinformation() { &contradicting } else { &supporting };
        let domains: BTreeSet<&str> = backing
            .iter()
            .filter(|e| e.authenticity >= self.policy.theta_min_authenticity)
            .filter_map(|e| index.document(&e.doc_id).map(|d| d.domain.as_str()))
            .collect();
        let mut flags = Vec::new();
        if cache.fell_back {
            flags.push(FLAG_STANCE_FALLBACK.to_string());
        }
        Ok(SupportAssessment {
            independent_domains: domains.len() as u32,
            supporting,
            contradicting,
            expanded: false,
            depths_tried: Vec::new(),
            flags,
        })
    }

    /// Assesses `evidence` and widens retrieval while too few independent
    /// domains back the correction.
    pub fn assess_and_expand(
        &self,
        index: &SharedIndex,
        extractor: &ExtractorAgent,
        claim: &Claim,
        plan: &QueryPlan,
        evidence: Vec<EvidenceItem>,
        now: DateTime<Utc>,
    ) -> Result<(Vec<EvidenceItem>, SupportAssessment), CorrectError> {
        let label = plan.label;
        let mut cache = StanceCache { stances: HashMap::new(), fell_back: false };
        let mut evidence = evidence;
        let mut assessment = self.assess(&index.read(), claim, label, &evidence, &mut cache)?;
        let mut depths = Vec::new();
        let mut k = plan.k;
        while !assessment.is_sufficient(&self.policy) && k < self.policy.k_max {
            k = (k * self.policy.k_expand_factor).min(self.policy.k_max);
            depths.push(k);
            let deeper = QueryPlan { k, ..plan.clone() };
            let guard = index.read();
            evidence = extractor.gather(&guard, claim, &deeper, now)?;
            assessment = self.assess(&guard, claim, label, &evidence, &mut cache)?;
        }
        let mut extra_flags = Vec::new();
        if !assessment.is_sufficient(&self.policy) && self.policy.external_search_enabled {
            if let Some(client) = &self.external {
                depths.push(k);
                match client.search(&plan.claim_terms, self.external_max_results) {
                    Ok(docs) => {
                        let mut w = index.write();
                        for doc in docs {
                            if validate_document(&doc).is_ok() && !w.contains_document(&doc.id) {
                                let _ = w.add(doc);
                            }
                        }
                    }
                    Err(e) => extra_flags.push(format!("{FLAG_EXTERNAL_SEARCH_FAILED}: {e}")),
                }
                let guard = index.read();
                evidence = extractor.gather(&guard, claim, &QueryPlan { k, ..plan.clone() }, now)?;
                assessment = self.assess(&guard, claim, label, &evidence, &mut cache)?;
            }
        }
        assessment.expanded = !depths.is_empty();
        assessment.depths_tried = depths;
        assessment.flags.extend(extra_flags);
        Ok((evidence, assessment))
    }

    /// Builds the correction from an assessment.
    #[allow(clippy::too_many_arguments)]
    pub fn generate_correction(
        &self,
        index: &Index,
        claim: &Claim,
        label: MisinfoLabel,
        classifier_confidence: f64,
        assessment: &SupportAssessment,
        lineage: LineageGraph,
        instructions: &UserInstructions,
    ) -> Correction {
        let citations = build_citations(index, assessment.backing(label), instructions);
        let confidence = correction_confidence(
            assessment.independent_domains,
            self.policy.n_min_independent,
            classifier_confidence,
        );
        let mut flags = assessment.flags.clone();
        let corrected_statement = if label.is_misinformation() {
            let generated = self.generator.as_ref().and_then(|b| {
                b.complete(&correction_request(index, claim, label, &assessment.contradicting))
                    .ok()
                    .map(|t| collapse_whitespace(&t))
                    .filter(|t| !t.is_empty())
            });
            generated.unwrap_or_else(|| {
                flags.push(FLAG_TEMPLATE_CORRECTION.to_string());
                template_correction(&citations)
            })
        } else {
            format!("{} {NO_CORRECTION_MARKER}", claim.text)
        };
        Correction {
            claim_id: claim.id.clone(),
            label,
            corrected_statement,
            citations,
            confidence,
            lineage,
            flags,
        }
    }

    /// Stance assessment, expansion and generation in one step.
    #[allow(clippy::too_many_arguments)]
    pub fn correct(
        &self,
        index: &SharedIndex,
        extractor: &ExtractorAgent,
        claim: &Claim,
        plan: &QueryPlan,
        evidence: Vec<EvidenceItem>,
        lineage: LineageGraph,
        classifier_confidence: f64,
        now: DateTime<Utc>,
    ) -> Result<CorrectionOutcome, CorrectError> {
        let (evidence, assessment) = self.assess_and_expand(index, extractor, claim, plan, evidence, now)?;
        let correction = self.generate_correction(
            &index.read(),
            claim,
            plan.label,
            classifier_confidence,
            &assessment,
            lineage,
            &claim.effective_instructions(),
        );
        Ok(CorrectionOutcome { correction, assessment, evidence })
    }
}

pub fn correction_confidence(independent: u32, n_min: u32, classifier_confidence: f64) -> f64 {
    let coverage = if n_min == 0 { 1.0 } else { (f64::from(independent) / f64::from(n_min)).min(1.0) };
    (coverage * classifier_confidence).clamp(0.0, 1.0)
}

/// Citations ordered by authenticity (ties by doc id), one per document,
/// at most `max(min_independent_sources, 3)`.
pub fn build_citations(index: &Index, items: &[EvidenceItem], instructions: &UserInstructions) -> Vec<Citation> {
    let mut sorted: Vec<&EvidenceItem> = items.iter().collect();
    sorted.sort_by(|a, b| b.authenticity.total_cmp(&a.authenticity).then_with(|| a.doc_id.cmp(&b.doc_id)));
    let limit = (instructions.min_independent_sources as usize).max(3);
    let mut seen = BTreeSet::new();
    sorted
        .into_iter()
        .filter(|e| seen.insert(e.doc_id.as_str()))
        .filter_map(|e| {
            let d = index.document(&e.doc_id)?;
            Some(Citation {
                doc_id: d.id.clone(),
                url: d.url.clone(),
                domain: d.domain.clone(),
                authenticity: e.authenticity,
                published_at: d.published_at,
            })
        })
        .take(limit)
        .collect()
}

fn snippet(text: &str) -> String {
    let flat = collapse_whitespace(text);
    match flat.char_indices().nth(SNIPPET_CHARS) {
        Some((cut, _)) => format!("{}...", &flat[..cut]),
        None => flat,
    }
}

fn correction_request(index: &Index, claim: &Claim, label: MisinfoLabel, contradicting: &[EvidenceItem]) -> ChatRequest {
    let mut user = format!("Claim: {}\nLabel: {label}\nEvidence:\n", claim.text);
    for item in contradicting.iter().take(5) {
        if let Some(chunk) = index.chunk(&item.chunk_id) {
            user.push_str(&format!("- {}\n", snippet(&chunk.text)));
        }
    }
    ChatRequest::with_system(
        "Write a short, factual correction of the claim based only on the evidence.",
        user,
    )
    .max_tokens(256)
}

pub fn template_correction(citations: &[Citation]) -> String {
    let domains: Vec<&str> = citations.iter().map(|c| c.domain.as_str()).collect();
    format!("Claim contradicted by {} sources: {}.", citations.len(), domains.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{MockRule, ScriptedMock};
    use crate::extractor::tests::{at, doc};
    use crate::extractor::ExtractorConfig;
    use crate::indexer::{IndexConfig, ReputationTable, SourceCategory};

    fn table() -> ReputationTable {
        let mut t = ReputationTable::from_json(
            r#"{"a.org": {"reputation": 0.9, "category": "factcheck", "citations": 50},
                "b.org": {"reputation": 0.9, "category": "news", "citations": 50}}"#,
        )
        .unwrap();
        t.insert("rumor.net", 0.1, SourceCategory::Other);
        t
    }

    fn index() -> SharedIndex {
        let mut ix = Index::new(IndexConfig::default()).unwrap();
        ix.set_reputation_table(table());
        ix.add(doc("r1", "rumor.net", "the bridge collapsed because of the new paint", 0)).unwrap();
        ix.add(doc("r2", "rumor.net", "the bridge collapsed because of the new paint again", 1)).unwrap();
        ix.add(doc("t1", "a.org", "Official records confirm the bridge is standing and the paint is fine", 2)).unwrap();
        ix.add(doc("t2", "b.org", "Official records confirm inspectors found the bridge standing", 3)).unwrap();
        ix.add(doc("t3", "a.org", "Official records confirm the bridge paint passed review", 4)).unwrap();
        ix.into_shared()
    }

    fn stance_mock() -> SharedBackend {
        Arc::new(ScriptedMock::new(
            "stance",
            vec![MockRule::contains("Official records confirm", "contradicts")],
            Some("neutral".into()),
        ))
    }

    fn item(doc_id: &str, auth: f64) -> EvidenceItem {
        EvidenceItem {
            chunk_id: format!("{doc_id}#0"),
            doc_id: doc_id.into(),
            authenticity: auth,
            alignment: 0.5,
            final_score: 0.5,
            rank: 1,
        }
    }

    fn claim() -> Claim {
        Claim::new("c1", "the bridge collapsed because of the new paint", at(10))
    }

    #[test]
    fn stance_parsing() {
        assert_eq!(parse_stance(" Contradicts."), Some(Stance::Contradicts));
        assert_eq!(parse_stance("SUPPORTS"), Some(Stance::Supports));
        assert_eq!(parse_stance("maybe"), None);
    }

    #[test]
    fn rule_stance_respects_negation() {
        let v = [1.0, 0.0];
        assert_eq!(rule_stance("the dam is safe", &v, "the dam is safe", &v, 0.55), Stance::Supports);
        assert_eq!(rule_stance("the dam is safe", &v, "the dam is not safe", &v, 0.55), Stance::Neutral);
        assert_eq!(rule_stance("x", &v, "x", &[0.0, 1.0], 0.55), Stance::Neutral);
    }

    #[test]
    fn neutral_everywhere_counts_nothing() {
        let ix = index();
        let agent = CorrectorAgent::new(CorrectionPolicy::default())
            .with_stance_backend(Arc::new(ScriptedMock::constant("n", "neutral")));
        let mut cache = StanceCache { stances: HashMap::new(), fell_back: false };
        let a = agent
            .assess(&ix.read(), &claim(), MisinfoLabel::FactualError, &[item("t1", 0.9), item("r1", 0.2)], &mut cache)
            .unwrap();
        assert_eq!(a.independent_domains, 0);
        assert!(a.contradicting.is_empty() && a.supporting.is_empty());
    }

    #[test]
    fn independent_domains_are_distinct() {
        let ix = index();
        let agent = CorrectorAgent::new(CorrectionPolicy::default()).with_stance_backend(stance_mock());
        let mut cache = StanceCache { stances: HashMap::new(), fell_back: false };
        let two = agent
            .assess(&ix.read(), &claim(), MisinfoLabel::FactualError, &[item("t1", 0.7), item("t2", 0.7)], &mut cache)
            .unwrap();
        assert_eq!(two.independent_domains, 2);
        let one = agent
            .assess(&ix.read(), &claim(), MisinfoLabel::FactualError, &[item("t1", 0.7), item("t3", 0.7)], &mut cache)
            .unwrap();
        assert_eq!(one.independent_domains, 1);
        let weak = agent
            .assess(&ix.read(), &claim(), MisinfoLabel::FactualError, &[item("t1", 0.5), item("t2", 0.7)], &mut cache)
            .unwrap();
        assert_eq!(weak.independent_domains, 1);
    }

    #[test]
    fn expansion_depths() {
        let ix = index();
        let extractor = ExtractorAgent::new(ExtractorConfig { k: 20, ..Default::default() }).unwrap();
        let agent = CorrectorAgent::new(CorrectionPolicy::default())
            .with_stance_backend(Arc::new(ScriptedMock::constant("n", "neutral")));
        let plan = extractor.plan(&claim(), MisinfoLabel::FactualError);
        let (_, a) = agent.assess_and_expand(&ix, &extractor, &claim(), &plan, vec![], at(10)).unwrap();
        assert_eq!(a.depths_tried, [40, 80]);
        assert!(a.expanded);
        assert!(!a.is_sufficient(&agent.policy));
    }

    #[test]
    fn sufficient_needs_no_expansion() {
        let ix = index();
        let extractor = ExtractorAgent::default();
        let agent = CorrectorAgent::new(CorrectionPolicy::default()).with_stance_backend(stance_mock());
        let c = claim();
        let plan = extractor.plan(&c, MisinfoLabel::FactualError);
        let evidence = extractor.gather(&ix.read(), &c, &plan, at(10)).unwrap();
        let (_, a) = agent.assess_and_expand(&ix, &extractor, &c, &plan, evidence, at(10)).unwrap();
        assert!(!a.expanded);
        assert_eq!(a.independent_domains, 2);
    }

    struct Feed;
    impl ExternalSearch for Feed {
        fn search(&self, _: &[String], _: usize) -> Result<Vec<Document>, String> {
            Ok(vec![doc("ext1", "b.org", "Official records confirm the bridge paint was never a problem", 5)])
        }
    }

    #[test]
    fn external_search_ingests_documents() {
        let ix = index();
        let extractor = ExtractorAgent::default();
        let policy = CorrectionPolicy { external_search_enabled: true, n_min_independent: 3, ..Default::default() };
        let agent = CorrectorAgent::new(policy).with_stance_backend(stance_mock()).with_external_search(Arc::new(Feed), 5);
        let c = claim();
        let plan = extractor.plan(&c, MisinfoLabel::FactualError);
        let (_, a) = agent.assess_and_expand(&ix, &extractor, &c, &plan, vec![], at(10)).unwrap();
        assert!(ix.read().contains_document("ext1"));
        assert!(a.expanded);
    }

    #[test]
    fn confidence_formula() {
        assert!((correction_confidence(1, 2, 0.9) - 0.45).abs() < 1e-12);
        assert_eq!(correction_confidence(5, 2, 0.8), 0.8);
        assert_eq!(correction_confidence(0, 0, 0.7), 0.7);
    }

    #[test]
    fn citations_sorted_and_deduplicated() {
        let ix = index();
        let items = [item("t2", 0.7), item("t1", 0.9), item("t3", 0.7), item("t1", 0.9), item("r1", 0.2)];
        let cites = build_citations(&ix.read(), &items, &UserInstructions::default());
        let auth: Vec<f64> = cites.iter().map(|c| c.authenticity).collect();
        assert_eq!(auth, [0.9, 0.7, 0.7]);
        assert_eq!(cites[0].doc_id, "t1");
    }

    #[test]
    fn not_misinformation_branch() {
        let ix = index();
        let agent = CorrectorAgent::new(CorrectionPolicy::default());
        let a = SupportAssessment {
            supporting: vec![item("t1", 0.9)],
            contradicting: vec![item("t2", 0.9)],
            independent_domains: 1,
            expanded: false,
            depths_tried: vec![],
            flags: vec![],
        };
        let lineage = crate::extractor::trace_lineage(&ix.read(), "t1", 0.8).unwrap();
        let c = agent.generate_correction(&ix.read(), &claim(), MisinfoLabel::NotMisinformation, 1.0, &a, lineage, &UserInstructions::default());
        assert!(c.corrected_statement.ends_with(NO_CORRECTION_MARKER));
        assert_eq!(c.citations.len(), 1);
        assert_eq!(c.citations[0].doc_id, "t1");
    }

    #[test]
    fn template_fallback_is_flagged() {
        let ix = index();
        let agent = CorrectorAgent::new(CorrectionPolicy::default());
        let a = SupportAssessment {
            supporting: vec![],
            contradicting: vec![item("t1", 0.9), item("t2", 0.8)],
            independent_domains: 2,
            expanded: false,
            depths_tried: vec![],
            flags: vec![],
        };
        let lineage = crate::extractor::trace_lineage(&ix.read(), "r1", 0.8).unwrap();
        let c = agent.generate_correction(&ix.read(), &claim(), MisinfoLabel::FactualError, 0.9, &a, lineage, &UserInstructions::default());
        assert_eq!(c.corrected_statement, "Claim contradicted by 2 sources: a.org, b.org.");
        assert!(c.flags.contains(&FLAG_TEMPLATE_CORRECTION.to_string()));
        assert!((c.confidence - 0.9).abs() < 1e-12);

        let agent = agent.with_generator(Arc::new(ScriptedMock::constant("gen", "The bridge is standing.")));
        let lineage = crate::extractor::trace_lineage(&ix.read(), "r1", 0.8).unwrap();
        let c = agent.generate_correction(&ix.read(), &claim(), MisinfoLabel::FactualError, 0.9, &a, lineage, &UserInstructions::default());
        assert_eq!(c.corrected_statement, "The bridge is standing.");
        assert!(c.flags.is_empty());
    }
}
