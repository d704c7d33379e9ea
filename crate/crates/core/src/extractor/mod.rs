//! The Extractor agent: label-aware query planning, hybrid retrieval fused
//! with reciprocal ranks, re-ranking by alignment, authenticity and source
//! category, and lineage tracing.

mod lineage;

pub use lineage::trace_lineage;

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Claim, EvidenceItem, LineageGraph, MisinfoLabel};
use crate::indexer::{cosine, Index, IndexError, ScoredChunk, SourceCategory};
use crate::text::tokenize;

pub const DEFAULT_K: usize = 20;

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("seed document {0} not found")]
    SeedNotFound(String),
    #[error("no evidence retrieved")]
    NoEvidence,
    #[error("invalid extractor config: {0}")]
    Config(String),
}

pub type CategoryBoosts = BTreeMap<SourceCategory, f64>;

/// Label → category boosts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RoutingTable(pub BTreeMap<MisinfoLabel, CategoryBoosts>);

impl Default for RoutingTable {
    fn default() -> Self {
        use MisinfoLabel::*;
        use SourceCategory as C;
        let route = |pairs: &[(SourceCategory, f64)]| pairs.iter().copied().collect::<CategoryBoosts>();
        let mut map = BTreeMap::new();
        map.insert(StatisticalError, route(&[(C::Statistics, 1.0), (C::Government, 0.5)]));
        map.insert(HistoricalManipulation, route(&[(C::History, 1.0), (C::Science, 0.3)]));
        for l in [FactualError, Misrepresentation] {
            map.insert(l, route(&[(C::Factcheck, 1.0), (C::News, 0.5)]));
        }
        for l in [Propaganda, CherryPicking, LogicalFallacy] {
            map.insert(l, route(&[(C::Factcheck, 0.7), (C::News, 0.7)]));
        }
        map.insert(NotMisinformation, CategoryBoosts::new());
        Self(map)
    }
}

impl RoutingTable {
    pub fn boosts(&self, label: MisinfoLabel) -> CategoryBoosts {
        self.0.get(&label).cloned().unwrap_or_default()
    }

    pub fn validate(&self) -> Result<(), ExtractError> {
        for (label, boosts) in &self.0 {
            if boosts.values().any(|b| !b.is_finite() || *b < 0.0) {
                return Err(ExtractError::Config(format!("negative boost for {label}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryPlan {
    pub claim_terms: Vec<String>,
    pub label: MisinfoLabel,
    pub category_boosts: CategoryBoosts,
    pub k: usize,
}

impl QueryPlan {
    pub fn max_boost(&self) -> f64 {
        self.category_boosts.values().copied().fold(0.0, f64::max)
    }

    pub fn boost(&self, category: SourceCategory) -> f64 {
        self.category_boosts.get(&category).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankingWeights {
    #[serde(default = "d_alpha")]
    pub alpha: f64,
    #[serde(default = "d_beta")]
    pub beta: f64,
    #[serde(default = "d_gamma")]
    pub gamma: f64,
    #[serde(default = "d_rrf_k")]
    pub rrf_k: u32,
    #[serde(default = "d_tau")]
    pub tau_lineage: f64,
}

fn d_alpha() -> f64 {
    0.5
}
fn d_beta() -> f64 {
    0.3
}
fn d_gamma() -> f64 {
    0.2
}
fn d_rrf_k() -> u32 {
    60
}
fn d_tau() -> f64 {
    0.8
}

impl Default for RankingWeights {
    fn default() -> Self {
        Self { alpha: d_alpha(), beta: d_beta(), gamma: d_gamma(), rrf_k: d_rrf_k(), tau_lineage: d_tau() }
    }
}

impl RankingWeights {
    pub fn validate(&self) -> Result<(), ExtractError> {
        let ws = [self.alpha, self.beta, self.gamma];
        if ws.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ExtractError::Config("ranking weights must be non-negative".into()));
        }
        if (ws.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(ExtractError::Config("alpha + beta + gamma must be 1".into()));
        }
        if self.rrf_k < 1 {
            return Err(ExtractError::Config("rrf_k must be at least 1".into()));
        }
        if !(self.tau_lineage > 0.0 && self.tau_lineage <= 1.0) {
            return Err(ExtractError::Config("tau_lineage must be in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractorConfig {
    #[serde(default = "d_k")]
    pub k: usize,
    #[serde(default)]
    pub weights: RankingWeights,
    #[serde(default)]
    pub routing: RoutingTable,
}

fn d_k() -> usize {
    DEFAULT_K
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        Self { k: DEFAULT_K, weights: RankingWeights::default(), routing: RoutingTable::default() }
    }
}

impl ExtractorConfig {
    pub fn validate(&self) -> Result<(), ExtractError> {
        if self.k < 1 {
            return Err(ExtractError::Config("k must be at least 1".into()));
        }
        self.weights.validate()?;
        self.routing.validate()
    }
}

pub fn plan_query(claim: &Claim, label: MisinfoLabel, routing: &RoutingTable, k: usize) -> QueryPlan {
    let mut claim_terms = tokenize(&claim.text);
    claim_terms.extend(claim.topic_hints.iter().flat_map(|h| tokenize(h)));
    QueryPlan { claim_terms, label, category_boosts: routing.boosts(label), k: k.max(1) }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedCandidate {
    pub chunk_id: String,
    pub doc_id: String,
    pub ordinal: u32,
    pub rrf: f64,
}

fn by_doc_then_ordinal(a: (&str, u32), b: (&str, u32)) -> Ordering {
    a.0.cmp(b.0).then(a.1.cmp(&b.1))
}

/// Reciprocal rank fusion of ranked lists (ranks start at 1).
pub fn rrf_fuse(lists: &[&[ScoredChunk]], rrf_k: u32) -> Vec<FusedCandidate> {
    let mut acc: HashMap<&str, FusedCandidate> = HashMap::new();
    for list in lists {
        for (i, hit) in list.iter().enumerate() {
            let contribution = 1.0 / (f64::from(rrf_k) + (i + 1) as f64);
            acc.entry(hit.chunk_id.as_str())
                .or_insert_with(|| FusedCandidate {
                    chunk_id: hit.chunk_id.clone(),
                    doc_id: hit.doc_id.clone(),
                    ordinal: hit.ordinal,
                    rrf: 0.0,
                })
                .rrf += contribution;
        }
    }
    let mut fused: Vec<FusedCandidate> = acc.into_values().collect();
    fused.sort_by(|a, b| {
        b.rrf
            .total_cmp(&a.rrf)
            .then_with(|| by_doc_then_ordinal((&a.doc_id, a.ordinal), (&b.doc_id, b.ordinal)))
    });
    fused
}

/// BM25 over the plan's terms and cosine over the claim embedding, fused.
pub fn retrieve(
    index: &Index,
    claim: &Claim,
    plan: &QueryPlan,
    weights: &RankingWeights,
) -> Result<Vec<FusedCandidate>, ExtractError> {
    if index.is_empty() {
        return Err(IndexError::EmptyIndex.into());
    }
    let lexical = match index.bm25_query(&plan.claim_terms, plan.k) {
        Ok(hits) => hits,
        Err(IndexError::EmptyQuery) => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    let semantic = index.vector_query(&index.embed(&claim.text)?, plan.k)?;
    Ok(rrf_fuse(&[&lexical, &semantic], weights.rrf_k))
}

/// Final score of one candidate.
pub fn final_score(weights: &RankingWeights, alignment: f64, authenticity: f64, boost_ratio: f64) -> f64 {
    weights.alpha * ((alignment + 1.0) / 2.0) + weights.beta * authenticity + weights.gamma * boost_ratio
}

/// Scores candidates and orders them by final score, ties by
/// `(doc_id, ordinal)`. Ranks start at 1.
pub fn rerank(
    index: &Index,
    claim: &Claim,
    candidates: &[FusedCandidate],
    plan: &QueryPlan,
    weights: &RankingWeights,
    now: DateTime<Utc>,
) -> Result<Vec<EvidenceItem>, ExtractError> {
    let query = index.embed(&claim.text)?;
    let max_boost = plan.max_boost();
    let mut scored = Vec::with_capacity(candidates.len());
    for c in candidates {
        let (Some(chunk), Some(doc)) = (index.chunk(&c.chunk_id), index.document(&c.doc_id)) else {
            continue;
        };
        let alignment = cosine(&query, &chunk.embedding);
        let authenticity = index.authenticity_of(&doc.id, now).unwrap_or(0.0);
        let ratio = if max_boost > 0.0 { plan.boost(index.source_category(&doc.domain)) / max_boost } else { 0.0 };
        let item = EvidenceItem {
            chunk_id: c.chunk_id.clone(),
            doc_id: c.doc_id.clone(),
            authenticity,
            alignment,
            final_score: final_score(weights, alignment, authenticity, ratio),
            rank: 0,
        };
        scored.push((c.ordinal, item));
    }
    scored.sort_by(|(oa, a), (ob, b)| {
        b.final_score
            .total_cmp(&a.final_score)
            .then_with(|| by_doc_then_ordinal((&a.doc_id, *oa), (&b.doc_id, *ob)))
    });
    Ok(scored
        .into_iter()
        .enumerate()
        .map(|(i, (_, mut item))| {
            item.rank = i as u32 + 1;
            item
        })
        .collect())
}

/// The evidence item whose chunk is closest to the claim; its document
/// seeds lineage tracing. Ties go to the better-ranked item.
pub fn lineage_seed(evidence: &[EvidenceItem]) -> Option<&EvidenceItem> {
    evidence.iter().reduce(|best, e| if e.alignment > best.alignment { e } else { best })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    pub plan: QueryPlan,
    pub evidence: Vec<EvidenceItem>,
    pub lineage: LineageGraph,
}

#[derive(Debug, Clone, Default)]
pub struct ExtractorAgent {
    pub config: ExtractorConfig,
}

impl ExtractorAgent {
    pub fn new(config: ExtractorConfig) -> Result<Self, ExtractError> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn plan(&self, claim: &Claim, label: MisinfoLabel) -> QueryPlan {
        plan_query(claim, label, &self.config.routing, self.config.k)
    }

    /// Retrieval and re-ranking at the plan's depth.
    pub fn gather(
        &self,
        index: &Index,
        claim: &Claim,
        plan: &QueryPlan,
        now: DateTime<Utc>,
    ) -> Result<Vec<EvidenceItem>, ExtractError> {
        let candidates = retrieve(index, claim, plan, &self.config.weights)?;
        rerank(index, claim, &candidates, plan, &self.config.weights, now)
    }

    pub fn extract(
        &self,
        index: &Index,
        claim: &Claim,
        label: MisinfoLabel,
        now: DateTime<Utc>,
    ) -> Result<Extraction, ExtractError> {
        let plan = self.plan(claim, label);
        let evidence = self.gather(index, claim, &plan, now)?;
        let seed = lineage_seed(&evidence).ok_or(ExtractError::NoEvidence)?;
        let lineage = trace_lineage(index, &seed.doc_id, self.config.weights.tau_lineage)?;
        Ok(Extraction { plan, evidence, lineage })
    }
}
