//! Seeded synthetic corpora with known labels and propagation trees, and
//! metrics for pipeline output against that ground truth.

mod evaluate;
mod generate;

pub use evaluate::{evaluate, macro_f1, Metrics, RunRecord};
pub use generate::{generate_corpus, pseudo_word, GeneratedCorpus, Templates};

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{parse_script, ScriptedMock, SharedBackend};
use crate::classifier::ClassifierAgent;
use crate::corrector::{CorrectionPolicy, CorrectorAgent};
use crate::clock::FixedClock;
use crate::domain::{Claim, MisinfoLabel};
use crate::extractor::ExtractorAgent;
use crate::indexer::{IndexConfig, IndexError};
use crate::orchestrator::{Agents, AuditLog, Orchestrator, PipelineConfig, PipelineError};
use crate::verifier::VerifierAgent;

/// Rules of the scripted stance mock.
pub const STANCE_SCRIPT: &str = include_str!("../../data/mocks/stance.json");

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("templates: {0}")]
    Templates(String),
    #[error("no report for claims: {}", .0.join(", "))]
    MissingReports(Vec<String>),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Shape of a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationSpec {
    pub seed: u64,
    pub n_trees: usize,
    pub docs_per_tree: usize,
    /// Per-token replacement probability for each copy.
    #[serde(default = "d_mutation")]
    pub mutation_rate: f64,
    #[serde(default = "d_step")]
    pub time_step_hours: i64,
    /// Weights over misinformation labels; uniform when empty.
    #[serde(default)]
    pub label_mix: BTreeMap<MisinfoLabel, f64>,
    /// High-reputation rebuttal documents per tree.
    #[serde(default = "d_truth")]
    pub truth_docs_per_tree: usize,
}

fn d_mutation() -> f64 {
    0.05
}
fn d_step() -> i64 {
    6
}
fn d_truth() -> usize {
    2
}

impl PropagationSpec {
    pub fn new(seed: u64, n_trees: usize, docs_per_tree: usize) -> Self {
        Self {
            seed,
            n_trees,
            docs_per_tree,
            mutation_rate: d_mutation(),
            time_step_hours: d_step(),
            label_mix: BTreeMap::new(),
            truth_docs_per_tree: d_truth(),
        }
    }

    pub fn with_mutation_rate(mut self, rate: f64) -> Self {
        self.mutation_rate = rate;
        self
    }

    /// Label weights in effect.
    pub fn effective_mix(&self) -> BTreeMap<MisinfoLabel, f64> {
        if self.label_mix.is_empty() {
            let w = 1.0 / MisinfoLabel::MISINFORMATION.len() as f64;
            MisinfoLabel::MISINFORMATION.into_iter().map(|l| (l, w)).collect()
        } else {
            self.label_mix.clone()
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::InvalidSpec(m.to_string()));
        if self.n_trees == 0 || self.docs_per_tree == 0 {
            return bad("n_trees and docs_per_tree must be positive");
        }
        if !(0.0..0.5).contains(&self.mutation_rate) {
            return bad("mutation_rate must be in [0, 0.5)");
        }
        if self.time_step_hours <= 0 {
            return bad("time_step_hours must be positive");
        }
        let mix = self.effective_mix();
        if mix.values().any(|w| !w.is_finite() || *w < 0.0) {
            return bad("label weights must be non-negative");
        }
        if (mix.values().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("label weights must sum to 1");
        }
        if mix.get(&MisinfoLabel::NotMisinformation).is_some_and(|w| *w > 0.0) {
            return bad("trees carry misinformation; not_misinformation comes from truth documents");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimAnswer {
    pub label: MisinfoLabel,
    pub origin_doc: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub doc_labels: BTreeMap<String, MisinfoLabel>,
    /// Parent of every document; roots map to themselves.
    pub trees: BTreeMap<String, String>,
    pub claim_answers: BTreeMap<String, ClaimAnswer>,
}

impl GroundTruth {
    /// Root of a document's tree.
    pub fn root_of<'a>(&'a self, doc_id: &'a str) -> Option<&'a str> {
        let mut cur = doc_id;
        for _ in 0..=self.trees.len() {
            let parent = self.trees.get(cur)?;
            if parent == cur {
                return Some(cur);
            }
            cur = parent;
        }
        None
    }
}

/// The scripted stance mock shipped with the harness: rebuttal documents
/// contradict, everything else is neutral.
pub fn stance_mock() -> SharedBackend {
    let rules = parse_script(STANCE_SCRIPT).expect("shipped mock script parses");
    Arc::new(ScriptedMock::new("stance-mock", rules, Some("neutral".into())))
}

/// Rule classifier, default extractor, scripted stance, template
/// corrections and rule-fallback verification.
pub fn mock_agents() -> Agents {
    Agents {
        classifier: ClassifierAgent::rules_only(),
        extractor: ExtractorAgent::default(),
        corrector: CorrectorAgent::new(CorrectionPolicy::default()).with_stance_backend(stance_mock()),
        verifier: VerifierAgent::default(),
    }
}

/// An orchestrator over the generated corpus with [`mock_agents`], an
/// in-memory audit log and the clock pinned to the latest claim time.
pub fn mock_orchestrator(corpus: &GeneratedCorpus) -> Result<Orchestrator, HarnessError> {
    let index = corpus.build_index(IndexConfig::default())?.into_shared();
    let now = corpus.claims.iter().map(|c| c.received_at).max().unwrap_or_default();
    let orch = Orchestrator::new(
        index,
        mock_agents(),
        PipelineConfig::default(),
        Arc::new(FixedClock(now)),
        AuditLog::in_memory(),
    )?;
    Ok(orch)
}

/// Runs each claim to completion in order, timing every run.
pub fn run_claims(orch: &Orchestrator, claims: &[Claim]) -> Result<Vec<RunRecord>, HarnessError> {
    claims
        .iter()
        .map(|claim| {
            let start = Instant::now();
            let report = orch.run_pipeline(claim.clone())?;
            Ok(RunRecord {
                claim_id: claim.id.clone(),
                report,
                latency_ms: start.elapsed().as_secs_f64() * 1000.0,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(PropagationSpec::new(1, 2, 3).validate().is_ok());
        assert!(PropagationSpec::new(1, 0, 3).validate().is_err());
        assert!(PropagationSpec::new(1, 2, 3).with_mutation_rate(0.5).validate().is_err());
        let mut s = PropagationSpec::new(1, 2, 3);
        s.label_mix = BTreeMap::from([(MisinfoLabel::Propaganda, 0.5)]);
        assert!(s.validate().is_err());
        s.label_mix = BTreeMap::from([(MisinfoLabel::Propaganda, 0.5), (MisinfoLabel::FactualError, 0.5)]);
        assert!(s.validate().is_ok());
    }

    #[test]
    fn roots() {
        let mut t = GroundTruth::default();
        t.trees.insert("a".into(), "a".into());
        t.trees.insert("b".into(), "a".into());
        t.trees.insert("c".into(), "b".into());
        assert_eq!(t.root_of("c"), Some("a"));
        assert_eq!(t.root_of("x"), None);
    }

    #[test]
    fn end_to_end_small() {
        let spec = PropagationSpec::new(2, 4, 5).with_mutation_rate(0.05);
        let corpus = generate_corpus(&spec, &Templates::builtin()).unwrap();
        let orch = mock_orchestrator(&corpus).unwrap();
        let records = run_claims(&orch, &corpus.claims).unwrap();
        let m = evaluate(&records, &corpus.truth, 0.6).unwrap();
        assert_eq!(m.label_macro_f1, 1.0);
        assert_eq!(m.citation_validity_rate, 1.0);
        assert!(m.origin_accuracy >= 0.75, "{m:?}");
    }
}
