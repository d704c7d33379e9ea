//! Central coordinator: runs classify → extract → correct → verify for each
//! claim, wraps every handoff in an [`AgentMessage`] and records it on the
//! claim's audit chain before the next stage starts.

pub mod audit;
mod config;

pub use audit::{append_audit, chain_hash, payload_hash, verify_audit_chain, AuditLog, ChainCheck, GENESIS_HASH};
pub use config::{AppConfig, CorrectorSection, IndexSection, PipelineConfig, RetryPolicy, ServerConfig, VerifierSection};

use std::collections::BTreeMap;
use std::sync::mpsc;
use std::sync::Arc;
use std::time::Duration;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use uuid::Uuid;

use crate::backend::{build_backend, Health, SharedBackend};
use crate::classifier::{ClassificationResult, ClassifierAgent, Lexicons, PromptTemplates};
use crate::clock::{Clock, FixedClock, SystemClock};
use crate::corrector::{CorrectionOutcome, CorrectorAgent, HttpExternalSearch};
use crate::domain::{
    canonical_bytes, sha256, AgentMessage, AgentName, AuditRecord, Claim, LineageGraph, MisinfoLabel, Stage,
    VerificationReport, Violation, SCHEMA_VERSION,
};
use crate::extractor::{trace_lineage, ExtractError, Extraction, ExtractorAgent};
use crate::indexer::{IndexStats, SharedIndex};
use crate::sync::Semaphore;
use crate::verifier::{CredibilityLedger, LedgerEntry, VerifierAgent};

pub const KIND_CLASSIFICATION: &str = "classification_result";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid claim: {}", .0.iter().map(|v| format!("{}: {}", v.field, v.rule)).collect::<Vec<_>>().join("; "))]
    InvalidClaim(Vec<Violation>),
    #[error("claim {0} was already submitted")]
    DuplicateClaim(String),
    #[error("unknown claim {0}")]
    UnknownClaim(String),
    #[error("stage {stage} timed out after {timeout_ms} ms")]
    StageTimeout { stage: Stage, timeout_ms: u64 },
    #[error("stage {stage} failed: {message}")]
    StageFailed { stage: Stage, message: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error("audit log: {0}")]
    Audit(#[from] std::io::Error),
}

impl PipelineError {
    pub fn stage(&self) -> Option<Stage> {
        match self {
            PipelineError::StageTimeout { stage, .. } | PipelineError::StageFailed { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Queued,
    Classifying,
    Extracting,
    Correcting,
    Verifying,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimRun {
    pub claim: Claim,
    pub status: RunStatus,
    pub result: Option<VerificationReport>,
    /// First and last global audit sequence numbers of this claim's records.
    pub audit_seq_range: Option<(u64, u64)>,
    #[serde(default)]
    pub error: Option<String>,
}

pub struct Agents {
    pub classifier: ClassifierAgent,
    pub extractor: ExtractorAgent,
    pub corrector: CorrectorAgent,
    pub verifier: VerifierAgent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthReport {
    pub status: String,
    pub index: IndexStats,
    pub backends: BTreeMap<String, Health>,
    pub ledger_domains: usize,
}

/// Deterministic message id: a version-8 UUID over
/// `sha256(correlation_id ‖ seq)`.
pub fn message_id(correlation_id: &str, seq: u64) -> String {
    let mut input = correlation_id.as_bytes().to_vec();
    input.extend_from_slice(&seq.to_be_bytes());
    let digest = sha256(&input);
    let mut bytes = [0u8; 16];
    bytes.copy_from_slice(&digest[..16]);
    Uuid::new_v8(bytes).to_string()
}

/// Label recorded by the classify stage, read back from an audit chain.
pub fn classifier_label_from_audit(chain: &[AuditRecord]) -> Option<MisinfoLabel> {
    chain
        .iter()
        .find(|r| r.message.stage == Stage::Classify && r.message.payload_kind == KIND_CLASSIFICATION)
        .and_then(|r| serde_json::from_str::<ClassificationResult>(&r.message.payload).ok())
        .map(|c| c.label)
}

enum StageFailure {
    Retryable(String),
    Fatal(String),
}

pub struct Orchestrator {
    index: SharedIndex,
    classifier: Arc<ClassifierAgent>,
    extractor: Arc<ExtractorAgent>,
    corrector: Arc<CorrectorAgent>,
    verifier: Arc<VerifierAgent>,
    ledger: Mutex<CredibilityLedger>,
    audit: AuditLog,
    clock: Arc<dyn Clock>,
    config: PipelineConfig,
    backends: BTreeMap<String, SharedBackend>,
    runs: Mutex<BTreeMap<String, ClaimRun>>,
    slots: Semaphore,
}

impl Orchestrator {
    pub fn new(
        index: SharedIndex,
        agents: Agents,
        config: PipelineConfig,
        clock: Arc<dyn Clock>,
        audit: AuditLog,
    ) -> Result<Self, PipelineError> {
        config.validate()?;
        let ledger = CredibilityLedger::new(agents.verifier.config.ledger_lambda);
        Ok(Self {
            index,
            classifier: Arc::new(agents.classifier),
            extractor: Arc::new(agents.extractor),
            corrector: Arc::new(agents.corrector),
            verifier: Arc::new(agents.verifier),
            ledger: Mutex::new(ledger),
            audit,
            clock,
            slots: Semaphore::new(config.max_concurrent_claims),
            config,
            backends: BTreeMap::new(),
            runs: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn with_ledger(self, ledger: CredibilityLedger) -> Self {
        *self.ledger.lock() = ledger;
        self
    }

    /// Wires every agent from a configuration file's contents.
    pub fn from_config(cfg: &AppConfig, index: SharedIndex) -> Result<Self, PipelineError> {
        let mut backends = BTreeMap::new();
        for (key, descriptor) in &cfg.backends {
            let mut d = descriptor.clone();
            if d.name.is_empty() {
                d.name = key.clone();
            }
            let b = build_backend(&d).map_err(|e| PipelineError::Config(e.to_string()))?;
            backends.insert(key.clone(), b);
        }
        let lookup = |name: &str| {
            backends
                .get(name)
                .cloned()
                .ok_or_else(|| PipelineError::Config(format!("unknown backend {name}")))
        };
        let cfg_err = |e: &dyn std::fmt::Display| PipelineError::Config(e.to_string());

        let lexicons = match &cfg.classifier.lexicon_file {
            Some(p) => Lexicons::load(p).map_err(|e| cfg_err(&e))?,
            None => Lexicons::builtin(),
        };
        let mut templates = PromptTemplates::default();
        if let Some(dir) = &cfg.classifier.template_dir {
            templates = templates.load_dir(dir).map_err(|e| cfg_err(&e))?;
        }
        let voters = cfg.classifier.backends.iter().map(|n| lookup(n)).collect::<Result<Vec<_>, _>>()?;
        let classifier = ClassifierAgent::new(
            voters,
            cfg.classifier.use_rule_backend,
            lexicons,
            &templates,
            &cfg.classifier.prompt_template_id,
        )
        .map_err(|e| cfg_err(&e))?;

        let extractor = ExtractorAgent::new(cfg.extractor.clone()).map_err(|e| cfg_err(&e))?;

        let c = &cfg.corrector;
        c.policy.validate(cfg.extractor.k).map_err(|e| cfg_err(&e))?;
        let mut corrector = CorrectorAgent::new(c.policy.clone());
        if let Some(n) = &c.stance_backend {
            corrector = corrector.with_stance_backend(lookup(n)?);
        }
        if let Some(n) = &c.generator_backend {
            corrector = corrector.with_generator(lookup(n)?);
        }
        if let Some(search) = &c.external_search {
            corrector = corrector.with_external_search(Arc::new(HttpExternalSearch::new(search)), search.max_results);
        }

        let verifier_backend = cfg.verifier.backend.as_deref().map(lookup).transpose()?;
        let verifier = VerifierAgent::new(cfg.verifier.ledger.clone(), verifier_backend);
        let ledger = match &cfg.verifier.ledger.ledger_path {
            Some(p) => CredibilityLedger::load(p, cfg.verifier.ledger.ledger_lambda)?,
            None => CredibilityLedger::new(cfg.verifier.ledger.ledger_lambda),
        };

        let clock: Arc<dyn Clock> = match cfg.pipeline.fixed_clock {
            Some(t) => Arc::new(FixedClock(t)),
            None => Arc::new(SystemClock),
        };
        let audit = match &cfg.pipeline.audit_dir {
            Some(dir) => AuditLog::with_dir(dir)?,
            None => AuditLog::in_memory(),
        };
        let agents = Agents { classifier, extractor, corrector, verifier };
        let mut orchestrator = Self::new(index, agents, cfg.pipeline.clone(), clock, audit)?.with_ledger(ledger);
        orchestrator.backends = backends;
        Ok(orchestrator)
    }

    pub fn index(&self) -> &SharedIndex {
        &self.index
    }

    pub fn extractor(&self) -> &ExtractorAgent {
        &self.extractor
    }

    pub fn classifier(&self) -> &ClassifierAgent {
        &self.classifier
    }

    pub fn audit(&self) -> &AuditLog {
        &self.audit
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    /// Registers a claim as queued. Its id must be new.
    pub fn submit(&self, claim: Claim) -> Result<String, PipelineError> {
        let violations = claim.violations();
        if !violations.is_empty() {
            return Err(PipelineError::InvalidClaim(violations));
        }
        let mut runs = self.runs.lock();
        if runs.contains_key(&claim.id) {
            return Err(PipelineError::DuplicateClaim(claim.id));
        }
        let id = claim.id.clone();
        runs.insert(
            id.clone(),
            ClaimRun { claim, status: RunStatus::Queued, result: None, audit_seq_range: None, error: None },
        );
        Ok(id)
    }

    pub fn run(&self, claim_id: &str) -> Option<ClaimRun> {
        self.runs.lock().get(claim_id).cloned()
    }

    pub fn credibility(&self, domain: &str) -> Option<LedgerEntry> {
        self.ledger.lock().get(domain).cloned()
    }

    pub fn ledger_snapshot(&self) -> CredibilityLedger {
        self.ledger.lock().clone()
    }

    pub fn lineage(&self, doc_id: &str, tau: Option<f64>) -> Result<LineageGraph, ExtractError> {
        let tau = tau.unwrap_or(self.extractor.config.weights.tau_lineage);
        trace_lineage(&self.index.read(), doc_id, tau)
    }

    pub fn health(&self) -> HealthReport {
        HealthReport {
            status: "ok".into(),
            index: self.index.read().stats(),
            backends: self.backends.iter().map(|(n, b)| (n.clone(), b.health_check())).collect(),
            ledger_domains: self.ledger.lock().entries().len(),
        }
    }

    /// Submits and runs a claim to completion.
    pub fn run_pipeline(&self, claim: Claim) -> Result<VerificationReport, PipelineError> {
        let id = self.submit(claim)?;
        self.execute(&id)
    }

    fn set_status(&self, claim_id: &str, status: RunStatus) {
        if let Some(run) = self.runs.lock().get_mut(claim_id) {
            run.status = status;
        }
    }

    fn record(
        &self,
        seq: &mut u64,
        range: &mut Option<(u64, u64)>,
        claim_id: &str,
        (sender, recipient): (AgentName, AgentName),
        stage: Stage,
        kind: &str,
        payload: &impl Serialize,
    ) -> Result<(), PipelineError> {
        let message = AgentMessage {
            message_id: message_id(claim_id, *seq),
            correlation_id: claim_id.to_string(),
            sender,
            recipient,
            stage,
            payload_kind: kind.to_string(),
            payload: String::from_utf8(canonical_bytes(payload)).expect("json is utf-8"),
            sent_at: self.clock.now(),
            schema_version: SCHEMA_VERSION,
        };
        let (_, global) = self.audit.append(message)?;
        *range = Some(range.map_or((global, global), |(first, _)| (first, global)));
        if let Some(run) = self.runs.lock().get_mut(claim_id) {
            run.audit_seq_range = *range;
        }
        *seq += 1;
        Ok(())
    }

    /// Runs one stage on a worker thread under the stage timeout, retrying
    /// retryable failures with a fixed backoff.
    fn run_stage<T, F>(&self, stage: Stage, work: F) -> Result<T, PipelineError>
    where
        T: Send + 'static,
        F: Fn() -> Result<T, StageFailure> + Send + Sync + 'static,
    {
        let work = Arc::new(work);
        let timeout = Duration::from_millis(self.config.stage_timeout_ms);
        let mut attempt = 0;
        loop {
            attempt += 1;
            let (tx, rx) = mpsc::channel();
            let job = Arc::clone(&work);
            std::thread::spawn(move || {
                let _ = tx.send(job());
            });
            match rx.recv_timeout(timeout) {
                Ok(Ok(v)) => return Ok(v),
                Ok(Err(StageFailure::Retryable(_))) if attempt < self.config.retry.max_attempts => {
                    std::thread::sleep(Duration::from_millis(self.config.retry.backoff_ms));
                }
                Ok(Err(StageFailure::Retryable(message) | StageFailure::Fatal(message))) => {
                    return Err(PipelineError::StageFailed { stage, message })
                }
                Err(mpsc::RecvTimeoutError::Timeout) => {
                    return Err(PipelineError::StageTimeout { stage, timeout_ms: self.config.stage_timeout_ms })
                }
                Err(mpsc::RecvTimeoutError::Disconnected) => {
                    return Err(PipelineError::StageFailed { stage, message: "stage worker panicked".into() })
                }
            }
        }
    }

    /// Runs a queued claim through every stage.
    pub fn execute(&self, claim_id: &str) -> Result<VerificationReport, PipelineError> {
        let claim = self
            .run(claim_id)
            .ok_or_else(|| PipelineError::UnknownClaim(claim_id.to_string()))?
            .claim;
        let _slot = self.slots.acquire();
        let outcome = self.stages(&claim);
        let mut runs = self.runs.lock();
        if let Some(run) = runs.get_mut(claim_id) {
            match &outcome {
                Ok(report) => {
                    run.status = RunStatus::Done;
                    run.result = Some(report.clone());
                }
                Err(e) => {
                    run.status = RunStatus::Failed;
                    run.error = Some(e.to_string());
                }
            }
        }
        outcome
    }

    fn stages(&self, claim: &Claim) -> Result<VerificationReport, PipelineError> {
        use AgentName::*;
        let id = claim.id.as_str();
        let now = claim.received_at;
        let mut seq = 0u64;
        let mut range = None;

        self.set_status(id, RunStatus::Classifying);
        self.record(&mut seq, &mut range, id, (Orchestrator, Classifier), Stage::Classify, "claim", claim)?;
        let classification = {
            let (agent, c) = (Arc::clone(&self.classifier), claim.clone());
            self.run_stage(Stage::Classify, move || {
                agent.classify(&c).map_err(|e| {
                    if e.is_retryable() {
                        StageFailure::Retryable(e.to_string())
                    } else {
                        StageFailure::Fatal(e.to_string())
                    }
                })
            })?
        };
        self.record(&mut seq, &mut range, id, (Classifier, Orchestrator), Stage::Classify, KIND_CLASSIFICATION, &classification)?;

        self.set_status(id, RunStatus::Extracting);
        let label = classification.label;
        self.record(
            &mut seq,
            &mut range,
            id,
            (Orchestrator, Extractor),
            Stage::Extract,
            "extract_request",
            &json!({ "claim_id": id, "label": label }),
        )?;
        let extraction: Extraction = {
            let (agent, index, c) = (Arc::clone(&self.extractor), Arc::clone(&self.index), claim.clone());
            self.run_stage(Stage::Extract, move || {
                agent.extract(&index.read(), &c, label, now).map_err(|e| StageFailure::Fatal(e.to_string()))
            })?
        };
        self.record(&mut seq, &mut range, id, (Extractor, Orchestrator), Stage::Extract, "extraction", &extraction)?;

        self.set_status(id, RunStatus::Correcting);
        self.record(
            &mut seq,
            &mut range,
            id,
            (Orchestrator, Corrector),
            Stage::Correct,
            "correct_request",
            &json!({
                "claim_id": id,
                "label": label,
                "classifier_confidence": classification.confidence,
                "evidence": extraction.evidence.len(),
            }),
        )?;
        let outcome: CorrectionOutcome = {
            let corrector = Arc::clone(&self.corrector);
            let extractor = Arc::clone(&self.extractor);
            let index = Arc::clone(&self.index);
            let c = claim.clone();
            let ex = extraction;
            let confidence = classification.confidence;
            self.run_stage(Stage::Correct, move || {
                corrector
                    .correct(&index, &extractor, &c, &ex.plan, ex.evidence.clone(), ex.lineage.clone(), confidence, now)
                    .map_err(|e| StageFailure::Fatal(e.to_string()))
            })?
        };
        self.record(&mut seq, &mut range, id, (Corrector, Orchestrator), Stage::Correct, "correction_outcome", &outcome)?;

        self.set_status(id, RunStatus::Verifying);
        self.record(&mut seq, &mut range, id, (Orchestrator, Verifier), Stage::Verify, "correction", &outcome.correction)?;
        let recorded_label = self.audit.chain(id).as_deref().and_then(classifier_label_from_audit);
        let report: VerificationReport = {
            let (verifier, index, c) = (Arc::clone(&self.verifier), Arc::clone(&self.index), claim.clone());
            self.run_stage(Stage::Verify, move || {
                let guard = index.read();
                Ok(verifier.verify(&guard, &c, outcome.correction.clone(), &outcome.evidence, recorded_label))
            })?
        };
        self.update_ledger(&report)?;
        self.record(&mut seq, &mut range, id, (Verifier, Orchestrator), Stage::Verify, "verification_report", &report)?;
        self.record(
            &mut seq,
            &mut range,
            id,
            (Orchestrator, Client),
            Stage::Done,
            "run_status",
            &json!({ "claim_id": id, "status": RunStatus::Done, "verdict": report.verdict }),
        )?;
        Ok(report)
    }

    fn update_ledger(&self, report: &VerificationReport) -> Result<(), PipelineError> {
        let domains: Vec<&str> = report.correction.citations.iter().map(|c| c.domain.as_str()).collect();
        let mut ledger = self.ledger.lock();
        let moved = ledger.update(domains, report.verdict, self.clock.now());
        if moved.is_empty() {
            return Ok(());
        }
        if let Some(path) = &self.verifier.config.ledger_path {
            ledger.save(path)?;
        }
        if self.verifier.config.ledger_feedback {
            let mut index = self.index.write();
            let mut table = index.reputation_table().clone();
            for d in &moved {
                if let Some(e) = ledger.get(d) {
                    table.set_reputation(d, e.score);
                }
            }
            index.set_reputation_table(table);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{BackendDescriptor, BackendError, ChatBackend, ChatRequest, MockRule, ScriptedMock};
    use crate::classifier::{Lexicons, DEFAULT_TEMPLATE_ID};
    use crate::corrector::CorrectionPolicy;
    use crate::domain::Verdict;
    use crate::extractor::tests::{at, doc};
    use crate::indexer::{Index, IndexConfig, ReputationTable};
    use crate::verifier::VerifierConfig;

    fn index() -> SharedIndex {
        let mut ix = Index::new(IndexConfig::default()).unwrap();
        ix.set_reputation_table(
            ReputationTable::from_json(
                r#"{"a.org": {"reputation": 0.95, "category": "statistics", "citations": 100},
                    "b.org": {"reputation": 0.95, "category": "government", "citations": 100},
                    "rumor.net": 0.1}"#,
            )
            .unwrap(),
        );
        ix.add(doc("r1", "rumor.net", "the survey shows unemployment tripled in the valley", 0)).unwrap();
        ix.add(doc("r2", "rumor.net", "the survey shows unemployment tripled in the valley", 1)).unwrap();
        ix.add(doc("t1", "a.org", "Official records confirm valley unemployment held steady", 2)).unwrap();
        ix.add(doc("t2", "b.org", "Official records confirm the valley jobs rate barely moved", 3)).unwrap();
        ix.into_shared()
    }

    fn stance() -> SharedBackend {
        Arc::new(ScriptedMock::new(
            "stance",
            vec![MockRule::contains("Official records confirm", "contradicts")],
            Some("neutral".into()),
        ))
    }

    fn agents(voters: Vec<SharedBackend>, rules: bool) -> Agents {
        Agents {
            classifier: ClassifierAgent::new(voters, rules, Lexicons::builtin(), &PromptTemplates::default(), DEFAULT_TEMPLATE_ID)
                .unwrap(),
            extractor: ExtractorAgent::default(),
            corrector: CorrectorAgent::new(CorrectionPolicy::default()).with_stance_backend(stance()),
            verifier: VerifierAgent::new(VerifierConfig::default(), None),
        }
    }

    fn orchestrator(agents: Agents, config: PipelineConfig) -> Orchestrator {
        Orchestrator::new(index(), agents, config, Arc::new(FixedClock(at(100))), AuditLog::in_memory()).unwrap()
    }

    fn claim(id: &str) -> Claim {
        Claim::new(id, "the survey shows unemployment tripled in the valley", at(50))
    }

    #[test]
    fn full_run_is_verified_and_audited() {
        let o = orchestrator(agents(vec![], true), PipelineConfig::default());
        let report = o.run_pipeline(claim("c1")).unwrap();
        assert_eq!(report.verdict, Verdict::Verified, "{}", report.final_text);
        assert_eq!(report.correction.label, MisinfoLabel::StatisticalError);
        assert_eq!(report.correction.lineage.origin_id, "r1");
        let chain = o.audit().chain("c1").unwrap();
        assert_eq!(chain.len(), 9);
        assert!(verify_audit_chain(&chain).valid);
        let stages: Vec<Stage> = chain.iter().map(|r| r.message.stage).collect();
        assert!(stages.windows(2).all(|w| w[0] <= w[1]));
        assert!(chain.iter().all(|r| r.message.correlation_id == "c1"));
        let run = o.run("c1").unwrap();
        assert_eq!(run.status, RunStatus::Done);
        assert_eq!(run.audit_seq_range, Some((0, 8)));
        assert!(o.credibility("a.org").is_some());
    }

    #[test]
    fn identical_runs_give_identical_bytes() {
        let a = orchestrator(agents(vec![], true), PipelineConfig::default()).run_pipeline(claim("c1")).unwrap();
        let b = orchestrator(agents(vec![], true), PipelineConfig::default()).run_pipeline(claim("c1")).unwrap();
        assert_eq!(canonical_bytes(&a), canonical_bytes(&b));
    }

    #[test]
    fn zero_voters_fail_at_classify() {
        let o = orchestrator(agents(vec![], false), PipelineConfig::default());
        let err = o.run_pipeline(claim("c1")).unwrap_err();
        assert!(matches!(err, PipelineError::StageFailed { stage: Stage::Classify, .. }), "{err}");
        assert_eq!(o.run("c1").unwrap().status, RunStatus::Failed);
        let chain = o.audit().chain("c1").unwrap();
        assert_eq!(chain.len(), 1);
        assert!(verify_audit_chain(&chain).valid);
    }

    struct Slow(BackendDescriptor);
    impl ChatBackend for Slow {
        fn descriptor(&self) -> &BackendDescriptor {
            &self.0
        }
        fn complete(&self, _: &ChatRequest) -> Result<String, BackendError> {
            std::thread::sleep(Duration::from_millis(400));
            Ok("propaganda".into())
        }
        fn health_check(&self) -> Health {
            Health { healthy: true, latency_ms: 400.0 }
        }
    }

    #[test]
    fn slow_stage_times_out() {
        let slow: SharedBackend = Arc::new(Slow(BackendDescriptor::mock("slow")));
        let config = PipelineConfig { stage_timeout_ms: 50, ..Default::default() };
        let o = orchestrator(agents(vec![slow], true), config);
        let err = o.run_pipeline(claim("c1")).unwrap_err();
        assert!(matches!(err, PipelineError::StageTimeout { stage: Stage::Classify, timeout_ms: 50 }), "{err}");
    }

    struct Flaky {
        d: BackendDescriptor,
        calls: Mutex<u32>,
    }
    impl ChatBackend for Flaky {
        fn descriptor(&self) -> &BackendDescriptor {
            &self.d
        }
        fn complete(&self, _: &ChatRequest) -> Result<String, BackendError> {
            let mut n = self.calls.lock();
            *n += 1;
            if *n == 1 {
                Err(BackendError::Transport("reset".into()))
            } else {
                Ok("statistical_error".into())
            }
        }
        fn health_check(&self) -> Health {
            Health { healthy: true, latency_ms: 0.0 }
        }
    }

    #[test]
    fn network_failures_are_retried() {
        let flaky = Arc::new(Flaky { d: BackendDescriptor::mock("flaky"), calls: Mutex::new(0) });
        let config = PipelineConfig { retry: RetryPolicy { max_attempts: 2, backoff_ms: 1 }, ..Default::default() };
        let o = orchestrator(agents(vec![flaky.clone()], false), config);
        let report = o.run_pipeline(claim("c1")).unwrap();
        assert_eq!(report.correction.label, MisinfoLabel::StatisticalError);
        assert_eq!(*flaky.calls.lock(), 2);
    }

    #[test]
    fn duplicate_and_invalid_claims() {
        let o = orchestrator(agents(vec![], true), PipelineConfig::default());
        o.submit(claim("c1")).unwrap();
        assert!(matches!(o.submit(claim("c1")), Err(PipelineError::DuplicateClaim(_))));
        assert!(matches!(o.submit(Claim::new("c2", "  ", at(0))), Err(PipelineError::InvalidClaim(_))));
    }

    #[test]
    fn message_ids_are_stable() {
        assert_eq!(message_id("c1", 0), message_id("c1", 0));
        assert_ne!(message_id("c1", 0), message_id("c1", 1));
        assert_eq!(Uuid::parse_str(&message_id("c1", 3)).unwrap().get_version_num(), 8);
    }

    #[test]
    fn config_wiring() {
        let cfg = AppConfig::from_json(
            r#"{"backends": {"m": {"kind": "scripted_mock", "default_response": "propaganda"}},
                "classifier": {"backends": ["m"], "use_rule_backend": false},
                "pipeline": {"fixed_clock": "2024-06-01T00:00:00Z"}}"#,
        )
        .unwrap();
        let o = Orchestrator::from_config(&cfg, index()).unwrap();
        assert_eq!(o.classifier().voter_count(), 1);
        assert_eq!(o.health().backends.len(), 1);
        let bad = AppConfig::from_json(r#"{"classifier": {"backends": ["nope"]}}"#).unwrap();
        assert!(matches!(Orchestrator::from_config(&bad, index()), Err(PipelineError::Config(_))));
    }
}
