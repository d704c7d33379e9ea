//! The Verification agent: the check list over a correction, report
//! rendering and the source-credibility ledger.

mod ledger;
mod render;

pub use ledger::{ema, outcome_of, CredibilityLedger, LedgerEntry, DEFAULT_LAMBDA, INITIAL_SCORE};
pub use render::{check_format, render, REPORT_HEADERS, SOURCES_HEADER};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::backend::{ChatRequest, SharedBackend};
use crate::domain::{
    CheckName, CheckResult, Claim, Correction, EvidenceItem, MisinfoLabel, Tone, UserInstructions, Verdict,
    VerificationReport,
};
use crate::indexer::Index;
use crate::text::tokenize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifierConfig {
    #[serde(default = "d_lambda")]
    pub ledger_lambda: f64,
    #[serde(default)]
    pub ledger_path: Option<PathBuf>,
    /// Copy ledger scores into the index's reputation table after each
    /// update.
    #[serde(default)]
    pub ledger_feedback: bool,
}

fn d_lambda() -> f64 {
    DEFAULT_LAMBDA
}

impl Default for VerifierConfig {
    fn default() -> Self {
        Self { ledger_lambda: DEFAULT_LAMBDA, ledger_path: None, ledger_feedback: false }
    }
}

/// The verdict rule: any failed mandatory check rejects, otherwise any
/// failed advisory check asks for review.
pub fn verdict(checks: &[CheckResult]) -> Verdict {
    if checks.iter().any(|c| c.mandatory && !c.passed) {
        Verdict::Rejected
    } else if checks.iter().any(|c| !c.passed) {
        Verdict::NeedsReview
    } else {
        Verdict::Verified
    }
}

fn yes_no(answer: &str) -> Option<bool> {
    match tokenize(answer).first().map(String::as_str) {
        Some("yes") => Some(true),
        Some("no") => Some(false),
        _ => None,
    }
}

#[derive(Clone, Default)]
pub struct VerifierAgent {
    pub config: VerifierConfig,
    pub backend: Option<SharedBackend>,
}

impl VerifierAgent {
    pub fn new(config: VerifierConfig, backend: Option<SharedBackend>) -> Self {
        Self { config, backend }
    }

    fn logical_consistency(&self, index: &Index, correction: &Correction, evidence: &[EvidenceItem]) -> CheckResult {
        let Some(backend) = &self.backend else {
            return CheckResult::new(CheckName::LogicalConsistency, true, "no backend; rule fallback passes");
        };
        let cited: Vec<&str> = correction.citations.iter().map(|c| c.doc_id.as_str()).collect();
        let mut user = format!("Correction: {}\nCited snippets:\n", correction.corrected_statement);
        for item in evidence.iter().filter(|e| cited.contains(&e.doc_id.as_str())) {
            if let Some(chunk) = index.chunk(&item.chunk_id) {
                user.push_str(&format!("- {}\n", chunk.text));
            }
        }
        let request = ChatRequest::with_system(
            "Does the correction contradict any cited snippet? Answer yes or no.",
            user,
        )
        .max_tokens(2);
        match backend.complete(&request).ok().as_deref().and_then(yes_no) {
            Some(true) => CheckResult::new(CheckName::LogicalConsistency, false, "correction contradicts a cited snippet"),
            Some(false) => CheckResult::new(CheckName::LogicalConsistency, true, ""),
            None => CheckResult::new(CheckName::LogicalConsistency, true, "no usable answer; rule fallback passes"),
        }
    }

    fn tone(&self, correction: &Correction, tone: Tone) -> CheckResult {
        if tone == Tone::Neutral {
            return CheckResult::new(CheckName::Tone, true, "neutral tone requested");
        }
        let Some(backend) = &self.backend else {
            return CheckResult::new(CheckName::Tone, true, "no backend; not assessed");
        };
        let request = ChatRequest::with_system(
            format!("Is the following text written in a {} tone? Answer yes or no.", tone.name()),
            correction.corrected_statement.clone(),
        )
        .max_tokens(2);
        match backend.complete(&request).ok().as_deref().and_then(yes_no) {
            Some(false) => CheckResult::new(CheckName::Tone, false, format!("not {}", tone.name())),
            Some(true) => CheckResult::new(CheckName::Tone, true, ""),
            None => CheckResult::new(CheckName::Tone, true, "no usable answer; not assessed"),
        }
    }

    /// The six checks, in fixed order. `classifier_label` is the label the
    /// audit trail records for the classify stage.
    pub fn run_checks(
        &self,
        index: &Index,
        claim: &Claim,
        correction: &Correction,
        evidence: &[EvidenceItem],
        classifier_label: Option<MisinfoLabel>,
    ) -> Vec<CheckResult> {
        let instructions = claim.effective_instructions();
        let missing: Vec<&str> = correction
            .citations
            .iter()
            .filter(|c| !index.contains_document(&c.doc_id))
            .map(|c| c.doc_id.as_str())
            .collect();
        let citations_exist = if missing.is_empty() {
            CheckResult::new(CheckName::CitationsExist, true, "")
        } else {
            CheckResult::new(CheckName::CitationsExist, false, format!("not in index: {}", missing.join(", ")))
        };

        let weak: Vec<String> = correction
            .citations
            .iter()
            .filter(|c| c.authenticity < instructions.min_authenticity)
            .map(|c| format!("{} ({:.3})", c.doc_id, c.authenticity))
            .collect();
        let reliability = if weak.is_empty() {
            CheckResult::new(CheckName::ReliabilityThreshold, true, "")
        } else {
            CheckResult::new(
                CheckName::ReliabilityThreshold,
                false,
                format!("below {}: {}", instructions.min_authenticity, weak.join(", ")),
            )
        };

        let alignment = match classifier_label {
            Some(l) if l == correction.label => CheckResult::new(CheckName::LabelAlignment, true, ""),
            Some(l) => CheckResult::new(
                CheckName::LabelAlignment,
                false,
                format!("classifier said {l}, correction says {}", correction.label),
            ),
            None => CheckResult::new(CheckName::LabelAlignment, false, "no classifier label recorded"),
        };

        let mut checks = vec![citations_exist, reliability, alignment];
        let advisory = [
            self.logical_consistency(index, correction, evidence),
            self.tone(correction, instructions.tone),
        ];
        let preview = render(claim, correction, &[checks.clone(), advisory.to_vec()].concat(), instructions.format);
        checks.push(match check_format(&preview, instructions.format) {
            Ok(()) => CheckResult::new(CheckName::FormatSpec, true, ""),
            Err(why) => CheckResult::new(CheckName::FormatSpec, false, why),
        });
        checks.extend(advisory);
        checks
    }

    pub fn finalize(
        &self,
        claim: &Claim,
        correction: Correction,
        checks: Vec<CheckResult>,
        instructions: &UserInstructions,
    ) -> VerificationReport {
        let final_text = render(claim, &correction, &checks, instructions.format);
        VerificationReport {
            claim_id: claim.id.clone(),
            verdict: verdict(&checks),
            checks,
            final_text,
            correction,
        }
    }

    pub fn verify(
        &self,
        index: &Index,
        claim: &Claim,
        correction: Correction,
        evidence: &[EvidenceItem],
        classifier_label: Option<MisinfoLabel>,
    ) -> VerificationReport {
        let checks = self.run_checks(index, claim, &correction, evidence, classifier_label);
        self.finalize(claim, correction, checks, &claim.effective_instructions())
    }
}
