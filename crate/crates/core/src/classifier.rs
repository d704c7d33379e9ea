//! The Classifier agent: ensemble voting over model backends and a keyword
//! rule voter.
//!
//! Each voter yields a [`LabelDistribution`]; its vote is the argmax. The
//! final label is the majority vote, ties broken by the summed probability
//! mass of the tied labels and then by taxonomy order. The reported
//! distribution is the mean over voters.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, ChatRequest, SharedBackend};
use crate::domain::{parse_label, Claim, LabelDistribution, MisinfoLabel};
use crate::text::tokenize;

/// Probability placed on the parsed label of a text answer; the rest is
/// spread evenly over the other seven labels.
pub const LLM_PEAK: f64 = 0.9;

const MASS_EPSILON: f64 = 1e-12;

pub const DEFAULT_TEMPLATE_ID: &str = "default";
const DEFAULT_TEMPLATE: &str = include_str!("../data/classify_prompt.txt");
const DEFAULT_LEXICONS: &str = include_str!("../data/lexicons.json");

const RULE_VOTER: &str = "rules";

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("no voters enabled")]
    NoVoters,
    #[error("every voter failed: {}", .0.iter().map(|(n, e)| format!("{n}: {e}")).collect::<Vec<_>>().join("; "))]
    AllVotersFailed(Vec<(String, BackendError)>),
    #[error("lexicons: {0}")]
    Lexicon(String),
    #[error("unknown prompt template {0}")]
    UnknownTemplate(String),
    #[error("templates: {0}")]
    Io(#[from] std::io::Error),
}

impl ClassifierError {
    pub fn is_retryable(&self) -> bool {
        match self {
            ClassifierError::AllVotersFailed(errs) => errs.iter().all(|(_, e)| e.is_retryable()),
            _ => false,
        }
    }
}

/// Keywords per misinformation label. Keywords may be multi-word phrases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Lexicons(BTreeMap<MisinfoLabel, Vec<String>>);

impl Lexicons {
    pub fn new(map: BTreeMap<MisinfoLabel, Vec<String>>) -> Result<Self, ClassifierError> {
        let lex = Self(map);
        lex.validate()?;
        Ok(lex)
    }

    pub fn from_json(raw: &str) -> Result<Self, ClassifierError> {
        let map = serde_json::from_str(raw).map_err(|e| ClassifierError::Lexicon(e.to_string()))?;
        Self::new(map)
    }

    pub fn load(path: &Path) -> Result<Self, ClassifierError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The lexicons shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_json(DEFAULT_LEXICONS).expect("shipped lexicons are valid")
    }

    fn validate(&self) -> Result<(), ClassifierError> {
        for label in MisinfoLabel::MISINFORMATION {
            if self.0.get(&label).is_none_or(|k| k.is_empty()) {
                return Err(ClassifierError::Lexicon(format!("no keywords for {label}")));
            }
        }
        Ok(())
    }

    pub fn keywords(&self, label: MisinfoLabel) -> &[String] {
        self.0.get(&label).map_or(&[], Vec::as_slice)
    }

    /// Every keyword token of every label.
    pub fn all_tokens(&self) -> impl Iterator<Item = String> + '_ {
        self.0.values().flatten().flat_map(|k| tokenize(k))
    }
}

fn count_phrase(tokens: &[String], phrase: &[String]) -> usize {
    if phrase.is_empty() || phrase.len() > tokens.len() {
        return 0;
    }
    tokens.windows(phrase.len()).filter(|w| *w == phrase).count()
}

/// Keyword hit counts per label, normalized. No hits at all means the claim
/// is treated as not misinformation.
pub fn rule_classify(claim: &Claim, lexicons: &Lexicons) -> LabelDistribution {
    let tokens = tokenize(&claim.text);
    let mut hits = [0.0; 8];
    for label in MisinfoLabel::MISINFORMATION {
        hits[label.index()] = lexicons
            .keywords(label)
            .iter()
            .map(|k| count_phrase(&tokens, &tokenize(k)))
            .sum::<usize>() as f64;
    }
    LabelDistribution::from_weights(hits)
        .unwrap_or_else(|_| LabelDistribution::one_hot(MisinfoLabel::NotMisinformation))
}

/// Prompt templates keyed by id. Templates contain a `{claim}` placeholder.
#[derive(Debug, Clone)]
pub struct PromptTemplates(HashMap<String, String>);

impl Default for PromptTemplates {
    fn default() -> Self {
        Self(HashMap::from([(DEFAULT_TEMPLATE_ID.to_string(), DEFAULT_TEMPLATE.to_string())]))
    }
}

impl PromptTemplates {
    /// Adds every `*.txt` file in `dir`, keyed by file stem.
    pub fn load_dir(mut self, dir: &Path) -> Result<Self, ClassifierError> {
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "txt") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    self.0.insert(stem.to_string(), std::fs::read_to_string(&path)?);
                }
            }
        }
        Ok(self)
    }

    pub fn insert(&mut self, id: &str, text: &str) {
        self.0.insert(id.to_string(), text.to_string());
    }

    pub fn get(&self, id: &str) -> Option<&str> {
        self.0.get(id).map(String::as_str)
    }
}

pub fn render_prompt(template: &str, claim: &Claim) -> String {
    template.replace("{claim}", &claim.text)
}

/// A backend's vote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmVote {
    pub distribution: LabelDistribution,
    pub raw_response: String,
    /// The answer was not a taxonomy name; the vote defaulted to
    /// not_misinformation.
    pub parse_failure: bool,
}

pub fn llm_classify(claim: &Claim, backend: &SharedBackend, template: &str) -> Result<LlmVote, BackendError> {
    let request = ChatRequest::with_system(
        "You are a misinformation classifier.",
        render_prompt(template, claim),
    )
    .max_tokens(16);
    let raw = backend.complete(&request)?;
    let (label, parse_failure) = match parse_label(&raw) {
        Ok(l) => (l, false),
        Err(_) => (MisinfoLabel::NotMisinformation, true),
    };
    Ok(LlmVote {
        distribution: LabelDistribution::smoothed(label, LLM_PEAK),
        raw_response: raw,
        parse_failure,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoterOutput {
    pub voter_name: String,
    pub label: MisinfoLabel,
    pub distribution: LabelDistribution,
    #[serde(default)]
    pub parse_failure: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedVoter {
    pub voter_name: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub label: MisinfoLabel,
    pub distribution: LabelDistribution,
    pub confidence: f64,
    pub voter_outputs: Vec<VoterOutput>,
    #[serde(default)]
    pub failed_voters: Vec<FailedVoter>,
}

/// Sums in a canonical order so the result does not depend on voter order.
fn order_free_sum(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.into_iter().sum()
}

/// Majority vote over per-voter labels with the mass / taxonomy tie-breaks.
/// Returns `None` for an empty vote.
pub fn fuse_votes(votes: &[(MisinfoLabel, LabelDistribution)]) -> Option<MisinfoLabel> {
    let mut counts = [0usize; 8];
    for (label, _) in votes {
        counts[label.index()] += 1;
    }
    let top = *counts.iter().max()?;
    if top == 0 {
        return None;
    }
    let tied: Vec<MisinfoLabel> = MisinfoLabel::ALL
        .into_iter()
        .filter(|l| counts[l.index()] == top)
        .collect();
    let mass = |l: MisinfoLabel| order_free_sum(votes.iter().map(|(_, d)| d.get(l)).collect());
    let mut best = tied[0];
    let mut best_mass = mass(best);
    for &l in &tied[1..] {
        let m = mass(l);
        if m > best_mass + MASS_EPSILON {
            best = l;
            best_mass = m;
        }
    }
    Some(best)
}

/// Mean distribution, summed per label in a canonical order.
pub fn mean_distribution(dists: &[LabelDistribution]) -> Option<LabelDistribution> {
    if dists.is_empty() {
        return None;
    }
    let n = dists.len() as f64;
    let mut weights = [0.0; 8];
    for (i, w) in weights.iter_mut().enumerate() {
        *w = order_free_sum(dists.iter().map(|d| d.scores()[i]).collect()) / n;
    }
    LabelDistribution::from_weights(weights).ok()
}

/// Fuses voter outputs into a result.
pub fn fuse(voter_outputs: Vec<VoterOutput>, failed_voters: Vec<FailedVoter>) -> Option<ClassificationResult> {
    let votes: Vec<(MisinfoLabel, LabelDistribution)> =
        voter_outputs.iter().map(|v| (v.label, v.distribution)).collect();
    let label = fuse_votes(&votes)?;
    let distribution = mean_distribution(&votes.iter().map(|(_, d)| *d).collect::<Vec<_>>())?;
    Some(ClassificationResult {
        label,
        confidence: distribution.get(label),
        distribution,
        voter_outputs,
        failed_voters,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierConfig {
    /// Names of entries in the `backends` config section.
    #[serde(default)]
    pub backends: Vec<String>,
    #[serde(default = "yes")]
    pub use_rule_backend: bool,
    #[serde(default = "default_template_id")]
    pub prompt_template_id: String,
    #[serde(default)]
    pub lexicon_file: Option<std::path::PathBuf>,
    #[serde(default)]
    pub template_dir: Option<std::path::PathBuf>,
}

fn yes() -> bool {
    true
}

fn default_template_id() -> String {
    DEFAULT_TEMPLATE_ID.to_string()
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            backends: Vec::new(),
            use_rule_backend: true,
            prompt_template_id: default_template_id(),
            lexicon_file: None,
            template_dir: None,
        }
    }
}

pub struct ClassifierAgent {
    voters: Vec<SharedBackend>,
    use_rule_backend: bool,
    lexicons: Lexicons,
    template: String,
}

impl ClassifierAgent {
    pub fn new(
        voters: Vec<SharedBackend>,
        use_rule_backend: bool,
        lexicons: Lexicons,
        templates: &PromptTemplates,
        template_id: &str,
    ) -> Result<Self, ClassifierError> {
        let template = templates
            .get(template_id)
            .ok_or_else(|| ClassifierError::UnknownTemplate(template_id.to_string()))?
            .to_string();
        Ok(Self { voters, use_rule_backend, lexicons, template })
    }

    /// Rule voter only, shipped lexicons.
    pub fn rules_only() -> Self {
        Self::new(Vec::new(), true, Lexicons::builtin(), &PromptTemplates::default(), DEFAULT_TEMPLATE_ID)
            .expect("default template exists")
    }

    pub fn lexicons(&self) -> &Lexicons {
        &self.lexicons
    }

    pub fn voter_count(&self) -> usize {
        self.voters.len() + usize::from(self.use_rule_backend)
    }

    /// Runs every voter (backends concurrently) and fuses the votes. The
    /// outcome does not depend on completion order.
    pub fn classify(&self, claim: &Claim) -> Result<ClassificationResult, ClassifierError> {
        if self.voter_count() == 0 {
            return Err(ClassifierError::NoVoters);
        }
        let answers: Vec<Result<LlmVote, BackendError>> = std::thread::scope(|s| {
            let handles: Vec<_> = self
                .voters
                .iter()
                .map(|b| s.spawn(|| llm_classify(claim, b, &self.template)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(BackendError::Transport("voter panicked".into()))))
                .collect()
        });

        let mut outputs = Vec::new();
        let mut failures = Vec::new();
        let mut errors = Vec::new();
        for (backend, answer) in self.voters.iter().zip(answers) {
            match answer {
                Ok(vote) => outputs.push(VoterOutput {
                    voter_name: backend.name().to_string(),
                    label: vote.distribution.argmax(),
                    distribution: vote.distribution,
                    parse_failure: vote.parse_failure,
                }),
                Err(e) => {
                    failures.push(FailedVoter { voter_name: backend.name().to_string(), error: e.to_string() });
                    errors.push((backend.name().to_string(), e));
                }
            }
        }
        if self.use_rule_backend {
            let d = rule_classify(claim, &self.lexicons);
            outputs.push(VoterOutput {
                voter_name: RULE_VOTER.to_string(),
                label: d.argmax(),
                distribution: d,
                parse_failure: false,
            });
        }
        fuse(outputs, failures).ok_or(ClassifierError::AllVotersFailed(errors))
    }
}
