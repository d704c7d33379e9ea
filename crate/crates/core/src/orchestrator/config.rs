use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::backend::BackendDescriptor;
use crate::classifier::ClassifierConfig;
use crate::corrector::{CorrectionPolicy, ExternalSearchConfig};
use crate::domain::timestamp;
use crate::extractor::ExtractorConfig;
use crate::indexer::{AuthenticityWeights, Bm25Params, ChunkingPolicy, IndexConfig, DEFAULT_DIM};
use crate::verifier::VerifierConfig;

use super::PipelineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexSection {
    /// Where the persisted index lives.
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub reputation_file: Option<PathBuf>,
    #[serde(default = "d_dim")]
    pub dim: usize,
    #[serde(default)]
    pub chunking: ChunkingPolicy,
    #[serde(default)]
    pub bm25: Bm25Params,
    #[serde(default)]
    pub authenticity: AuthenticityWeights,
}

fn d_dim() -> usize {
    DEFAULT_DIM
}

impl Default for IndexSection {
    fn default() -> Self {
        Self {
            dir: None,
            reputation_file: None,
            dim: DEFAULT_DIM,
            chunking: ChunkingPolicy::default(),
            bm25: Bm25Params::default(),
            authenticity: AuthenticityWeights::default(),
        }
    }
}

impl IndexSection {
    pub fn index_config(&self) -> IndexConfig {
        IndexConfig { dim: self.dim, policy: self.chunking, bm25: self.bm25, authenticity: self.authenticity }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectorSection {
    #[serde(default)]
    pub policy: CorrectionPolicy,
    /// Backend name used for stance detection; rule fallback when unset.
    #[serde(default)]
    pub stance_backend: Option<String>,
    /// Backend name used to write corrections; template when unset.
    #[serde(default)]
    pub generator_backend: Option<String>,
    #[serde(default)]
    pub external_search: Option<ExternalSearchConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifierSection {
    #[serde(default)]
    pub ledger: VerifierConfig,
    /// Backend name for the advisory checks.
    #[serde(default)]
    pub backend: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryPolicy {
    #[serde(default = "d_attempts")]
    pub max_attempts: u32,
    #[serde(default = "d_backoff")]
    pub backoff_ms: u64,
}

fn d_attempts() -> u32 {
    2
}
fn d_backoff() -> u64 {
    500
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: d_attempts(), backoff_ms: d_backoff() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "d_timeout")]
    pub stage_timeout_ms: u64,
    #[serde(default = "d_concurrency")]
    pub max_concurrent_claims: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
    /// Per-claim audit chains are mirrored here as JSON Lines.
    #[serde(default)]
    pub audit_dir: Option<PathBuf>,
    /// Pins every message timestamp, for reproducible runs.
    #[serde(default, with = "timestamp::option")]
    pub fixed_clock: Option<DateTime<Utc>>,
}

fn d_timeout() -> u64 {
    30_000
}
fn d_concurrency() -> usize {
    8
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            stage_timeout_ms: d_timeout(),
            max_concurrent_claims: d_concurrency(),
            retry: RetryPolicy::default(),
            audit_dir: None,
            fixed_clock: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.stage_timeout_ms == 0 {
            return Err(PipelineError::Config("stage_timeout_ms must be positive".into()));
        }
        if self.max_concurrent_claims == 0 {
            return Err(PipelineError::Config("max_concurrent_claims must be positive".into()));
        }
        if self.retry.max_attempts == 0 {
            return Err(PipelineError::Config("retry.max_attempts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerConfig {
    #[serde(default = "d_bind")]
    pub bind: String,
}

fn d_bind() -> String {
    "127.0.0.1:8080".into()
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self { bind: d_bind() }
    }
}

/// The whole configuration file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppConfig {
    #[serde(default)]
    pub index: IndexSection,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    #[serde(default)]
    pub extractor: ExtractorConfig,
    #[serde(default)]
    pub corrector: CorrectorSection,
    #[serde(default)]
    pub verifier: VerifierSection,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    /// Backends by name. Descriptors without a name take the map key.
    #[serde(default)]
    pub backends: BTreeMap<String, BackendDescriptor>,
    #[serde(default)]
    pub server: ServerConfig,
}

impl AppConfig {
    pub fn from_json(raw: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(raw).map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Loads a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&raw)?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.index.dir);
        fix(&mut self.index.reputation_file);
        fix(&mut self.classifier.lexicon_file);
        fix(&mut self.classifier.template_dir);
        fix(&mut self.verifier.ledger.ledger_path);
        fix(&mut self.pipeline.audit_dir);
        for d in self.backends.values_mut() {
            fix(&mut d.script_file);
        }
    }
}
