//! HTTP API and command-line front end over the factline pipeline.

pub mod api;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use chrono::{DateTime, Utc};
use factline_core::domain::{sha256, timestamp, Claim, Document};
use factline_core::indexer::{Index, ReputationTable};
use factline_core::orchestrator::{AppConfig, Orchestrator};
use serde::{Deserialize, Serialize};

const MANIFEST: &str = "manifest.json";

/// Fills every storage path the config leaves unset with a location under
/// `data_dir`.
pub fn with_data_dir(mut cfg: AppConfig, data_dir: &Path) -> AppConfig {
    cfg.index.dir.get_or_insert_with(|| data_dir.join("index"));
    cfg.pipeline.audit_dir.get_or_insert_with(|| data_dir.join("audit"));
    cfg.verifier.ledger.ledger_path.get_or_insert_with(|| data_dir.join("ledger.json"));
    cfg
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejected {
    /// 1-based line number in the submitted JSON Lines.
    pub line: usize,
    pub id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub added: usize,
    pub rejected: Vec<Rejected>,
}

/// An orchestrator plus the on-disk locations it was opened from.
pub struct Service {
    orch: Orchestrator,
    index_dir: Option<PathBuf>,
    fixed_clock: Option<DateTime<Utc>>,
}

impl Service {
    /// Loads the persisted index when `index.dir` holds one, otherwise starts
    /// empty, then wires the pipeline from `cfg`.
    pub fn open(cfg: &AppConfig) -> anyhow::Result<Self> {
        let wanted = cfg.index.index_config();
        let mut index = match &cfg.index.dir {
            Some(dir) if dir.join(MANIFEST).exists() => {
                let index = Index::load(dir).with_context(|| format!("loading index from {}", dir.display()))?;
                if *index.config() != wanted {
                    bail!("index at {} was built with a different index configuration", dir.display());
                }
                index
            }
            _ => Index::new(wanted)?,
        };
        if let Some(path) = &cfg.index.reputation_file {
            let table = ReputationTable::load(path).with_context(|| format!("reputation table {}", path.display()))?;
            index.set_reputation_table(table);
        }
        let orch = Orchestrator::from_config(cfg, index.into_shared())?;
        Ok(Self { orch, index_dir: cfg.index.dir.clone(), fixed_clock: cfg.pipeline.fixed_clock })
    }

    pub fn orchestrator(&self) -> &Orchestrator {
        &self.orch
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.fixed_clock.unwrap_or_else(Utc::now)
    }

    /// A claim whose id is derived from its text and receipt time, so the
    /// same input always gets the same id.
    pub fn claim(&self, text: &str, received_at: Option<DateTime<Utc>>) -> Claim {
        let received_at = received_at.unwrap_or_else(|| self.now());
        Claim::new(claim_id(text, received_at), text, received_at)
    }

    /// Adds every valid document in a JSON Lines body and persists the index
    /// when it has a directory. Bad lines are reported, not fatal.
    pub fn ingest_jsonl(&self, body: &str) -> anyhow::Result<IngestReport> {
        let mut report = IngestReport::default();
        {
            let mut index = self.orch.index().write();
            for (i, line) in body.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let reject = |id: Option<String>, reason: String| Rejected { line: i + 1, id, reason };
                match serde_json::from_str::<Document>(line) {
                    Err(e) => report.rejected.push(reject(None, e.to_string())),
                    Ok(doc) => {
                        let id = doc.id.clone();
                        match index.add(doc) {
                            Ok(_) => report.added += 1,
                            Err(e) => report.rejected.push(reject(Some(id), e.to_string())),
                        }
                    }
                }
            }
        }
        if report.added > 0 {
            self.persist()?;
        }
        Ok(report)
    }

    pub fn persist(&self) -> anyhow::Result<()> {
        if let Some(dir) = &self.index_dir {
            self.orch
                .index()
                .read()
                .persist(dir)
                .with_context(|| format!("persisting index to {}", dir.display()))?;
        }
        Ok(())
    }
}

pub fn claim_id(text: &str, received_at: DateTime<Utc>) -> String {
    let mut input = text.as_bytes().to_vec();
    input.push(0);
    input.extend_from_slice(timestamp::render(&received_at).as_bytes());
    format!("claim-{}", hex::encode(&sha256(&input)[..12]))
}
