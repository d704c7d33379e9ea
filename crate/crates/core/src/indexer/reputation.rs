//! Operator-curated domain reputation table.
//!
//! File format: a JSON object mapping a domain either to a bare reputation
//! number or to `{"reputation": .., "category": .., "citations": ..}`.
//! Subdomains inherit the entry of their closest listed parent.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub const DEFAULT_REPUTATION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SourceCategory {
    News,
    Statistics,
    Science,
    History,
    Factcheck,
    Government,
    #[default]
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReputationEntry {
    pub reputation: f64,
    #[serde(default)]
    pub category: SourceCategory,
    /// Curated citation count added to the count observed in the corpus.
    #[serde(default)]
    pub citations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum EntryRepr {
    Score(f64),
    Full(ReputationEntry),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "BTreeMap<String, EntryRepr>", into = "BTreeMap<String, ReputationEntry>")]
pub struct ReputationTable {
    entries: BTreeMap<String, ReputationEntry>,
}

impl From<BTreeMap<String, EntryRepr>> for ReputationTable {
    fn from(raw: BTreeMap<String, EntryRepr>) -> Self {
        let entries = raw
            .into_iter()
            .map(|(domain, repr)| {
                let entry = match repr {
                    EntryRepr::Score(reputation) => ReputationEntry {
                        reputation,
                        category: SourceCategory::Other,
                        citations: 0,
                    },
                    EntryRepr::Full(e) => e,
                };
                (domain.to_lowercase(), entry)
            })
            .collect();
        Self { entries }
    }
}

impl From<ReputationTable> for BTreeMap<String, ReputationEntry> {
    fn from(t: ReputationTable) -> Self {
        t.entries
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReputationError {
    #[error("reading reputation table: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing reputation table: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("reputation for {domain} outside [0, 1]: {value}")]
    OutOfRange { domain: String, value: f64 },
}

impl ReputationTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_json(raw: &str) -> Result<Self, ReputationError> {
        let table: Self = serde_json::from_str(raw)?;
        table.validate()?;
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, ReputationError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<(), ReputationError> {
        for (domain, e) in &self.entries {
            if !(0.0..=1.0).contains(&e.reputation) {
                return Err(ReputationError::OutOfRange { domain: domain.clone(), value: e.reputation });
            }
        }
        Ok(())
    }

    pub fn insert(&mut self, domain: &str, reputation: f64, category: SourceCategory) {
        self.entries.insert(
            domain.to_lowercase(),
            ReputationEntry { reputation: reputation.clamp(0.0, 1.0), category, citations: 0 },
        );
    }

    pub fn insert_entry(&mut self, domain: &str, entry: ReputationEntry) {
        let mut entry = entry;
        entry.reputation = entry.reputation.clamp(0.0, 1.0);
        self.entries.insert(domain.to_lowercase(), entry);
    }

    /// Overrides a domain's reputation, keeping its (possibly inherited)
    /// category and curated citations.
    pub fn set_reputation(&mut self, domain: &str, reputation: f64) {
        let mut entry = self.lookup(domain).cloned().unwrap_or(ReputationEntry {
            reputation: DEFAULT_REPUTATION,
            category: SourceCategory::Other,
            citations: 0,
        });
        entry.reputation = reputation.clamp(0.0, 1.0);
        self.entries.insert(domain.to_lowercase(), entry);
    }

    /// Entry for the domain or its nearest listed parent domain.
    pub fn lookup(&self, domain: &str) -> Option<&ReputationEntry> {
        let mut d = domain;
        loop {
            if let Some(e) = self.entries.get(d) {
                return Some(e);
            }
            d = &d[d.find('.')? + 1..];
        }
    }

    pub fn reputation(&self, domain: &str) -> f64 {
        self.lookup(domain).map_or(DEFAULT_REPUTATION, |e| e.reputation)
    }

    pub fn category(&self, domain: &str) -> SourceCategory {
        self.lookup(domain).map_or(SourceCategory::Other, |e| e.category)
    }

    pub fn curated_citations(&self, domain: &str) -> u64 {
        self.lookup(domain).map_or(0, |e| e.citations)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
