use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::domain::{timestamp, Verdict};

pub const DEFAULT_LAMBDA: f64 = 0.1;
pub const INITIAL_SCORE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub score: f64,
    pub n_updates: u64,
    #[serde(with = "timestamp")]
    pub updated_at: DateTime<Utc>,
}

/// Per-domain credibility, moved by an exponential moving average of
/// verification outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct CredibilityLedger {
    pub lambda: f64,
    entries: BTreeMap<String, LedgerEntry>,
}

impl Default for CredibilityLedger {
    fn default() -> Self {
        Self::new(DEFAULT_LAMBDA)
    }
}

pub fn ema(score: f64, outcome: f64, lambda: f64) -> f64 {
    (lambda * outcome + (1.0 - lambda) * score).clamp(0.0, 1.0)
}

/// 1.0 for verified, 0.0 for rejected; needs_review carries no outcome.
pub fn outcome_of(verdict: Verdict) -> Option<f64> {
    match verdict {
        Verdict::Verified => Some(1.0),
        Verdict::Rejected => Some(0.0),
        Verdict::NeedsReview => None,
    }
}

impl CredibilityLedger {
    pub fn new(lambda: f64) -> Self {
        Self { lambda, entries: BTreeMap::new() }
    }

    pub fn get(&self, domain: &str) -> Option<&LedgerEntry> {
        self.entries.get(domain)
    }

    pub fn entries(&self) -> &BTreeMap<String, LedgerEntry> {
        &self.entries
    }

    /// Applies a verdict to each distinct domain in `domains`. Returns the
    /// domains whose scores moved.
    pub fn update<'a>(
        &mut self,
        domains: impl IntoIterator<Item = &'a str>,
        verdict: Verdict,
        now: DateTime<Utc>,
    ) -> Vec<String> {
        let Some(outcome) = outcome_of(verdict) else {
            return Vec::new();
        };
        let mut distinct: Vec<&str> = domains.into_iter().collect();
        distinct.sort_unstable();
        distinct.dedup();
        for d in &distinct {
            let entry = self.entries.entry(d.to_string()).or_insert(LedgerEntry {
                score: INITIAL_SCORE,
                n_updates: 0,
                updated_at: now,
            });
            entry.score = ema(entry.score, outcome, self.lambda);
            entry.n_updates += 1;
            entry.updated_at = now;
        }
        distinct.into_iter().map(str::to_string).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("ledger entries serialize")
    }

    pub fn from_json(raw: &str, lambda: f64) -> Result<Self, serde_json::Error> {
        Ok(Self { lambda, entries: serde_json::from_str(raw)? })
    }

    /// Missing file means an empty ledger.
    pub fn load(path: &Path, lambda: f64) -> io::Result<Self> {
        match std::fs::read_to_string(path) {
            Ok(raw) => Self::from_json(&raw, lambda).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Self::new(lambda)),
            Err(e) => Err(e),
        }
    }

    /// Writes through a temporary sibling file and renames it into place.
    pub fn save(&self, path: &Path) -> io::Result<()> {
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, self.to_json())?;
        std::fs::rename(tmp, path)
    }
}
