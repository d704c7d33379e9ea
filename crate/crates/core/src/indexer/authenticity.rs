use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::domain::Document;

use super::SourceProfile;

/// Weights of the authenticity blend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuthenticityWeights {
    pub reputation: f64,
    pub recency: f64,
    pub citations: f64,
}

impl Default for AuthenticityWeights {
    fn default() -> Self {
        Self { reputation: 0.5, recency: 0.25, citations: 0.25 }
    }
}

/// `exp(-age_days / 365)`; documents dated in the future count as new.
pub fn recency(published_at: DateTime<Utc>, now: DateTime<Utc>) -> f64 {
    let age_days = (now - published_at).num_milliseconds() as f64 / 86_400_000.0;
    (-age_days.max(0.0) / 365.0).exp()
}

pub fn citation_norm(count: u64) -> f64 {
    let c = count as f64;
    c / (c + 10.0)
}

/// Source trust in `[0, 1]` from domain reputation, document recency and
/// how often the domain is cited.
pub fn authenticity(
    profile: &SourceProfile,
    doc: &Document,
    now: DateTime<Utc>,
    weights: &AuthenticityWeights,
) -> f64 {
    let a = weights.reputation * profile.reputation
        + weights.recency * recency(doc.published_at, now)
        + weights.citations * citation_norm(profile.citation_count);
    a.clamp(0.0, 1.0)
}
