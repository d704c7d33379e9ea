use std::fmt;
use std::str::FromStr;

use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::ser::{SerializeMap, SerializeStruct, Serializer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The closed misinformation taxonomy. Declaration order is the final
/// tie-break wherever labels compete.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MisinfoLabel {
    StatisticalError,
    CherryPicking,
    Propaganda,
    Misrepresentation,
    HistoricalManipulation,
    LogicalFallacy,
    FactualError,
    NotMisinformation,
}

impl MisinfoLabel {
    pub const ALL: [MisinfoLabel; 8] = [
        MisinfoLabel::StatisticalError,
        MisinfoLabel::CherryPicking,
        MisinfoLabel::Propaganda,
        MisinfoLabel::Misrepresentation,
        MisinfoLabel::HistoricalManipulation,
        MisinfoLabel::LogicalFallacy,
        MisinfoLabel::FactualError,
        MisinfoLabel::NotMisinformation,
    ];

    /// The seven labels that denote misinformation.
    pub const MISINFORMATION: [MisinfoLabel; 7] = [
        MisinfoLabel::StatisticalError,
        MisinfoLabel::CherryPicking,
        MisinfoLabel::Propaganda,
        MisinfoLabel::Misrepresentation,
        MisinfoLabel::HistoricalManipulation,
        MisinfoLabel::LogicalFallacy,
        MisinfoLabel::FactualError,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MisinfoLabel::StatisticalError => "statistical_error",
            MisinfoLabel::CherryPicking => "cherry_picking",
            MisinfoLabel::Propaganda => "propaganda",
            MisinfoLabel::Misrepresentation => "misrepresentation",
            MisinfoLabel::HistoricalManipulation => "historical_manipulation",
            MisinfoLabel::LogicalFallacy => "logical_fallacy",
            MisinfoLabel::FactualError => "factual_error",
            MisinfoLabel::NotMisinformation => "not_misinformation",
        }
    }

    /// Position in declaration order.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_misinformation(self) -> bool {
        self != MisinfoLabel::NotMisinformation
    }
}

impl fmt::Display for MisinfoLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown misinformation label: {0:?}")]
pub struct UnknownLabel(pub String);

/// Case-insensitive match against the taxonomy names. Surrounding whitespace
/// is ignored; anything else must match exactly.
pub fn parse_label(name: &str) -> Result<MisinfoLabel, UnknownLabel> {
    let needle = name.trim();
    MisinfoLabel::ALL
        .into_iter()
        .find(|l| l.name().eq_ignore_ascii_case(needle))
        .ok_or_else(|| UnknownLabel(name.to_string()))
}

impl FromStr for MisinfoLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_label(s)
    }
}

/// Tolerance on the sum of a distribution.
pub const DISTRIBUTION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistributionError {
    #[error("distribution has no positive mass")]
    NoMass,
    #[error("score for {label} is invalid: {value}")]
    InvalidScore { label: MisinfoLabel, value: f64 },
    #[error("missing label {0}")]
    MissingLabel(MisinfoLabel),
    #[error("scores sum to {0}, expected 1")]
    NotNormalized(f64),
}

/// Scores over all eight labels, summing to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelDistribution {
    scores: [f64; 8],
}

impl LabelDistribution {
    /// Normalizes non-negative raw scores (indexed in taxonomy order).
    pub fn from_weights(weights: [f64; 8]) -> Result<Self, DistributionError> {
        for (label, &w) in MisinfoLabel::ALL.iter().zip(weights.iter()) {
            if !w.is_finite() || w < 0.0 {
                return Err(DistributionError::InvalidScore { label: *label, value: w });
            }
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(DistributionError::NoMass);
        }
        let mut scores = weights;
        for s in &mut scores {
            *s /= total;
        }
        Ok(Self { scores })
    }

    pub fn one_hot(label: MisinfoLabel) -> Self {
        let mut scores = [0.0; 8];
        scores[label.index()] = 1.0;
        Self { scores }
    }

    /// `peak` on `label`, the remainder spread evenly over the other seven.
    pub fn smoothed(label: MisinfoLabel, peak: f64) -> Self {
        let peak = peak.clamp(0.0, 1.0);
        let rest = (1.0 - peak) / 7.0;
        let mut scores = [rest; 8];
        scores[label.index()] = peak;
        Self::from_weights(scores).unwrap_or_else(|_| Self::one_hot(label))
    }

    /// Arithmetic mean of the inputs, renormalized.
    pub fn mean<'a>(dists: impl IntoIterator<Item = &'a LabelDistribution>) -> Option<Self> {
        let mut acc = [0.0; 8];
        let mut n = 0usize;
        for d in dists {
            for (a, s) in acc.iter_mut().zip(d.scores.iter()) {
                *a += s;
            }
            n += 1;
        }
        if n == 0 {
            return None;
        }
        for a in &mut acc {
            *a /= n as f64;
        }
        Self::from_weights(acc).ok()
    }

    pub fn get(&self, label: MisinfoLabel) -> f64 {
        self.scores[label.index()]
    }

    /// Scores in taxonomy order.
    pub fn scores(&self) -> &[f64; 8] {
        &self.scores
    }

    /// Highest-scoring label; ties go to the earliest label in taxonomy order.
    pub fn argmax(&self) -> MisinfoLabel {
        let mut best = 0;
        for i in 1..8 {
            if self.scores[i] > self.scores[best] {
                best = i;
            }
        }
        MisinfoLabel::ALL[best]
    }

    pub fn iter(&self) -> impl Iterator<Item = (MisinfoLabel, f64)> + '_ {
        MisinfoLabel::ALL.into_iter().zip(self.scores.iter().copied())
    }
}

struct SortedScores<'a>(&'a LabelDistribution);

impl Serialize for SortedScores<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut entries: Vec<(&str, f64)> = self.0.iter().map(|(l, s)| (l.name(), s)).collect();
        entries.sort_by(|a, b| a.0.cmp(b.0));
        let mut map = serializer.serialize_map(Some(entries.len()))?;
        for (k, v) in entries {
            map.serialize_entry(k, &v)?;
        }
        map.end()
    }
}

impl Serialize for LabelDistribution {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("LabelDistribution", 1)?;
        st.serialize_field("scores", &SortedScores(self))?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for LabelDistribution {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Repr {
            scores: ScoreMap,
        }

        struct ScoreMap([Option<f64>; 8]);

        impl<'de> Deserialize<'de> for ScoreMap {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                struct V;
                impl<'de> Visitor<'de> for V {
                    type Value = ScoreMap;
                    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                        f.write_str("a map from label name to score")
                    }
                    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<ScoreMap, A::Error> {
                        let mut out = [None; 8];
                        while let Some((k, v)) = map.next_entry::<String, f64>()? {
                            let label = parse_label(&k).map_err(de::Error::custom)?;
                            out[label.index()] = Some(v);
                        }
                        Ok(ScoreMap(out))
                    }
                }
                deserializer.deserialize_map(V)
            }
        }

        let repr = Repr::deserialize(deserializer)?;
        let mut scores = [0.0; 8];
        for (i, s) in repr.scores.0.iter().enumerate() {
            let label = MisinfoLabel::ALL[i];
            let v = s.ok_or_else(|| de::Error::custom(DistributionError::MissingLabel(label)))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(de::Error::custom(DistributionError::InvalidScore { label, value: v }));
            }
            scores[i] = v;
        }
        let total: f64 = scores.iter().sum();
        if (total - 1.0).abs() > DISTRIBUTION_TOLERANCE {
            return Err(de::Error::custom(DistributionError::NotNormalized(total)));
        }
        Ok(Self { scores })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_label_case_folds() {
        assert_eq!(parse_label("Propaganda").unwrap(), MisinfoLabel::Propaganda);
        assert_eq!(parse_label("statistical_error").unwrap(), MisinfoLabel::StatisticalError);
        assert_eq!(parse_label(" Factual_Error ").unwrap(), MisinfoLabel::FactualError);
    }

    #[test]
    fn parse_label_rejects_unknown() {
        let err = parse_label("satire").unwrap_err();
        assert!(err.to_string().contains("satire"));
        assert!(parse_label("factual error").is_err());
        assert!(parse_label("").is_err());
    }

    #[test]
    fn taxonomy_is_closed_and_ordered() {
        assert_eq!(MisinfoLabel::ALL.len(), 8);
        for (i, l) in MisinfoLabel::ALL.iter().enumerate() {
            assert_eq!(l.index(), i);
        }
    }

    #[test]
    fn smoothed_shape() {
        let d = LabelDistribution::smoothed(MisinfoLabel::Propaganda, 0.9);
        assert_eq!(d.argmax(), MisinfoLabel::Propaganda);
        assert!((d.get(MisinfoLabel::Propaganda) - 0.9).abs() < 1e-12);
        assert!((d.get(MisinfoLabel::FactualError) - 0.1 / 7.0).abs() < 1e-12);
        assert!((d.scores().iter().sum::<f64>() - 1.0).abs() < DISTRIBUTION_TOLERANCE);
    }

    #[test]
    fn argmax_ties_prefer_taxonomy_order() {
        let d = LabelDistribution::from_weights([0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(d.argmax(), MisinfoLabel::CherryPicking);
    }

    #[test]
    fn serialized_keys_are_sorted() {
        let d = LabelDistribution::from_weights([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap();
        let text = serde_json::to_string(&d).unwrap();
        let expected_order = [
            "cherry_picking",
            "factual_error",
            "historical_manipulation",
            "logical_fallacy",
            "misrepresentation",
            "not_misinformation",
            "propaganda",
            "statistical_error",
        ];
        let positions: Vec<usize> = expected_order.iter().map(|k| text.find(k).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]), "{text}");
        assert!(text.starts_with("{\"scores\":{\"cherry_picking\":"));
    }

    #[test]
    fn deserialize_rejects_bad_mass() {
        let mut v: serde_json::Value =
            serde_json::to_value(LabelDistribution::one_hot(MisinfoLabel::Propaganda)).unwrap();
        v["scores"]["propaganda"] = serde_json::json!(0.5);
        assert!(serde_json::from_value::<LabelDistribution>(v.clone()).is_err());
        v["scores"].as_object_mut().unwrap().remove("propaganda");
        assert!(serde_json::from_value::<LabelDistribution>(v).is_err());
    }

    #[test]
    fn mean_of_distributions_is_normalized() {
        let a = LabelDistribution::one_hot(MisinfoLabel::Propaganda);
        let b = LabelDistribution::smoothed(MisinfoLabel::FactualError, 0.9);
        let m = LabelDistribution::mean([&a, &b]).unwrap();
        assert!((m.scores().iter().sum::<f64>() - 1.0).abs() < DISTRIBUTION_TOLERANCE);
        assert!(LabelDistribution::mean(std::iter::empty()).is_none());
    }
}
