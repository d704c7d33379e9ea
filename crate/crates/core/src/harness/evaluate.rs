use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::domain::{MisinfoLabel, VerificationReport};

use super::{GroundTruth, HarnessError};

/// A finished pipeline run as the harness sees it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub claim_id: String,
    pub report: VerificationReport,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub label_macro_f1: f64,
    pub origin_accuracy: f64,
    pub citation_validity_rate: f64,
    pub mean_pipeline_latency_ms: f64,
}

/// Macro-averaged F1 over every label that occurs as truth or prediction.
/// A label with no true positives scores 0.
pub fn macro_f1(pairs: &[(MisinfoLabel, MisinfoLabel)]) -> f64 {
    let labels: BTreeSet<MisinfoLabel> = pairs.iter().flat_map(|(t, p)| [*t, *p]).collect();
    if labels.is_empty() {
        return 0.0;
    }
    let total: f64 = labels
        .iter()
        .map(|&l| {
            let tp = pairs.iter().filter(|(t, p)| *t == l && *p == l).count() as f64;
            let fp = pairs.iter().filter(|(t, p)| *t != l && *p == l).count() as f64;
            let fn_ = pairs.iter().filter(|(t, p)| *t == l && *p != l).count() as f64;
            if tp == 0.0 {
                0.0
            } else {
                2.0 * tp / (2.0 * tp + fp + fn_)
            }
        })
        .sum();
    total / labels.len() as f64
}

/// Scores runs against ground truth. Every claim in the truth needs a
/// record; records for unknown claims are ignored. A citation is valid when
/// it names a generated document and its authenticity reaches `theta`.
pub fn evaluate(records: &[RunRecord], truth: &GroundTruth, theta: f64) -> Result<Metrics, HarnessError> {
    let by_claim: BTreeMap<&str, &RunRecord> = records.iter().map(|r| (r.claim_id.as_str(), r)).collect();
    let missing: Vec<String> =
        truth.claim_answers.keys().filter(|id| !by_claim.contains_key(id.as_str())).cloned().collect();
    if !missing.is_empty() {
        return Err(HarnessError::MissingReports(missing));
    }

    let mut pairs = Vec::new();
    let mut origins_hit = 0usize;
    let (mut cited, mut valid) = (0usize, 0usize);
    let mut latency = 0.0;
    for (id, answer) in &truth.claim_answers {
        let rec = by_claim[id.as_str()];
        let correction = &rec.report.correction;
        pairs.push((answer.label, correction.label));
        if correction.lineage.origin_id == answer.origin_doc {
            origins_hit += 1;
        }
        for c in &correction.citations {
            cited += 1;
            if truth.doc_labels.contains_key(&c.doc_id) && c.authenticity >= theta {
                valid += 1;
            }
        }
        latency += rec.latency_ms;
    }
    let n = truth.claim_answers.len();
    let ratio = |a: usize, b: usize| if b == 0 { 1.0 } else { a as f64 / b as f64 };
    Ok(Metrics {
        label_macro_f1: if n == 0 { 1.0 } else { macro_f1(&pairs) },
        origin_accuracy: ratio(origins_hit, n),
        citation_validity_rate: ratio(valid, cited),
        mean_pipeline_latency_ms: if n == 0 { 0.0 } else { latency / n as f64 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Citation, Correction, LineageGraph, Verdict};
    use crate::harness::ClaimAnswer;
    use chrono::{TimeZone, Utc};
    use MisinfoLabel::*;

    #[test]
    fn macro_f1_three_by_three() {
        // truth/prediction confusion:
        //            pred P  pred F  pred S
        // true P        2       1       0
        // true F        0       2       0
        // true S        1       0       1
        let mut pairs = vec![(Propaganda, Propaganda); 2];
        pairs.push((Propaganda, FactualError));
        pairs.extend([(FactualError, FactualError); 2]);
        pairs.push((StatisticalError, Propaganda));
        pairs.push((StatisticalError, StatisticalError));
        // P: tp2 fp1 fn1 -> 4/6; F: tp2 fp1 fn0 -> 4/5; S: tp1 fp0 fn1 -> 2/3
        let expect = (4.0 / 6.0 + 4.0 / 5.0 + 2.0 / 3.0) / 3.0;
        assert!((macro_f1(&pairs) - expect).abs() < 1e-12);
    }

    fn report(claim: &str, label: MisinfoLabel, origin: &str, cites: &[(&str, f64)]) -> RunRecord {
        let t = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
        let citations = cites
            .iter()
            .map(|(d, a)| Citation {
                doc_id: d.to_string(),
                url: String::new(),
                domain: "x.org".into(),
                authenticity: *a,
                published_at: t,
            })
            .collect();
        let correction = Correction {
            claim_id: claim.into(),
            label,
            corrected_statement: String::new(),
            citations,
            confidence: 1.0,
            lineage: LineageGraph {
                nodes: [origin.to_string()].into(),
                edges: vec![],
                origin_id: origin.into(),
                node_times: BTreeMap::new(),
            },
            flags: vec![],
        };
        RunRecord {
            claim_id: claim.into(),
            report: VerificationReport {
                claim_id: claim.into(),
                checks: vec![],
                verdict: Verdict::Verified,
                final_text: String::new(),
                correction,
            },
            latency_ms: 10.0,
        }
    }

    fn truth(n: usize) -> GroundTruth {
        let mut t = GroundTruth::default();
        for i in 0..n {
            t.doc_labels.insert(format!("d{i}"), Propaganda);
            t.trees.insert(format!("d{i}"), format!("d{i}"));
            t.claim_answers.insert(format!("c{i}"), ClaimAnswer { label: Propaganda, origin_doc: format!("d{i}") });
        }
        t
    }

    #[test]
    fn origin_accuracy_counts_exact_matches() {
        let t = truth(10);
        let mut recs: Vec<_> = (0..10).map(|i| report(&format!("c{i}"), Propaganda, &format!("d{i}"), &[])).collect();
        recs[4] = report("c4", Propaganda, "d5", &[]);
        let m = evaluate(&recs, &t, 0.6).unwrap();
        assert!((m.origin_accuracy - 0.9).abs() < 1e-12);
        assert_eq!(m.label_macro_f1, 1.0);
        assert_eq!(m.citation_validity_rate, 1.0);
        assert_eq!(m.mean_pipeline_latency_ms, 10.0);
    }

    #[test]
    fn citation_validity() {
        let t = truth(2);
        let recs = vec![
            report("c0", Propaganda, "d0", &[("d1", 0.9), ("ghost", 0.9)]),
            report("c1", Propaganda, "d1", &[("d0", 0.5), ("d0", 0.7)]),
        ];
        let m = evaluate(&recs, &t, 0.6).unwrap();
        assert!((m.citation_validity_rate - 0.5).abs() < 1e-12);
    }

    #[test]
    fn order_does_not_matter() {
        let t = truth(5);
        let mut recs: Vec<_> =
            (0..5).map(|i| report(&format!("c{i}"), if i % 2 == 0 { Propaganda } else { CherryPicking }, "d0", &[])).collect();
        let a = evaluate(&recs, &t, 0.6).unwrap();
        recs.reverse();
        assert_eq!(a, evaluate(&recs, &t, 0.6).unwrap());
    }

    #[test]
    fn missing_reports_are_named() {
        let t = truth(3);
        let recs = vec![report("c1", Propaganda, "d1", &[])];
        match evaluate(&recs, &t, 0.6) {
            Err(HarnessError::MissingReports(ids)) => assert_eq!(ids, vec!["c0".to_string(), "c2".to_string()]),
            other => panic!("{other:?}"),
        }
    }
}
