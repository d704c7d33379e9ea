use std::fmt::Write;

use crate::domain::{timestamp, CheckResult, Claim, Correction, OutputFormat};
use crate::text::collapse_whitespace;

pub const REPORT_HEADERS: [&str; 6] = [
    "## Claim",
    "## Classification",
    "## Correction",
    "## Evidence",
    "## Lineage",
    "## Checks",
];

pub const SOURCES_HEADER: &str = "Sources:";

fn citation_line(c: &crate::domain::Citation) -> String {
    format!(
        "{} ({}, authenticity {:.2}, published {})",
        c.url,
        c.domain,
        c.authenticity,
        timestamp::render(&c.published_at)
    )
}

fn check_line(c: &CheckResult) -> String {
    format!(
        "- {}: {} ({}){}",
        c.name.name(),
        if c.passed { "pass" } else { "fail" },
        if c.mandatory { "mandatory" } else { "advisory" },
        if c.detail.is_empty() { String::new() } else { format!(" {}", collapse_whitespace(&c.detail)) }
    )
}

/// Renders the final text in the requested format.
pub fn render(claim: &Claim, correction: &Correction, checks: &[CheckResult], format: OutputFormat) -> String {
    let statement = collapse_whitespace(&correction.corrected_statement);
    let claim_text = collapse_whitespace(&claim.text);
    let mut out = String::new();
    match format {
        OutputFormat::Prose => {
            let _ = writeln!(
                out,
                "{statement} The claim was classified as {} with confidence {:.2}.",
                correction.label, correction.confidence
            );
            let _ = writeln!(out);
            let _ = writeln!(out, "{SOURCES_HEADER}");
            for (i, c) in correction.citations.iter().enumerate() {
                let _ = writeln!(out, "{}. {}", i + 1, citation_line(c));
            }
        }
        OutputFormat::Bullet => {
            let _ = writeln!(out, "- Claim: {claim_text}");
            let _ = writeln!(out, "- Classification: {} (confidence {:.2})", correction.label, correction.confidence);
            let _ = writeln!(out, "- Correction: {statement}");
            for c in &correction.citations {
                let _ = writeln!(out, "- Source: {}", citation_line(c));
            }
            let _ = writeln!(out, "- Origin: {}", correction.lineage.origin_id);
        }
        OutputFormat::Report => {
            let g = &correction.lineage;
            let _ = writeln!(out, "{}\n{claim_text}\n", REPORT_HEADERS[0]);
            let _ = writeln!(
                out,
                "{}\n{} (confidence {:.2})\n",
                REPORT_HEADERS[1], correction.label, correction.confidence
            );
            let _ = writeln!(out, "{}\n{statement}\n", REPORT_HEADERS[2]);
            let _ = writeln!(out, "{}", REPORT_HEADERS[3]);
            if correction.citations.is_empty() {
                let _ = writeln!(out, "No citations.");
            }
            for (i, c) in correction.citations.iter().enumerate() {
                let _ = writeln!(out, "{}. {}", i + 1, citation_line(c));
            }
            let _ = writeln!(out);
            let _ = writeln!(
                out,
                "{}\nOrigin {} among {} documents, {} links.\n",
                REPORT_HEADERS[4],
                g.origin_id,
                g.nodes.len(),
                g.edges.len()
            );
            let _ = writeln!(out, "{}", REPORT_HEADERS[5]);
            for c in checks {
                let _ = writeln!(out, "{}", check_line(c));
            }
        }
    }
    out
}

fn is_numbered(line: &str) -> bool {
    let digits = line.chars().take_while(char::is_ascii_digit).count();
    digits > 0 && line[digits..].starts_with(". ")
}

/// Checks `text` against the grammar of `format`. Returns the first problem.
pub fn check_format(text: &str, format: OutputFormat) -> Result<(), String> {
    let lines: Vec<&str> = text.lines().collect();
    match format {
        OutputFormat::Bullet => {
            if lines.iter().all(|l| l.trim().is_empty()) {
                return Err("no bullet lines".into());
            }
            match lines.iter().find(|l| !l.trim().is_empty() && !l.starts_with("- ")) {
                Some(l) => Err(format!("line is not a bullet: {l:?}")),
                None => Ok(()),
            }
        }
        OutputFormat::Report => {
            let mut pos = 0;
            for h in REPORT_HEADERS {
                match lines[pos..].iter().position(|l| *l == h) {
                    Some(p) => pos += p + 1,
                    None => return Err(format!("missing or misplaced header {h:?}")),
                }
            }
            Ok(())
        }
        OutputFormat::Prose => {
            let Some(split) = lines.iter().position(|l| *l == SOURCES_HEADER) else {
                return Err("missing Sources list".into());
            };
            if !lines[..split].iter().any(|l| !l.trim().is_empty()) {
                return Err("empty paragraph".into());
            }
            let mut expected = 1;
            for l in lines[split + 1..].iter().filter(|l| !l.trim().is_empty()) {
                if !is_numbered(l) || !l.starts_with(&format!("{expected}. ")) {
                    return Err(format!("bad source line: {l:?}"));
                }
                expected += 1;
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{CheckName, Citation, LineageGraph, MisinfoLabel};
    use chrono::{TimeZone, Utc};
    use std::collections::{BTreeMap, BTreeSet};

    fn fixture() -> (Claim, Correction) {
        let t = Utc.with_ymd_and_hms(2024, 2, 1, 0, 0, 0).unwrap();
        let claim = Claim::new("c1", "The river\nran dry", t);
        let correction = Correction {
            claim_id: "c1".into(),
            label: MisinfoLabel::FactualError,
            corrected_statement: "The river\n\nis flowing.".into(),
            citations: vec![Citation {
                doc_id: "d1".into(),
                url: "https://a.org/d1".into(),
                domain: "a.org".into(),
                authenticity: 0.8,
                published_at: t,
            }],
            confidence: 0.9,
            lineage: LineageGraph {
                nodes: BTreeSet::from(["d0".to_string()]),
                edges: vec![],
                origin_id: "d0".into(),
                node_times: BTreeMap::new(),
            },
            flags: vec![],
        };
        (claim, correction)
    }

    #[test]
    fn every_format_satisfies_its_grammar() {
        let (claim, correction) = fixture();
        let checks = [CheckResult::new(CheckName::CitationsExist, true, "")];
        for f in [OutputFormat::Prose, OutputFormat::Bullet, OutputFormat::Report] {
            let text = render(&claim, &correction, &checks, f);
            assert_eq!(check_format(&text, f), Ok(()), "{f:?}:\n{text}");
        }
    }

    #[test]
    fn report_has_all_headers() {
        let (claim, correction) = fixture();
        let text = render(&claim, &correction, &[], OutputFormat::Report);
        for h in REPORT_HEADERS {
            assert!(text.lines().any(|l| l == h));
        }
    }

    #[test]
    fn grammar_rejections() {
        assert!(check_format("- a\nb", OutputFormat::Bullet).is_err());
        assert!(check_format("", OutputFormat::Bullet).is_err());
        assert!(check_format("## Claim\n## Checks", OutputFormat::Report).is_err());
        assert!(check_format("text\nSources:\n2. x", OutputFormat::Prose).is_err());
        assert!(check_format("text\nSources:\n1. x\n2. y", OutputFormat::Prose).is_ok());
        assert!(check_format("Sources:\n1. x", OutputFormat::Prose).is_err());
    }
}
