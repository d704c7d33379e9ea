use std::path::Path;
use std::process::{Command, Output};

use factline_core::domain::{Claim, Verdict, VerificationReport};
use factline_core::harness::GroundTruth;
use serde_json::Value;

fn factline(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_factline")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = factline(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Setup {
    _tmp: tempfile::TempDir,
    corpus: std::path::PathBuf,
    config: String,
}

fn setup(seed: &str, trees: &str) -> Setup {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    ok(&["generate", "--seed", seed, "--trees", trees, "--docs-per-tree", "4", "--out", s(&corpus)]);
    let config = s(&corpus.join("config.json")).to_string();
    Setup { _tmp: tmp, corpus, config }
}

fn ingest(setup: &Setup, data: &Path) {
    let out = ok(&["--config", &setup.config, "--data-dir", s(data), "ingest", s(&setup.corpus.join("corpus.jsonl"))]);
    let report: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["rejected"].as_array().unwrap().len(), 0);
    assert!(report["added"].as_u64().unwrap() > 0);
}

fn claims(setup: &Setup) -> Vec<Claim> {
    std::fs::read_to_string(setup.corpus.join("claims.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn check_is_byte_identical_across_runs() {
    let setup = setup("21", "50");
    let truth: GroundTruth =
        serde_json::from_str(&std::fs::read_to_string(setup.corpus.join("ground_truth.json")).unwrap()).unwrap();
    let runs: Vec<_> = (0..2)
        .map(|i| {
            let data = setup._tmp.path().join(format!("data{i}"));
            ingest(&setup, &data);
            data
        })
        .collect();

    let claims = claims(&setup);
    assert_eq!(claims.len(), 50);
    let (mut cited, mut valid) = (0, 0);
    for claim in &claims {
        let outputs: Vec<String> = runs
            .iter()
            .map(|d| ok(&["--config", &setup.config, "--data-dir", s(d), "check", &claim.text]))
            .collect();
        assert_eq!(outputs[0], outputs[1], "claim {}", claim.id);
        let report: VerificationReport = serde_json::from_str(&outputs[0]).unwrap();
        assert_eq!(report.verdict, Verdict::Verified, "claim {}", claim.id);
        for c in &report.correction.citations {
            cited += 1;
            if truth.doc_labels.contains_key(&c.doc_id) && c.authenticity >= 0.6 {
                valid += 1;
            }
        }
    }
    assert!(cited > 0);
    assert_eq!(valid, cited, "citation validity {valid}/{cited}");
}

#[test]
fn audit_chain_on_disk_detects_tampering() {
    let setup = setup("4", "3");
    let data = setup._tmp.path().join("data");
    ingest(&setup, &data);
    let text = claims(&setup)[0].text.clone();
    let report: VerificationReport =
        serde_json::from_str(&ok(&["--config", &setup.config, "--data-dir", s(&data), "check", &text])).unwrap();

    let again = factline(&["--config", &setup.config, "--data-dir", s(&data), "check", &text]);
    assert!(!again.status.success());

    let verified = ok(&["--data-dir", s(&data), "verify-audit", &report.claim_id]);
    let v: Value = serde_json::from_str(&verified).unwrap();
    assert_eq!(v["records"], 9);
    assert_eq!(v["check"]["valid"], true);

    let path = data.join("audit").join(format!("{}.jsonl", report.claim_id));
    let raw = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = raw.lines().map(str::to_string).collect();
    lines[4] = lines[4].replacen("\"payload_kind\":\"", "\"payload_kind\":\"x", 1);
    std::fs::write(&path, lines.join("\n")).unwrap();
    let out = factline(&["--data-dir", s(&data), "verify-audit", &report.claim_id]);
    assert!(!out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["check"]["first_bad_seq"], 4);
}

#[test]
fn stats_classify_lineage() {
    let setup = setup("8", "3");
    let data = setup._tmp.path().join("data");
    ingest(&setup, &data);
    let d = s(&data);

    let stats: Value = serde_json::from_str(&ok(&["--data-dir", d, "index-stats"])).unwrap();
    let docs = std::fs::read_to_string(setup.corpus.join("corpus.jsonl")).unwrap().lines().count();
    assert_eq!(stats["n_docs"], docs);

    let truth: GroundTruth =
        serde_json::from_str(&std::fs::read_to_string(setup.corpus.join("ground_truth.json")).unwrap()).unwrap();
    let claim = &claims(&setup)[0];
    let answer = &truth.claim_answers[&claim.id];
    let classified: Value = serde_json::from_str(&ok(&["--data-dir", d, "classify", &claim.text])).unwrap();
    assert_eq!(classified["label"], answer.label.name());

    let graph: Value =
        serde_json::from_str(&ok(&["--data-dir", d, "lineage", &answer.origin_doc, "--tau", "0.8"])).unwrap();
    assert_eq!(graph["origin_id"], answer.origin_doc.as_str());

    assert!(!factline(&["--data-dir", d, "lineage", "no-such-doc"]).status.success());
    assert!(!factline(&["--data-dir", d, "verify-audit", "no-such-claim"]).status.success());
}

#[test]
fn config_with_unknown_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.json");
    std::fs::write(&cfg, r#"{"index": {}, "extras": 1}"#).unwrap();
    let out = factline(&["--config", s(&cfg), "--data-dir", s(tmp.path()), "index-stats"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("extras"));
}
