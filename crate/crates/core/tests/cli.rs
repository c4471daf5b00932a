//! End-to-end runs of the binary against bundled corpora.

mod common;

use std::fs;

use common::*;

const BIRDS: &str = "John decides to buy some birds.  He got 50 dollars from each of his 4 grandparents.  If each bird costs $20, how many wings did all the birds have?";

#[test]
fn solve_replays_gsm8k() {
    let out = bin()
        .args(["solve", "--paradigm", "rewoo", "--replay"])
        .arg(fixtures_dir().join("gsm8k"))
        .arg(BIRDS)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("Answer: 20\n"), "{text}");
    assert!(text.contains("Steps: 5"));
}

#[test]
fn unrecorded_question_is_a_runtime_error() {
    let out = bin()
        .args(["solve", "--replay"])
        .arg(fixtures_dir().join("gsm8k"))
        .arg("How many legs does a spider have?")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_replay_dir_fails_clearly() {
    let out = bin().args(["solve", "--replay", "/nonexistent/corpus", "q"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("replay fixture"));
}

#[test]
fn bench_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["bench", "--replay"])
        .arg(fixtures_dir().join("gsm8k"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let table = String::from_utf8(out.stdout).unwrap();
    assert_eq!(table.lines().count(), 3);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let rows = report.as_array().unwrap();
    assert!(rows[0]["avg_tokens"].as_f64() < rows[1]["avg_tokens"].as_f64());
    assert!(dir.path().join("records-rewoo.jsonl").exists());
    assert!(dir.path().join("results-react.jsonl").exists());
}

#[test]
fn export_from_bench_records() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["bench", "--paradigm", "rewoo", "--replay"])
        .arg(fixtures_dir().join("gsm8k"))
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let target = dir.path().join("instructions.jsonl");
    let out = bin()
        .arg("export-instructions")
        .arg("--records")
        .arg(dir.path().join("records-rewoo.jsonl"))
        .arg("--scores")
        .arg(dir.path().join("results-rewoo.jsonl"))
        .arg("--out")
        .arg(&target)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let line = fs::read_to_string(&target).unwrap();
    let rec: serde_json::Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
    assert!(rec["output"].as_str().unwrap().starts_with("Plan: "));
}

#[test]
fn fixtures_check_passes() {
    for corpus in ["hotpotqa", "triviaqa", "gsm8k"] {
        let out = bin().args(["fixtures", "check", "--corpus"]).arg(fixtures_dir().join(corpus)).output().unwrap();
        assert!(out.status.success(), "{corpus}");
    }
}
