// SPDX-License-Identifier: Apache-2.0

mod common;

use std::path::Path;
use std::process::{Command, Output};

use tbforge::corpus::load_sft_dataset;

fn tbforge(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tbforge"))
        .args(args)
        .arg("--iverilog")
        .arg(env!("CARGO_BIN_EXE_minivlog"))
        .arg("--vvp")
        .arg(env!("CARGO_BIN_EXE_minivvp"))
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn tbforge")
}

fn fx(rel: &str) -> String {
    common::fixture(rel).display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn aggregate_line(text: &str) -> Vec<String> {
    let line = text.lines().find(|l| l.starts_with("aggregate")).expect("aggregate row");
    line.split_whitespace().map(str::to_string).collect()
}

#[test]
fn missing_dataset_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = tbforge(&["gen-tb", "--dataset", "/no/such/d50.jsonl", "--script", "x.json"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("/no/such/d50.jsonl"), "{}", stderr(&o));
}

#[test]
fn gen_tb_writes_report_transcripts_and_testbenches() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = tbforge(
        &["gen-tb", "--variant", "pregen", "--dataset", &fx("problems.jsonl"), "--script", &fx("scripts/gen_pregen_a.json")],
        &out,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let report = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("Total #Pass") && report.contains("API Count"), "{report}");
    assert!(out.join("config.toml").is_file() && out.join("run_meta.json").is_file());
    let tbs = std::fs::read_dir(out.join("run-0/testbenches")).unwrap().count();
    let transcripts = std::fs::read_dir(out.join("run-0/transcripts")).unwrap().count();
    assert_eq!((tbs, transcripts), (9, 10));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["total_pass"], 9.0);
    assert_eq!(json["api_count"], 50.0);
}

#[test]
fn report_rerenders_saved_ledgers() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = tbforge(
        &["gen-tb", "--variant", "baseline", "--dataset", &fx("problems.jsonl"), "--script", &fx("scripts/gen_baseline.json")],
        &out,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let saved = std::fs::read_to_string(out.join("report.txt")).unwrap();
    let ledgers = out.join("ledgers.json").display().to_string();
    let o = Command::new(env!("CARGO_BIN_EXE_tbforge")).args(["report", "--ledgers", &ledgers]).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim_end(), saved.trim_end());
}

#[test]
fn eval_smoke_matches_first_sample_count() {
    let dir = tempfile::tempdir().unwrap();
    let o = tbforge(&["eval", "--problems", &fx("problems.jsonl"), "--script", &fx("scripts/eval.json")], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    // first response is correct for even-indexed problems only
    assert_eq!(aggregate_line(&stdout(&o)), ["aggregate", "1", "50"]);
    assert!(dir.path().join("eval_report.json").is_file());
}

#[test]
fn eval_two_k_columns() {
    let dir = tempfile::tempdir().unwrap();
    let o = tbforge(
        &["eval", "--problems", &fx("problems.jsonl"), "--script", &fx("scripts/eval.json"), "--n", "5", "--k", "1,5"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("pass@1 (%)") && text.contains("pass@5 (%)"), "{text}");
    // c = [5,4,3,2,1,0,5,2,3,1]: mean c/n = 26/50; only dec2to4 has c = 0
    assert_eq!(aggregate_line(&text), ["aggregate", "5", "52", "90"]);
}

#[test]
fn eval_unreachable_endpoint_is_transport_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = tbforge(
        &["eval", "--problems", &fx("problems.jsonl"), "--endpoint", "http://127.0.0.1:9/v1", "--model", "m"],
        dir.path(),
    );
    assert!(!o.status.success());
    assert!(stderr(&o).contains("transport"), "{}", stderr(&o));
}

#[test]
fn distill_stats_line_partitions_total() {
    let dir = tempfile::tempdir().unwrap();
    let o = tbforge(&["distill", "--dataset", &fx("problems.jsonl"), "--script", &fx("scripts/distill.json")], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let line = stdout(&o);
    assert!(line.starts_with("functional=4 syntactic=3 compile_error=2 errored=1 throughput="), "{line}");
    assert_eq!(load_sft_dataset(&dir.path().join("sft_functional.jsonl")).unwrap().len(), 4);
    assert_eq!(load_sft_dataset(&dir.path().join("sft_all_compiling.jsonl")).unwrap().len(), 7);
}

#[test]
fn distill_functional_policy_writes_only_functional() {
    let dir = tempfile::tempdir().unwrap();
    let o = tbforge(
        &["distill", "--dataset", &fx("problems.jsonl"), "--script", &fx("scripts/distill.json"), "--policy", "functional"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!dir.path().join("sft_all_compiling.jsonl").exists());
    let records = load_sft_dataset(&dir.path().join("sft_functional.jsonl")).unwrap();
    assert_eq!(records.len(), 4);
    assert!(records.iter().all(|r| r.labels.classification == "functional"));
}

#[test]
fn distill_empty_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let o = tbforge(
        &["distill", "--dataset", &empty.display().to_string(), "--script", &fx("scripts/distill.json")],
        &dir.path().join("o"),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("functional=0 syntactic=0 compile_error=0 errored=0 "), "{}", stdout(&o));
}

#[test]
fn gen_tb_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = tbforge(
            &[
                "gen-tb",
                "--dataset",
                &fx("problems.jsonl"),
                "--runs",
                "3",
                "--script",
                &fx("scripts/gen_pregen_a.json"),
                "--script",
                &fx("scripts/gen_pregen_b.json"),
            ],
            &out,
        );
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(out.join("report.txt")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fx("config/example.toml");
    let o = tbforge(
        &["--config", &cfg, "gen-tb", "--dataset", &fx("problems.jsonl"), "--script", &fx("scripts/gen_baseline.json")],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let snapshot = std::fs::read_to_string(dir.path().join("config.toml")).unwrap();
    assert!(snapshot.contains("variant = \"baseline\""), "{snapshot}");
}
