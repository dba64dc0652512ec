// SPDX-License-Identifier: Apache-2.0

mod common;

use std::time::Duration;

use tbforge::harness::{self, Classification, CompileResult, OutcomeKind, Verifier};

const PASS_TB: &str = "module tb; initial begin $display(\"TBFORGE_PASS\"); $finish; end endmodule";

#[test]
fn trivial_module_compiles() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::tools(dir.path());
    let m = "module m(input a, output y); assign y = a; endmodule";
    let tb = "module tb; reg a; wire y; m u(.a(a), .y(y)); initial begin a = 1; #1 $finish; end endmodule";
    match harness::compile(&[m, tb], &cfg).unwrap() {
        CompileResult::Compiled(c) => {
            assert!(c.artifact.is_file());
            assert!(c.artifact.starts_with(&c.workdir));
        }
        CompileResult::Failed(o) => panic!("unexpected failure: {}", o.log),
    }
}

#[test]
fn missing_semicolon_is_compile_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::tools(dir.path());
    let o = harness::verify("module m(input a, output y); assign y = a endmodule", PASS_TB, &cfg).unwrap();
    assert_eq!(o.kind, OutcomeKind::CompileError);
    assert!(o.log.contains("syntax"), "{}", o.log);
    assert!(o.workdir.as_ref().unwrap().is_dir());
}

#[test]
fn sentinel_examples() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::tools(dir.path());
    let m = "module m; endmodule";
    let o = harness::verify(m, PASS_TB, &cfg).unwrap();
    assert_eq!(o.kind, OutcomeKind::Pass, "{}", o.log);
    assert!(o.workdir.is_none());

    let fail_tb = "module tb; initial begin $display(\"TBFORGE_FAIL: y mismatch at t=40\"); $finish; end endmodule";
    let o = harness::verify(m, fail_tb, &cfg).unwrap();
    assert_eq!(o.kind, OutcomeKind::SimFail);
    assert!(o.log.lines().any(|l| l == "TBFORGE_FAIL: y mismatch at t=40"), "{}", o.log);

    let silent_tb = "module tb; initial begin end endmodule";
    let o = harness::verify(m, silent_tb, &cfg).unwrap();
    assert_eq!(o.kind, OutcomeKind::SimFail);
}

#[test]
fn nonzero_exit_fails_even_with_pass_sentinel() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::tools(dir.path());
    let tb = "module tb; initial begin $display(\"TBFORGE_PASS\"); $fatal(1, \"boom\"); end endmodule";
    let o = harness::verify("module m; endmodule", tb, &cfg).unwrap();
    assert_eq!(o.kind, OutcomeKind::SimFail, "{}", o.log);
}

#[test]
fn workdir_kept_only_on_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::tools(dir.path());
    let a = common::adder();
    let pass = harness::verify(&a.good, &a.tb, &cfg).unwrap();
    assert_eq!(pass.kind, OutcomeKind::Pass, "{}", pass.log);
    let fail = harness::verify(&a.wrong, &a.tb, &cfg).unwrap();
    let kept = fail.workdir.clone().unwrap();
    assert!(kept.is_dir());
    assert!(kept.join("source0.v").is_file());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn log_records_exact_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::tools(dir.path());
    let o = harness::verify("module m; endmodule", PASS_TB, &cfg).unwrap();
    assert!(o.log.contains(r#"["-g2012", "-o", "sim.vvp", "source0.v", "source1.v"]"#), "{}", o.log);
    assert!(o.log.contains(r#"["-n", "sim.vvp"]"#), "{}", o.log);
}

#[test]
fn runaway_simulation_times_out_within_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::tools(dir.path()).with_timeouts(Duration::from_secs(5), Duration::from_secs(1));
    let tb = "module tb; reg clk = 0; always #1 clk = ~clk; endmodule";
    let o = harness::verify("module m; endmodule", tb, &cfg).unwrap();
    assert_eq!(o.kind, OutcomeKind::Timeout, "{}", o.log);
    assert!(o.wall_time >= 0.0 && o.wall_time <= 5.0 + 1.0 + 5.0);
    assert_eq!(Classification::from_outcome(o.kind), Classification::SyntacticOnly);
}

#[test]
fn adder_fixtures_classify_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let h = harness::Harness::new(common::tools(dir.path())).unwrap();
    let a = common::adder();
    for _ in 0..20 {
        assert_eq!(h.classify(&a.good, &a.tb).unwrap(), Classification::Functional);
        assert_eq!(h.classify(&a.wrong, &a.tb).unwrap(), Classification::SyntacticOnly);
        assert_eq!(h.classify(&a.syntax, &a.tb).unwrap(), Classification::CompileError);
    }
}

#[test]
fn concurrent_verifies_do_not_collide() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::tools(dir.path());
    let a = common::adder();
    std::thread::scope(|s| {
        let hs: Vec<_> = (0..8)
            .map(|_| s.spawn(|| harness::verify(&a.wrong, &a.tb, &cfg).unwrap().workdir.unwrap()))
            .collect();
        let dirs: std::collections::HashSet<_> = hs.into_iter().map(|h| h.join().unwrap()).collect();
        assert_eq!(dirs.len(), 8);
    });
}
