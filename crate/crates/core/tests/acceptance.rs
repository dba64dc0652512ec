// SPDX-License-Identifier: Apache-2.0

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

mod common;

use std::path::Path;
use std::process::Command;
use std::sync::atomic::AtomicBool;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use tbforge::agents::{AgentRole, Agents, Script, TokenUsage};
use tbforge::corpus::ProblemRecord;
use tbforge::distill::{self, compute_throughput, validate_partition, DistillClass, DistillOptions};
use tbforge::evalrunner::{pass_at_k, EstimatorError};
use tbforge::harness::{Classification, Harness, HarnessError, OutcomeKind, Verifier, VerifyOutcome};
use tbforge::pipeline::{
    aggregate_report, run_baseline, run_batch, run_pregen, PipelineConfig, PipelineResult, PipelineVariant,
    StageId, StageLedger, WELL_WRITTEN,
};

type Check = Result<String, String>;

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(started: Instant, limit: Duration) -> Result<(), String> {
    let t = started.elapsed();
    ensure(t < limit, || format!("took {t:?}, limit {limit:?}"))
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

// ---------------------------------------------------------------- 1

/// Printed per-stage means (InitTb, R1, R2, R3, RevisionInit, R4, R5, R6),
/// printed total and printed API count. `None` marks a stage the variant
/// does not have.
struct Column {
    name: &'static str,
    variant: PipelineVariant,
    stages: [Option<f64>; 8],
    total: f64,
    api: f64,
    /// Expected sum of the per-stage means, and its tolerance.
    stage_sum: f64,
    tol: f64,
}

fn table_columns() -> Vec<Column> {
    use PipelineVariant::*;
    vec![
        Column {
            name: "II w/o",
            variant: Baseline,
            stages: [Some(13.33), Some(13.00), Some(3.33), Some(1.33), None, Some(0.0), Some(0.0), Some(0.33)],
            total: 31.33,
            api: 237.67,
            stage_sum: 31.33,
            tol: 0.02,
        },
        Column {
            name: "II w/",
            variant: Pregenerate,
            stages: [
                Some(4.33),
                Some(13.00),
                Some(10.33),
                Some(2.67),
                Some(2.00),
                Some(3.67),
                Some(1.33),
                Some(0.67),
            ],
            total: 38.00,
            api: 234.33,
            stage_sum: 38.00,
            tol: 1e-9,
        },
        Column {
            name: "III w/o",
            variant: Baseline,
            stages: [Some(6.67), Some(9.33), Some(3.33), Some(1.33), None, Some(0.33), Some(0.33), Some(0.0)],
            total: 21.33,
            api: 295.00,
            stage_sum: 21.33,
            tol: 0.02,
        },
        Column {
            name: "III w/",
            variant: Pregenerate,
            stages: [
                Some(6.33),
                Some(14.00),
                Some(4.67),
                Some(3.33),
                Some(0.67),
                Some(2.33),
                Some(2.33),
                Some(0.33),
            ],
            total: 34.00,
            api: 247.67,
            stage_sum: 34.00,
            tol: 0.02,
        },
    ]
}

/// Three runs whose integer counts have the printed values as means.
fn oracle_ledgers(col: &Column) -> Vec<StageLedger> {
    let thirds = |v: f64| (v * 3.0).round() as u64;
    let mut runs = vec![StageLedger::default(); 3];
    for (stage, v) in StageId::ALL.into_iter().zip(col.stages) {
        let total = v.map(thirds).unwrap_or(0);
        for i in 0..total {
            runs[(i % 3) as usize].record_stage_pass(stage);
        }
    }
    let api = thirds(col.api);
    for (i, run) in runs.iter_mut().enumerate() {
        run.api_calls = api / 3 + u64::from((i as u64) < api % 3);
        run.attempted = 50;
    }
    runs
}

fn criterion_1() -> Check {
    let started = Instant::now();
    let mut notes = Vec::new();
    for col in table_columns() {
        let report = aggregate_report(&oracle_ledgers(&col), 3, col.variant).map_err(|e| e.to_string())?;
        for (stage, want) in StageId::ALL.into_iter().zip(col.stages) {
            let got = report.stage(stage);
            let same = match (got, want) {
                (Some(a), Some(b)) => (a - b).abs() < 1e-9,
                (None, None) => true,
                _ => false,
            };
            ensure(same, || format!("{} {}: got {got:?}, want {want:?}", col.name, stage.label()))?;
        }
        ensure((report.total_pass - col.total).abs() < 1e-9, || {
            format!("{} total {} != {}", col.name, report.total_pass, col.total)
        })?;
        ensure((report.api_count - col.api).abs() < 1e-9, || {
            format!("{} API {} != {}", col.name, report.api_count, col.api)
        })?;
        let sum = report.stage_sum();
        ensure((sum - col.stage_sum).abs() <= col.tol + 1e-9, || {
            format!("{} stage sum {sum:.2} vs {:.2}", col.name, col.stage_sum)
        })?;
        notes.push(format!("{}={:.2}/{:.2}", col.name, report.total_pass, sum));
    }
    within(started, Duration::from_secs(1))?;
    Ok(notes.join(" "))
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Check {
    let base = [1386u64, 4421, 897, 0, 6704];
    validate_partition(base[0], base[1], base[2], base[3], base[4]).map_err(|e| e.to_string())?;
    let mut perturbed = 0;
    for i in 0..5 {
        for delta in [-1i64, 1] {
            let mut v = base;
            let next = v[i] as i64 + delta;
            if next < 0 {
                continue;
            }
            v[i] = next as u64;
            ensure(validate_partition(v[0], v[1], v[2], v[3], v[4]).is_err(), || {
                format!("perturbation {v:?} validated")
            })?;
            perturbed += 1;
        }
    }
    Ok(format!("6704 validates, {perturbed} perturbations rejected"))
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Check {
    let usage = TokenUsage {
        input_tokens: 6_073_695,
        output_tokens: 54_778_748,
    };
    let elapsed = usage.total() as f64 / 305.225;
    let tput = compute_throughput(usage, elapsed).map_err(|e| e.to_string())?;
    ensure((tput - 305.225).abs() <= 0.01, || format!("throughput {tput}"))?;
    let hours = elapsed / 3600.0;
    ensure((hours - 55.4).abs() / 55.4 <= 0.02, || format!("elapsed {hours:.2} h"))?;
    Ok(format!("{tput:.3} tok/s over {hours:.2} h"))
}

// ---------------------------------------------------------------- 4

fn criterion_4(root: &Path) -> Check {
    let started = Instant::now();
    let adder = common::adder();
    let harness = Harness::new(common::tools(root)).map_err(|e| e.to_string())?;
    let cases = [
        ("correct", &adder.good, Classification::Functional),
        ("wrong-logic", &adder.wrong, Classification::SyntacticOnly),
        ("syntax-error", &adder.syntax, Classification::CompileError),
    ];
    for run in 0..20 {
        for (name, code, want) in &cases {
            let got = harness.classify(code, &adder.tb).map_err(|e| e.to_string())?;
            ensure(got == *want, || format!("run {run}: {name} classified {got:?}"))?;
        }
    }
    within(started, Duration::from_secs(60))?;
    Ok(format!("60 classifications in {:.2}s", started.elapsed().as_secs_f64()))
}

// ---------------------------------------------------------------- 5

/// Fraction of k-subsets of n samples (the first c correct) that contain a
/// correct sample.
fn brute_pass_at_k(n: u32, c: u32, k: u32) -> f64 {
    let correct_mask = (1u32 << c) - 1;
    let (mut hit, mut all) = (0u64, 0u64);
    for subset in 0u32..(1 << n) {
        if subset.count_ones() != k {
            continue;
        }
        all += 1;
        if subset & correct_mask != 0 {
            hit += 1;
        }
    }
    hit as f64 / all as f64
}

fn criterion_5() -> Check {
    let started = Instant::now();
    let mut compared = 0;
    for n in 1..=8u32 {
        for c in 0..=n {
            for k in 1..=n {
                let got = pass_at_k(n as u64, c as u64, k as u64).map_err(|e| e.to_string())?;
                let want = brute_pass_at_k(n, c, k);
                ensure((got - want).abs() <= 1e-12, || format!("n={n} c={c} k={k}: {got} vs {want}"))?;
                compared += 1;
            }
        }
    }
    ensure(matches!(pass_at_k(5, 0, 3), Ok(p) if p == 0.0), || "c=0 must give 0".into())?;
    ensure(matches!(pass_at_k(5, 3, 3), Ok(p) if p == 1.0), || "n-c<k must give 1".into())?;
    ensure(matches!(pass_at_k(5, 6, 1), Err(EstimatorError::C { .. })), || "c>n accepted".into())?;
    ensure(matches!(pass_at_k(5, 2, 6), Err(EstimatorError::K { .. })), || "k>n accepted".into())?;
    ensure(matches!(pass_at_k(5, 2, 0), Err(EstimatorError::K { .. })), || "k=0 accepted".into())?;

    let mut runner = runner(256);
    runner
        .run(&(1u64..200, 0u64..200, 1u64..200), |(n, c, k)| {
            let (c, k) = (c % (n + 1), (k % n) + 1);
            let p = pass_at_k(n, c, k).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            if c < n {
                prop_assert!(pass_at_k(n, c + 1, k).unwrap() >= p - 1e-12);
            }
            if k < n {
                prop_assert!(pass_at_k(n, c, k + 1).unwrap() >= p - 1e-12);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    within(started, Duration::from_secs(5))?;
    Ok(format!("{compared} triples match brute force"))
}

// ---------------------------------------------------------------- 6

const FAIL_TB: &str = "```verilog\nmodule tb; initial begin $display(\"TBFORGE_FAIL\"); $finish; end endmodule\n```";

fn pass_tb() -> String {
    format!("```verilog\n{}```", common::adder().tb)
}

fn adder_problem() -> ProblemRecord {
    ProblemRecord::new("adder", "fixture", "4-bit adder with carry in and carry out", &common::adder().good)
}

struct Scenario {
    name: &'static str,
    variant: PipelineVariant,
    script: Script,
    pass_stage: Option<StageId>,
    /// (actor, stage, outcome) for every transcript event.
    events: Vec<(&'static str, StageId, &'static str)>,
    api: u64,
}

const QR: &str = "quality_refiner";
const TW: &str = "testbench_writer";
const TR: &str = "testbench_reviser";
const V: &str = "verifier";

fn scenarios() -> Vec<Scenario> {
    use StageId::*;
    let pass = pass_tb();
    let script = |items: &[(AgentRole, &str)]| {
        let mut s = Script::default();
        for (role, text) in items {
            s.push(*role, *text);
        }
        s
    };
    let (q, w, r) = (AgentRole::QualityRefiner, AgentRole::TestbenchWriter, AgentRole::TestbenchReviser);
    let mut exhaustion = vec![(q, WELL_WRITTEN), (w, FAIL_TB)];
    exhaustion.extend(std::iter::repeat_n((r, FAIL_TB), 6));
    let mut exhaustion_events = vec![(QR, InitTb, "well_written"), (TW, InitTb, "ok"), (V, InitTb, "sim_fail")];
    for n in 1..=6 {
        let s = StageId::retry(n).unwrap();
        exhaustion_events.extend([(TR, s, "ok"), (V, s, "sim_fail")]);
    }
    vec![
        Scenario {
            name: "baseline init pass",
            variant: PipelineVariant::Baseline,
            script: script(&[(q, WELL_WRITTEN), (w, &pass)]),
            pass_stage: Some(InitTb),
            events: vec![(QR, InitTb, "well_written"), (TW, InitTb, "ok"), (V, InitTb, "pass")],
            api: 2,
        },
        Scenario {
            name: "baseline retry-2 pass",
            variant: PipelineVariant::Baseline,
            script: script(&[(q, "Add a 4-bit adder with carry."), (w, FAIL_TB), (r, "no code"), (r, &pass)]),
            pass_stage: Some(Retry2),
            events: vec![
                (QR, InitTb, "refined"),
                (TW, InitTb, "ok"),
                (V, InitTb, "sim_fail"),
                (TR, Retry1, "no_code_block"),
                (TR, Retry2, "ok"),
                (V, Retry2, "pass"),
            ],
            api: 4,
        },
        Scenario {
            name: "baseline budget exhaustion",
            variant: PipelineVariant::Baseline,
            script: script(&exhaustion),
            pass_stage: None,
            events: exhaustion_events,
            api: 8,
        },
        Scenario {
            name: "pregen RevisionInit pass",
            variant: PipelineVariant::Pregenerate,
            script: script(&[
                (w, FAIL_TB),
                (r, FAIL_TB),
                (r, FAIL_TB),
                (r, FAIL_TB),
                (q, WELL_WRITTEN),
                (w, &pass),
            ]),
            pass_stage: Some(RevisionInit),
            events: vec![
                (TW, InitTb, "ok"),
                (V, InitTb, "sim_fail"),
                (TR, Retry1, "ok"),
                (V, Retry1, "sim_fail"),
                (TR, Retry2, "ok"),
                (V, Retry2, "sim_fail"),
                (TR, Retry3, "ok"),
                (V, Retry3, "sim_fail"),
                (QR, RevisionInit, "well_written"),
                (TW, RevisionInit, "ok"),
                (V, RevisionInit, "pass"),
            ],
            api: 6,
        },
        Scenario {
            name: "pregen retry-5 pass",
            variant: PipelineVariant::Pregenerate,
            script: script(&[
                (w, FAIL_TB),
                (r, FAIL_TB),
                (r, FAIL_TB),
                (r, FAIL_TB),
                (q, "Add two 4-bit operands and a carry in."),
                (w, "```verilog\nmodule tb; initial begin $display(\"TBFORGE_PASS\") $finish; end endmodule\n```"),
                (r, FAIL_TB),
                (r, &pass),
            ]),
            pass_stage: Some(Retry5),
            events: vec![
                (TW, InitTb, "ok"),
                (V, InitTb, "sim_fail"),
                (TR, Retry1, "ok"),
                (V, Retry1, "sim_fail"),
                (TR, Retry2, "ok"),
                (V, Retry2, "sim_fail"),
                (TR, Retry3, "ok"),
                (V, Retry3, "sim_fail"),
                (QR, RevisionInit, "refined"),
                (TW, RevisionInit, "ok"),
                (V, RevisionInit, "compile_error"),
                (TR, Retry4, "ok"),
                (V, Retry4, "sim_fail"),
                (TR, Retry5, "ok"),
                (V, Retry5, "pass"),
            ],
            api: 8,
        },
        Scenario {
            name: "pregen init pass",
            variant: PipelineVariant::Pregenerate,
            script: script(&[(w, &pass)]),
            pass_stage: Some(InitTb),
            events: vec![(TW, InitTb, "ok"), (V, InitTb, "pass")],
            api: 1,
        },
    ]
}

fn check_scenario(s: Scenario, verifier: &dyn Verifier) -> Result<PipelineResult, String> {
    let (agents, backend) = Agents::scripted(s.script);
    let record = adder_problem();
    let r = match s.variant {
        PipelineVariant::Baseline => run_baseline(&record, &agents, verifier, 6),
        PipelineVariant::Pregenerate => run_pregen(&record, &agents, verifier, 3, 3),
    };
    ensure(r.error.is_none(), || format!("{}: errored: {:?}", s.name, r.error))?;
    let got: Vec<(&str, StageId, &str)> =
        r.transcript.iter().map(|e| (e.actor.as_str(), e.stage, e.outcome.as_str())).collect();
    ensure(got == s.events, || format!("{}: transcript {got:?}", s.name))?;
    ensure(r.pass_stage == s.pass_stage, || format!("{}: pass_stage {:?}", s.name, r.pass_stage))?;
    ensure(r.succeeded == s.pass_stage.is_some(), || format!("{}: succeeded flag", s.name))?;
    ensure(r.api_calls == s.api && backend.consumed() == s.api, || {
        format!("{}: api {} consumed {} want {}", s.name, r.api_calls, backend.consumed(), s.api)
    })?;
    let ledger = StageLedger::from_results(std::slice::from_ref(&r));
    let mut want = StageLedger {
        api_calls: s.api,
        attempted: 1,
        ..StageLedger::default()
    };
    if let Some(stage) = s.pass_stage {
        want.record_stage_pass(stage);
    }
    ensure(ledger == want, || format!("{}: ledger {ledger:?}", s.name))?;
    if s.variant == PipelineVariant::Baseline {
        ensure(r.transcript.iter().all(|e| e.stage != StageId::RevisionInit), || {
            format!("{}: baseline transcript has RevisionInit", s.name)
        })?;
    }
    Ok(r)
}

fn criterion_6(root: &Path) -> Check {
    let started = Instant::now();
    let harness = Harness::new(common::tools(root)).map_err(|e| e.to_string())?;
    let mut n = 0;
    for s in scenarios() {
        check_scenario(s, &harness)?;
        n += 1;
    }
    within(started, Duration::from_secs(30))?;
    Ok(format!("{n} scenarios matched"))
}

// ---------------------------------------------------------------- 7

fn criterion_7(root: &Path) -> Check {
    let bin = env!("CARGO_BIN_EXE_tbforge");
    let dataset = common::fixture("problems.jsonl");
    let invoke = |out: &Path| -> Result<(), String> {
        let status = Command::new(bin)
            .arg("gen-tb")
            .arg("--dataset")
            .arg(&dataset)
            .args(["--variant", "pregen", "--runs", "3", "--workers", "3"])
            .arg("--script")
            .arg(common::fixture("scripts/gen_pregen_a.json"))
            .arg("--script")
            .arg(common::fixture("scripts/gen_pregen_b.json"))
            .arg("--iverilog")
            .arg(env!("CARGO_BIN_EXE_minivlog"))
            .arg("--vvp")
            .arg(env!("CARGO_BIN_EXE_minivvp"))
            .arg("--out")
            .arg(out)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.success(), || {
            format!("gen-tb failed: {}", String::from_utf8_lossy(&status.stderr))
        })
    };
    let (a, b) = (root.join("det-a"), root.join("det-b"));
    invoke(&a)?;
    invoke(&b)?;
    let files = ["report.json", "report.txt", "ledgers.json"];
    for f in files {
        let (x, y) = (std::fs::read(a.join(f)), std::fs::read(b.join(f)));
        let (x, y) = (x.map_err(|e| format!("{f}: {e}"))?, y.map_err(|e| format!("{f}: {e}"))?);
        ensure(!x.is_empty() && x == y, || format!("{f} differs between invocations"))?;
    }
    Ok(format!("{} identical across invocations", files.join(", ")))
}

// ---------------------------------------------------------------- 8

/// Passes testbenches carrying the pass sentinel; no subprocesses.
struct SentinelMarker;

impl Verifier for SentinelMarker {
    fn verify(&self, _module: &str, tb: &str) -> Result<VerifyOutcome, HarnessError> {
        let kind = if tb.contains("TBFORGE_PASS") { OutcomeKind::Pass } else { OutcomeKind::SimFail };
        Ok(VerifyOutcome {
            kind,
            log: String::new(),
            wall_time: 0.0,
            workdir: None,
        })
    }
}

#[derive(Debug, Clone)]
struct RandomRun {
    baseline: bool,
    budget: u32,
    pre: u32,
    /// Per problem: refiner replies, writer verdicts, reviser verdicts.
    problems: Vec<(Vec<bool>, Vec<bool>, Vec<bool>)>,
}

fn random_run() -> impl Strategy<Value = RandomRun> {
    let problem = (
        prop::collection::vec(any::<bool>(), 0..3),
        prop::collection::vec(prop::bool::weighted(0.3), 0..3),
        prop::collection::vec(prop::bool::weighted(0.3), 0..8),
    );
    (any::<bool>(), 0u32..=6, 0u32..=6, prop::collection::vec(problem, 1..6)).prop_map(
        |(baseline, budget, pre, problems)| RandomRun {
            baseline,
            budget,
            pre,
            problems,
        },
    )
}

fn criterion_8() -> Check {
    let mut runner = runner(200);
    let cancel = AtomicBool::new(false);
    runner
        .run(&random_run(), |run| {
            let mut script = Script::default();
            let mut records = Vec::new();
            for (i, (refine, write, revise)) in run.problems.iter().enumerate() {
                let id = format!("p{i}");
                for &r in refine {
                    script.push_for(&id, AgentRole::QualityRefiner, if r { WELL_WRITTEN } else { "Clearer." });
                }
                for &ok in write {
                    script.push_for(&id, AgentRole::TestbenchWriter, if ok { pass_tb() } else { FAIL_TB.into() });
                }
                for &ok in revise {
                    script.push_for(&id, AgentRole::TestbenchReviser, if ok { pass_tb() } else { FAIL_TB.into() });
                }
                records.push(ProblemRecord::new(&id, "random", "spec", "module adder; endmodule"));
            }
            let cfg = if run.baseline {
                PipelineConfig::baseline(run.budget)
            } else {
                PipelineConfig::pregen(run.pre, 6 - run.pre)
            };
            let (agents, backend) = Agents::scripted(script);
            let out = run_batch(&records, &agents, &SentinelMarker, &cfg, 3, &cancel)
                .map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert_eq!(out.ledger.api_calls, backend.consumed());
            prop_assert_eq!(agents.counter().calls(), backend.consumed());
            prop_assert!(out.ledger.check().is_ok());
            prop_assert_eq!(out.ledger.attempted + out.ledger.errored, records.len() as u64);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("200 randomized runs: API Count == responses consumed".into())
}

// ---------------------------------------------------------------- 9

#[derive(Debug, Clone, Copy)]
enum Reply {
    Good,
    Wrong,
    Broken,
    Prose,
}

fn reply_text(kind: Reply, adder: &common::Adder) -> String {
    let fenced = |code: &str| format!("<think>Sum the operands.</think>\n```verilog\n{code}```");
    match kind {
        Reply::Good => fenced(&adder.good),
        Reply::Wrong => fenced(&adder.wrong),
        Reply::Broken => fenced(&adder.syntax),
        Reply::Prose => "I would add the inputs.".into(),
    }
}

fn criterion_9(root: &Path) -> Check {
    let adder = common::adder();
    let harness = Harness::new(common::tools(root)).map_err(|e| e.to_string())?;
    let cancel = AtomicBool::new(false);
    let reply = prop_oneof![Just(Reply::Good), Just(Reply::Wrong), Just(Reply::Broken), Just(Reply::Prose)];
    // Missing replies exercise the agent-error path.
    let batch = prop::collection::vec(prop::option::weighted(0.95, reply), 1..=100);
    let mut runner = runner(12);
    runner
        .run(&batch, |plan| {
            let mut script = Script::default();
            let mut records = Vec::new();
            for (i, kind) in plan.iter().enumerate() {
                let id = format!("d{i}");
                if let Some(kind) = kind {
                    script.push_for(&id, AgentRole::ReasoningDistiller, reply_text(*kind, &adder));
                }
                records.push(ProblemRecord::new(&id, "random", "4-bit adder", &adder.good).with_tb(&adder.tb));
            }
            let (agents, _) = Agents::scripted(script);
            let out = distill::run_distillation(&records, &agents, &harness, &DistillOptions::default(), 4, &cancel)
                .map_err(TestCaseError::fail)?;
            let s = &out.stats;
            prop_assert_eq!(s.total, plan.len() as u64);
            prop_assert_eq!(s.functional + s.syntactic + s.compile_error + s.errored, s.total);
            prop_assert!(s.validate().is_ok());
            for (r, kind) in out.records.iter().zip(&plan) {
                let want = match kind {
                    Some(Reply::Good) => DistillClass::Functional,
                    Some(Reply::Wrong) => DistillClass::SyntacticOnly,
                    Some(Reply::Broken) => DistillClass::CompileError,
                    Some(Reply::Prose) | None => DistillClass::Errored,
                };
                prop_assert_eq!(r.classification, want);
                if r.classification == DistillClass::Functional {
                    let code = r.generated_code.as_deref().unwrap();
                    let again = harness.verify(code, &adder.tb).map_err(|e| TestCaseError::fail(e.to_string()))?;
                    prop_assert!(again.passed(), "functional record {} failed re-verification", r.problem_id);
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("12 randomized batches partitioned, functional records re-verified".into())
}

// ----------------------------------------------------------------

fn main() {
    let dir = tempfile::tempdir().expect("tempdir");
    let root = dir.path();
    let criteria: Vec<Criterion> = vec![
        ("ledger arithmetic", Box::new(criterion_1)),
        ("partition validator", Box::new(criterion_2)),
        ("throughput consistency", Box::new(criterion_3)),
        ("harness fixtures", Box::new(|| criterion_4(root))),
        ("pass@k oracle", Box::new(criterion_5)),
        ("scripted scenarios", Box::new(|| criterion_6(root))),
        ("determinism", Box::new(|| criterion_7(root))),
        ("call accounting", Box::new(criterion_8)),
        ("distillation partition", Box::new(|| criterion_9(root))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let result = check();
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {}. {name} ({secs:.2}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {}. {name} ({secs:.2}s): {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
