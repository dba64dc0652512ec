// SPDX-License-Identifier: Apache-2.0

//! Testbench generation state machines and run-level stage accounting.
//!
//! Two variants exist. [`PipelineVariant::Baseline`] refines the problem
//! description, writes a testbench and revises it up to a flat budget.
//! [`PipelineVariant::Pregenerate`] first writes and revises against the raw
//! description, and only when that phase is exhausted refines it and starts
//! over with a second revision budget.
//!
//! A testbench passes when the golden module satisfies it under the
//! sentinel protocol of [`crate::harness`].

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{extract_code_block, AgentRole, Agents};
use crate::corpus::ProblemRecord;
use crate::harness::{OutcomeKind, Verifier};

/// Lines of failure log handed to the reviser.
pub const LOG_TAIL_LINES: usize = 50;

/// Refiner reply meaning "keep the description as is".
pub const WELL_WRITTEN: &str = "WELL_WRITTEN";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StageId {
    InitTb,
    Retry1,
    Retry2,
    Retry3,
    RevisionInit,
    Retry4,
    Retry5,
    Retry6,
}

impl StageId {
    /// Report order.
    pub const ALL: [StageId; 8] = [
        StageId::InitTb,
        StageId::Retry1,
        StageId::Retry2,
        StageId::Retry3,
        StageId::RevisionInit,
        StageId::Retry4,
        StageId::Retry5,
        StageId::Retry6,
    ];

    pub const MAX_RETRIES: u32 = 6;

    /// `Retry<n>` for 1 ≤ n ≤ 6.
    pub fn retry(n: u32) -> Option<StageId> {
        Some(match n {
            1 => StageId::Retry1,
            2 => StageId::Retry2,
            3 => StageId::Retry3,
            4 => StageId::Retry4,
            5 => StageId::Retry5,
            6 => StageId::Retry6,
            _ => return None,
        })
    }

    pub fn label(self) -> &'static str {
        match self {
            StageId::InitTb => "Init testbench pass",
            StageId::Retry1 => "1st retry pass",
            StageId::Retry2 => "2nd retry pass",
            StageId::Retry3 => "3rd retry pass",
            StageId::RevisionInit => "Revision init",
            StageId::Retry4 => "4th retry pass",
            StageId::Retry5 => "5th retry pass",
            StageId::Retry6 => "6th retry pass",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineVariant {
    Baseline,
    #[serde(rename = "pregen", alias = "pregenerate")]
    Pregenerate,
}

impl PipelineVariant {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "baseline" => Some(PipelineVariant::Baseline),
            "pregen" | "pregenerate" => Some(PipelineVariant::Pregenerate),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PipelineVariant::Baseline => "baseline",
            PipelineVariant::Pregenerate => "pregen",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid budget: {0}")]
    InvalidBudget(String),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

/// Variant plus its revision budgets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub variant: PipelineVariant,
    /// Reviser cycles for the baseline.
    pub budget: u32,
    /// Reviser cycles before refinement (pregen).
    pub pre_budget: u32,
    /// Reviser cycles after refinement (pregen).
    pub post_budget: u32,
}

impl PipelineConfig {
    pub fn baseline(budget: u32) -> Self {
        PipelineConfig {
            variant: PipelineVariant::Baseline,
            budget,
            pre_budget: 3,
            post_budget: 3,
        }
    }

    pub fn pregen(pre_budget: u32, post_budget: u32) -> Self {
        PipelineConfig {
            variant: PipelineVariant::Pregenerate,
            budget: 6,
            pre_budget,
            post_budget,
        }
    }

    /// Every retry must land on a reportable stage, so the retries of a
    /// variant may not exceed six in total.
    pub fn validate(&self) -> Result<(), PipelineError> {
        match self.variant {
            PipelineVariant::Baseline if self.budget > StageId::MAX_RETRIES => Err(PipelineError::InvalidBudget(
                format!("baseline budget {} exceeds {}", self.budget, StageId::MAX_RETRIES),
            )),
            PipelineVariant::Pregenerate if self.pre_budget + self.post_budget > StageId::MAX_RETRIES => {
                Err(PipelineError::InvalidBudget(format!(
                    "pre-budget {} + post-budget {} exceeds {}",
                    self.pre_budget,
                    self.post_budget,
                    StageId::MAX_RETRIES
                )))
            }
            _ => Ok(()),
        }
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig::pregen(3, 3)
    }
}

/// One step of a problem's history. `actor` is an agent role name or
/// `"verifier"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEvent {
    pub actor: String,
    pub stage: StageId,
    pub outcome: String,
}

pub const VERIFIER: &str = "verifier";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub problem_id: String,
    pub succeeded: bool,
    pub final_tb: Option<String>,
    pub refined_spec: Option<String>,
    pub pass_stage: Option<StageId>,
    pub transcript: Vec<TranscriptEvent>,
    /// Agent responses received while working on this problem.
    pub api_calls: u64,
    /// Infrastructure failure that aborted the problem.
    pub error: Option<String>,
}

impl PipelineResult {
    pub fn errored(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageLedger {
    pub pass_count: BTreeMap<StageId, u64>,
    pub api_calls: u64,
    /// Problems that ran to completion (errored ones excluded).
    pub attempted: u64,
    pub passed: u64,
    pub errored: u64,
}

impl StageLedger {
    pub fn record_stage_pass(&mut self, stage: StageId) {
        *self.pass_count.entry(stage).or_insert(0) += 1;
        self.passed += 1;
    }

    pub fn count(&self, stage: StageId) -> u64 {
        self.pass_count.get(&stage).copied().unwrap_or(0)
    }

    pub fn check(&self) -> Result<(), String> {
        let sum: u64 = self.pass_count.values().sum();
        if sum != self.passed {
            return Err(format!("stage counts sum to {sum} but passed is {}", self.passed));
        }
        if self.passed > self.attempted {
            return Err(format!("passed {} exceeds attempted {}", self.passed, self.attempted));
        }
        Ok(())
    }

    pub fn from_results(results: &[PipelineResult]) -> StageLedger {
        let mut l = StageLedger::default();
        for r in results {
            l.api_calls += r.api_calls;
            if r.errored() {
                l.errored += 1;
                continue;
            }
            l.attempted += 1;
            if let Some(stage) = r.pass_stage {
                l.record_stage_pass(stage);
            }
        }
        l
    }
}

fn log_tail(log: &str, n: usize) -> String {
    let lines: Vec<&str> = log.lines().collect();
    lines[lines.len().saturating_sub(n)..].join("\n")
}

/// One problem's state machine.
struct Run<'a> {
    record: &'a ProblemRecord,
    agents: &'a Agents,
    verifier: &'a dyn Verifier,
    result: PipelineResult,
}

enum Attempt {
    Passed(String),
    Failed { tb: String, log: String },
}

type Step<T> = Result<T, String>;

impl<'a> Run<'a> {
    fn new(record: &'a ProblemRecord, agents: &'a Agents, verifier: &'a dyn Verifier) -> Self {
        Run {
            record,
            agents,
            verifier,
            result: PipelineResult {
                problem_id: record.id.clone(),
                succeeded: false,
                final_tb: None,
                refined_spec: None,
                pass_stage: None,
                transcript: Vec::new(),
                api_calls: 0,
                error: None,
            },
        }
    }

    fn event(&mut self, actor: &str, stage: StageId, outcome: impl Into<String>) {
        self.result.transcript.push(TranscriptEvent {
            actor: actor.to_string(),
            stage,
            outcome: outcome.into(),
        });
    }

    fn call(&mut self, role: AgentRole, stage: StageId, vars: BTreeMap<String, String>) -> Step<String> {
        let prompt = match self.agents.render(role, self.record, &vars) {
            Ok(p) => p,
            Err(e) => {
                self.event(role.as_str(), stage, "error");
                return Err(e.to_string());
            }
        };
        match self.agents.complete_in(&self.record.id, role, &prompt) {
            Ok(r) => {
                self.result.api_calls += 1;
                Ok(r.text)
            }
            Err(e) => {
                self.event(role.as_str(), stage, "error");
                Err(e.to_string())
            }
        }
    }

    fn refine(&mut self, stage: StageId) -> Step<String> {
        let reply = self.call(AgentRole::QualityRefiner, stage, BTreeMap::new())?;
        let reply = reply.trim();
        if reply.is_empty() || reply.starts_with(WELL_WRITTEN) {
            self.event(AgentRole::QualityRefiner.as_str(), stage, "well_written");
            Ok(self.record.spec.clone())
        } else {
            self.event(AgentRole::QualityRefiner.as_str(), stage, "refined");
            self.result.refined_spec = Some(reply.to_string());
            Ok(reply.to_string())
        }
    }

    /// Ask `role` for a testbench and verify it against the golden module.
    fn attempt(&mut self, role: AgentRole, stage: StageId, vars: BTreeMap<String, String>) -> Step<Attempt> {
        let reply = self.call(role, stage, vars)?;
        let tb = match extract_code_block(&reply) {
            Ok(tb) => tb,
            Err(_) => {
                self.event(role.as_str(), stage, "no_code_block");
                return Ok(Attempt::Failed {
                    tb: reply,
                    log: "response contained no code block".into(),
                });
            }
        };
        self.event(role.as_str(), stage, "ok");
        let outcome = match self.verifier.verify(&self.record.golden_code, &tb) {
            Ok(o) => o,
            Err(e) => {
                self.event(VERIFIER, stage, "error");
                return Err(e.to_string());
            }
        };
        self.event(VERIFIER, stage, kind_name(outcome.kind));
        Ok(if outcome.passed() {
            Attempt::Passed(tb)
        } else {
            Attempt::Failed { tb, log: outcome.log }
        })
    }

    fn write(&mut self, stage: StageId, spec: &str) -> Step<Attempt> {
        let vars = BTreeMap::from([("spec".to_string(), spec.to_string())]);
        self.attempt(AgentRole::TestbenchWriter, stage, vars)
    }

    fn revise(&mut self, stage: StageId, spec: &str, tb: &str, log: &str) -> Step<Attempt> {
        let vars = BTreeMap::from([
            ("spec".to_string(), spec.to_string()),
            ("previous_tb".to_string(), tb.to_string()),
            ("failure_log".to_string(), log_tail(log, LOG_TAIL_LINES)),
        ]);
        self.attempt(AgentRole::TestbenchReviser, stage, vars)
    }

    /// Initial attempt at `first`, then reviser cycles on stages
    /// `Retry(offset + 1) ..= Retry(offset + budget)`. Returns whether a
    /// testbench passed.
    fn phase(&mut self, spec: &str, first: StageId, offset: u32, budget: u32) -> Step<bool> {
        let mut last = self.write(first, spec)?;
        let mut stage = first;
        for k in 1..=budget {
            let (tb, log) = match last {
                Attempt::Passed(_) => break,
                Attempt::Failed { tb, log } => (tb, log),
            };
            stage = StageId::retry(offset + k).expect("budget validated");
            last = self.revise(stage, spec, &tb, &log)?;
        }
        if let Attempt::Passed(tb) = last {
            self.result.succeeded = true;
            self.result.pass_stage = Some(stage);
            self.result.final_tb = Some(tb);
            return Ok(true);
        }
        Ok(false)
    }

    fn finish(mut self, outcome: Step<bool>) -> PipelineResult {
        if let Err(e) = outcome {
            self.result.error = Some(e);
            self.result.succeeded = false;
            self.result.pass_stage = None;
            self.result.final_tb = None;
        }
        self.result
    }
}

fn kind_name(k: OutcomeKind) -> &'static str {
    match k {
        OutcomeKind::Pass => "pass",
        OutcomeKind::SimFail => "sim_fail",
        OutcomeKind::CompileError => "compile_error",
        OutcomeKind::Timeout => "timeout",
    }
}

pub fn run_baseline(record: &ProblemRecord, agents: &Agents, verifier: &dyn Verifier, budget: u32) -> PipelineResult {
    let budget = budget.min(StageId::MAX_RETRIES);
    let mut run = Run::new(record, agents, verifier);
    let outcome = run.refine(StageId::InitTb).and_then(|spec| run.phase(&spec, StageId::InitTb, 0, budget));
    run.finish(outcome)
}

pub fn run_pregen(
    record: &ProblemRecord,
    agents: &Agents,
    verifier: &dyn Verifier,
    pre_budget: u32,
    post_budget: u32,
) -> PipelineResult {
    let pre = pre_budget.min(StageId::MAX_RETRIES);
    let post = post_budget.min(StageId::MAX_RETRIES - pre);
    let mut run = Run::new(record, agents, verifier);
    let raw = record.spec.clone();
    let outcome = run.phase(&raw, StageId::InitTb, 0, pre).and_then(|done| {
        if done {
            return Ok(true);
        }
        let spec = run.refine(StageId::RevisionInit)?;
        run.phase(&spec, StageId::RevisionInit, pre, post)
    });
    run.finish(outcome)
}

pub fn run_problem(record: &ProblemRecord, agents: &Agents, verifier: &dyn Verifier, cfg: &PipelineConfig) -> PipelineResult {
    match cfg.variant {
        PipelineVariant::Baseline => run_baseline(record, agents, verifier, cfg.budget),
        PipelineVariant::Pregenerate => run_pregen(record, agents, verifier, cfg.pre_budget, cfg.post_budget),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutcome {
    /// In input order; problems skipped after cancellation are absent.
    pub results: Vec<PipelineResult>,
    pub ledger: StageLedger,
    pub interrupted: bool,
}

pub(crate) fn worker_pool(workers: usize) -> Result<rayon::ThreadPool, String> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| e.to_string())
}

/// Run every record on a pool of `workers` threads. Once `cancel` is set
/// no new problem starts; problems already running finish.
pub fn run_batch(
    records: &[ProblemRecord],
    agents: &Agents,
    verifier: &dyn Verifier,
    cfg: &PipelineConfig,
    workers: usize,
    cancel: &AtomicBool,
) -> Result<BatchOutcome, PipelineError> {
    cfg.validate()?;
    let pool = worker_pool(workers).map_err(PipelineError::Pool)?;
    let results: Vec<Option<PipelineResult>> = pool.install(|| {
        records
            .par_iter()
            .map(|r| (!cancel.load(Ordering::SeqCst)).then(|| run_problem(r, agents, verifier, cfg)))
            .collect()
    });
    let interrupted = results.iter().any(Option::is_none);
    let results: Vec<PipelineResult> = results.into_iter().flatten().collect();
    let ledger = StageLedger::from_results(&results);
    Ok(BatchOutcome {
        results,
        ledger,
        interrupted,
    })
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReportError {
    #[error("no runs to aggregate")]
    Empty,
    #[error("expected {expected} runs, got {got}")]
    RunCount { expected: usize, got: usize },
    #[error("baseline run {run} records a Revision init pass")]
    RevisionInBaseline { run: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    /// `None` renders as `--`.
    pub value: Option<f64>,
}

/// Averages over runs, rounded to two decimals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub variant: PipelineVariant,
    pub n_runs: usize,
    pub stages: Vec<ReportRow>,
    pub total_pass: f64,
    pub api_count: f64,
    pub errored: f64,
    #[serde(default)]
    pub interrupted: bool,
}

pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

pub fn aggregate_report(runs: &[StageLedger], n_runs: usize, variant: PipelineVariant) -> Result<Report, ReportError> {
    if runs.is_empty() {
        return Err(ReportError::Empty);
    }
    if runs.len() != n_runs {
        return Err(ReportError::RunCount {
            expected: n_runs,
            got: runs.len(),
        });
    }
    if variant == PipelineVariant::Baseline {
        if let Some(i) = runs.iter().position(|l| l.count(StageId::RevisionInit) > 0) {
            return Err(ReportError::RevisionInBaseline { run: i });
        }
    }
    let n = n_runs as f64;
    let mean = |f: &dyn Fn(&StageLedger) -> u64| round2(runs.iter().map(f).sum::<u64>() as f64 / n);
    let stages = StageId::ALL
        .into_iter()
        .map(|s| ReportRow {
            label: s.label().to_string(),
            value: (variant == PipelineVariant::Pregenerate || s != StageId::RevisionInit)
                .then(|| mean(&|l: &StageLedger| l.count(s))),
        })
        .collect();
    Ok(Report {
        variant,
        n_runs,
        stages,
        total_pass: mean(&|l: &StageLedger| l.passed),
        api_count: mean(&|l: &StageLedger| l.api_calls),
        errored: mean(&|l: &StageLedger| l.errored),
        interrupted: false,
    })
}

impl Report {
    pub fn stage(&self, stage: StageId) -> Option<f64> {
        self.stages.iter().find(|r| r.label == stage.label()).and_then(|r| r.value)
    }

    /// Sum of the rounded per-stage means.
    pub fn stage_sum(&self) -> f64 {
        self.stages.iter().filter_map(|r| r.value).sum()
    }

    pub fn rows(&self) -> Vec<(String, Option<f64>)> {
        let mut rows: Vec<_> = self.stages.iter().map(|r| (r.label.clone(), r.value)).collect();
        rows.push(("Total #Pass".into(), Some(self.total_pass)));
        rows.push(("API Count".into(), Some(self.api_count)));
        rows.push(("Errored".into(), Some(self.errored)));
        rows
    }
}

/// Plain-text table with one column per report.
pub fn render_table(columns: &[(&str, &Report)]) -> String {
    let Some((_, first)) = columns.first() else {
        return String::new();
    };
    let labels: Vec<String> = first.rows().into_iter().map(|(l, _)| l).collect();
    let lw = labels.iter().map(String::len).max().unwrap_or(0).max("Stage".len());
    let cells: Vec<Vec<String>> = columns
        .iter()
        .map(|(_, r)| {
            r.rows()
                .into_iter()
                .map(|(_, v)| v.map_or_else(|| "--".to_string(), |x| format!("{x:.2}")))
                .collect()
        })
        .collect();
    let widths: Vec<usize> = columns
        .iter()
        .zip(&cells)
        .map(|((h, _), c)| c.iter().map(String::len).chain([h.len()]).max().unwrap_or(0))
        .collect();
    let mut out = format!("{:<lw$}", "Stage");
    for ((h, _), w) in columns.iter().zip(&widths) {
        out.push_str(&format!("  {h:>w$}"));
    }
    out.push('\n');
    for (i, label) in labels.iter().enumerate() {
        out.push_str(&format!("{label:<lw$}"));
        for (c, w) in cells.iter().zip(&widths) {
            out.push_str(&format!("  {:>w$}", c[i]));
        }
        out.push('\n');
    }
    let runs: Vec<String> = columns.iter().map(|(_, r)| r.n_runs.to_string()).collect();
    out.push_str(&format!("(mean over {} run(s))\n", runs.join("/")));
    if columns.iter().any(|(_, r)| r.interrupted) {
        out.push_str("INTERRUPTED: partial results\n");
    }
    out
}
