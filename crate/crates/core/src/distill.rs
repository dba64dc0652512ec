// SPDX-License-Identifier: Apache-2.0

//! Reasoning-trace distillation with verification and token accounting.

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{extract_code_block, AgentRole, Agents, TokenUsage};
use crate::corpus::{ProblemRecord, SftLabels, SftRecord};
use crate::harness::{Classification, Verifier};
use crate::pipeline::worker_pool;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistillClass {
    Functional,
    #[serde(rename = "syntactic")]
    SyntacticOnly,
    CompileError,
    Errored,
}

impl From<Classification> for DistillClass {
    fn from(c: Classification) -> Self {
        match c {
            Classification::Functional => DistillClass::Functional,
            Classification::SyntacticOnly => DistillClass::SyntacticOnly,
            Classification::CompileError => DistillClass::CompileError,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// The response had no code block.
    Extraction,
    /// Backend or template failure.
    Agent,
    /// Toolchain configuration or I/O failure.
    Harness,
}

impl FailureKind {
    /// Agent and harness failures are infrastructure problems; a response
    /// without code is a model failure.
    pub fn is_infrastructure(self) -> bool {
        !matches!(self, FailureKind::Extraction)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub kind: FailureKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillRecord {
    pub problem_id: String,
    pub reasoning: String,
    pub generated_code: Option<String>,
    pub classification: DistillClass,
    pub usage: TokenUsage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<Failure>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistillOptions {
    /// Include the golden solution in the distiller prompt.
    pub show_golden: bool,
}

impl Default for DistillOptions {
    fn default() -> Self {
        DistillOptions { show_golden: true }
    }
}

/// Reasoning is the `<think>` body when present, otherwise the prose
/// before the first code fence.
pub fn extract_reasoning(text: &str) -> String {
    if let Some(start) = text.find("<think>") {
        let body = &text[start + "<think>".len()..];
        let end = body.find("</think>").unwrap_or(body.len());
        return body[..end].trim().to_string();
    }
    let end = text.find("```").unwrap_or(text.len());
    text[..end].trim().to_string()
}

fn reference_section(record: &ProblemRecord, opts: &DistillOptions) -> String {
    if opts.show_golden {
        format!(
            "A known-correct reference implementation is given below. Derive it from the task\nrather than copying it.\n```verilog\n{}\n```\n",
            record.golden_code.trim_end()
        )
    } else {
        String::new()
    }
}

/// Distill, extract and classify one problem. Never fails; problems are
/// reported through [`DistillClass::Errored`].
pub fn distill_one(
    record: &ProblemRecord,
    agents: &Agents,
    verifier: &dyn Verifier,
    opts: &DistillOptions,
) -> DistillRecord {
    let mut out = DistillRecord {
        problem_id: record.id.clone(),
        reasoning: String::new(),
        generated_code: None,
        classification: DistillClass::Errored,
        usage: TokenUsage::default(),
        failure: None,
    };
    let fail = |out: &mut DistillRecord, kind, message: String| {
        out.failure = Some(Failure { kind, message });
    };
    let Some(tb) = record.reference_tb.as_deref() else {
        fail(&mut out, FailureKind::Harness, "record has no reference testbench".into());
        return out;
    };
    let ctx = [("reference_solution".to_string(), reference_section(record, opts))].into();
    let prompt = match agents.render(AgentRole::ReasoningDistiller, record, &ctx) {
        Ok(p) => p,
        Err(e) => {
            fail(&mut out, FailureKind::Agent, e.to_string());
            return out;
        }
    };
    let resp = match agents.complete_in(&record.id, AgentRole::ReasoningDistiller, &prompt) {
        Ok(r) => r,
        Err(e) => {
            fail(&mut out, FailureKind::Agent, e.to_string());
            return out;
        }
    };
    out.usage = resp.usage;
    out.reasoning = extract_reasoning(&resp.text);
    let code = match extract_code_block(&resp.text) {
        Ok(c) => c,
        Err(e) => {
            fail(&mut out, FailureKind::Extraction, e.to_string());
            return out;
        }
    };
    match verifier.classify(&code, tb) {
        Ok(c) => out.classification = c.into(),
        Err(e) => fail(&mut out, FailureKind::Harness, e.to_string()),
    }
    out.generated_code = Some(code);
    out
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("class counts {functional}+{syntactic}+{compile_error}+{errored} = {sum} do not match total {total}")]
    Partition {
        functional: u64,
        syntactic: u64,
        compile_error: u64,
        errored: u64,
        sum: u64,
        total: u64,
    },
    #[error("elapsed time must be positive (got {0})")]
    Elapsed(f64),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub total: u64,
    pub functional: u64,
    pub syntactic: u64,
    pub compile_error: u64,
    pub errored: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub elapsed: f64,
    pub throughput: f64,
}

pub fn validate_partition(
    functional: u64,
    syntactic: u64,
    compile_error: u64,
    errored: u64,
    total: u64,
) -> Result<(), StatsError> {
    let sum = functional + syntactic + compile_error + errored;
    if sum == total {
        Ok(())
    } else {
        Err(StatsError::Partition {
            functional,
            syntactic,
            compile_error,
            errored,
            sum,
            total,
        })
    }
}

/// Tokens per second over the whole run.
pub fn compute_throughput(usage: TokenUsage, elapsed: f64) -> Result<f64, StatsError> {
    if elapsed.is_nan() || elapsed <= 0.0 {
        return Err(StatsError::Elapsed(elapsed));
    }
    Ok(usage.total() as f64 / elapsed)
}

impl RunStats {
    pub fn from_records(records: &[DistillRecord], elapsed: f64) -> RunStats {
        let mut s = RunStats {
            total: records.len() as u64,
            elapsed,
            ..Default::default()
        };
        let mut usage = TokenUsage::default();
        for r in records {
            usage += r.usage;
            match r.classification {
                DistillClass::Functional => s.functional += 1,
                DistillClass::SyntacticOnly => s.syntactic += 1,
                DistillClass::CompileError => s.compile_error += 1,
                DistillClass::Errored => s.errored += 1,
            }
        }
        s.input_tokens = usage.input_tokens;
        s.output_tokens = usage.output_tokens;
        s.throughput = compute_throughput(usage, elapsed).unwrap_or(0.0);
        s
    }

    pub fn validate(&self) -> Result<(), StatsError> {
        validate_partition(self.functional, self.syntactic, self.compile_error, self.errored, self.total)
    }

    pub fn stats_line(&self) -> String {
        format!(
            "functional={} syntactic={} compile_error={} errored={} throughput={:.3} tok/s",
            self.functional, self.syntactic, self.compile_error, self.errored, self.throughput
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistillBatch {
    pub records: Vec<DistillRecord>,
    pub stats: RunStats,
    pub interrupted: bool,
}

impl DistillBatch {
    /// Records that failed for infrastructure reasons.
    pub fn infrastructure_errors(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.failure.as_ref().is_some_and(|f| f.kind.is_infrastructure()))
            .count()
    }
}

/// Distill every record on a pool of `workers` threads; elapsed is the
/// wall time of the whole batch.
pub fn run_distillation(
    records: &[ProblemRecord],
    agents: &Agents,
    verifier: &dyn Verifier,
    opts: &DistillOptions,
    workers: usize,
    cancel: &AtomicBool,
) -> Result<DistillBatch, String> {
    let pool = worker_pool(workers)?;
    let start = Instant::now();
    let out: Vec<Option<DistillRecord>> = pool.install(|| {
        records
            .par_iter()
            .map(|r| (!cancel.load(Ordering::SeqCst)).then(|| distill_one(r, agents, verifier, opts)))
            .collect()
    });
    let elapsed = start.elapsed().as_secs_f64();
    let interrupted = out.iter().any(Option::is_none);
    let records: Vec<DistillRecord> = out.into_iter().flatten().collect();
    let stats = RunStats::from_records(&records, elapsed);
    Ok(DistillBatch {
        records,
        stats,
        interrupted,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SftPolicy {
    /// Functional records only.
    Functional,
    /// Functional and syntactic-only records.
    AllCompiling,
}

impl SftPolicy {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "functional" => Some(SftPolicy::Functional),
            "all-compiling" => Some(SftPolicy::AllCompiling),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SftPolicy::Functional => "functional",
            SftPolicy::AllCompiling => "all-compiling",
        }
    }

    pub fn admits(self, c: DistillClass) -> bool {
        match self {
            SftPolicy::Functional => c == DistillClass::Functional,
            SftPolicy::AllCompiling => matches!(c, DistillClass::Functional | DistillClass::SyntacticOnly),
        }
    }
}

/// SFT pairs for the records admitted by `policy`. `problems` supplies the
/// instruction text and is matched by id.
pub fn sft_records(records: &[DistillRecord], problems: &[ProblemRecord], policy: SftPolicy) -> Vec<SftRecord> {
    let by_id: std::collections::HashMap<&str, &ProblemRecord> =
        problems.iter().map(|p| (p.id.as_str(), p)).collect();
    records
        .iter()
        .filter(|r| policy.admits(r.classification))
        .filter_map(|r| {
            let p = by_id.get(r.problem_id.as_str())?;
            let code = r.generated_code.as_deref()?;
            let class = match r.classification {
                DistillClass::Functional => "functional",
                _ => "syntactic",
            };
            Some(SftRecord::from_parts(
                &p.spec,
                Some(&r.reasoning),
                code,
                SftLabels {
                    classification: class.into(),
                    provenance: format!("distill:{}", p.source),
                },
            ))
        })
        .collect()
}
