// SPDX-License-Identifier: Apache-2.0

//! Sampling-based code generation evaluation with the unbiased pass@k
//! estimator.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{extract_code_block, AgentRole, Agents};
use crate::corpus::ProblemRecord;
use crate::harness::{Classification, Verifier};
use crate::pipeline::worker_pool;

/// `meta` key holding the module header shown to the generator.
pub const INTERFACE_STUB_KEY: &str = "interface_stub";

const NO_STUB: &str = "(not given; derive the ports from the description)";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalProblem {
    pub id: String,
    pub spec: String,
    pub reference_tb: String,
    pub interface_stub: Option<String>,
}

impl EvalProblem {
    pub fn from_record(r: &ProblemRecord) -> Result<EvalProblem, String> {
        let tb = r
            .reference_tb
            .as_ref()
            .filter(|t| !t.trim().is_empty())
            .ok_or_else(|| format!("problem {} has no reference testbench", r.id))?;
        Ok(EvalProblem {
            id: r.id.clone(),
            spec: r.spec.clone(),
            reference_tb: tb.clone(),
            interface_stub: r.meta.get(INTERFACE_STUB_KEY).cloned(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EstimatorError {
    #[error("pass@k needs 1 <= k <= n (n={n}, k={k})")]
    K { n: u64, k: u64 },
    #[error("pass@k needs c <= n (n={n}, c={c})")]
    C { n: u64, c: u64 },
}

/// Probability that a uniformly drawn size-`k` subset of `n` samples, `c`
/// of them correct, contains a correct one: `1 - C(n-c, k) / C(n, k)`,
/// evaluated as a running product.
pub fn pass_at_k(n: u64, c: u64, k: u64) -> Result<f64, EstimatorError> {
    if k == 0 || k > n {
        return Err(EstimatorError::K { n, k });
    }
    if c > n {
        return Err(EstimatorError::C { n, c });
    }
    if n - c < k {
        return Ok(1.0);
    }
    let miss: f64 = ((n - c + 1)..=n).map(|i| 1.0 - k as f64 / i as f64).product();
    Ok(1.0 - miss)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    /// Extracted code; empty when extraction or the agent call failed.
    pub code: String,
    /// Set when the sample could not be obtained from the backend.
    pub error: Option<String>,
}

/// Draw `n` completions sequentially so scripted replays keep their order.
pub fn sample_completions(problem: &EvalProblem, n: usize, agents: &Agents) -> Vec<Sample> {
    let vars = BTreeMap::from([
        ("id".to_string(), problem.id.clone()),
        ("spec".to_string(), problem.spec.clone()),
        (
            "interface_stub".to_string(),
            problem.interface_stub.clone().unwrap_or_else(|| NO_STUB.to_string()),
        ),
    ]);
    let prompt = match agents.prompts().render_with(AgentRole::CodeGenerator, &vars) {
        Ok(p) => p,
        Err(e) => {
            return vec![
                Sample {
                    code: String::new(),
                    error: Some(e.to_string())
                };
                n
            ]
        }
    };
    (0..n)
        .map(|_| match agents.complete_in(&problem.id, AgentRole::CodeGenerator, &prompt) {
            Ok(r) => Sample {
                code: extract_code_block(&r.text).unwrap_or_default(),
                error: None,
            },
            Err(e) => Sample {
                code: String::new(),
                error: Some(e.to_string()),
            },
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub problem_id: String,
    pub n: u64,
    pub c: u64,
    pub per_sample: Vec<Classification>,
    /// Samples lost to backend or toolchain failures (classified
    /// CompileError).
    pub errors: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_error: Option<String>,
}

impl EvalOutcome {
    pub fn from_classes(problem_id: &str, per_sample: Vec<Classification>, errors: u64) -> Self {
        EvalOutcome {
            problem_id: problem_id.to_string(),
            n: per_sample.len() as u64,
            c: per_sample.iter().filter(|c| **c == Classification::Functional).count() as u64,
            per_sample,
            errors,
            first_error: None,
        }
    }
}

/// Empty sources classify as CompileError without touching the toolchain.
fn classify_sample(s: &Sample, tb: &str, verifier: &dyn Verifier) -> (Classification, Option<String>) {
    if s.code.trim().is_empty() {
        return (Classification::CompileError, s.error.clone());
    }
    match verifier.classify(&s.code, tb) {
        Ok(c) => (c, None),
        Err(e) => (Classification::CompileError, Some(e.to_string())),
    }
}

pub fn evaluate_problem(problem: &EvalProblem, n: usize, agents: &Agents, verifier: &dyn Verifier) -> EvalOutcome {
    let samples = sample_completions(problem, n, agents);
    let judged: Vec<(Classification, Option<String>)> = samples
        .par_iter()
        .map(|s| classify_sample(s, &problem.reference_tb, verifier))
        .collect();
    let errors = judged.iter().filter(|(_, e)| e.is_some()).count() as u64;
    let first_error = judged.iter().find_map(|(_, e)| e.clone());
    let mut o = EvalOutcome::from_classes(&problem.id, judged.into_iter().map(|(c, _)| c).collect(), errors);
    o.first_error = first_error;
    o
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub n: usize,
    pub k_list: Vec<u64>,
    pub temperature: f64,
}

impl EvalConfig {
    /// One greedy sample per problem.
    pub fn smoke() -> Self {
        EvalConfig {
            n: 1,
            k_list: vec![1],
            temperature: 0.0,
        }
    }

    /// Twenty sampled completions per problem.
    pub fn estimator() -> Self {
        EvalConfig {
            n: 20,
            k_list: vec![1],
            temperature: 0.8,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.n == 0 {
            return Err("n must be at least 1".into());
        }
        if self.k_list.is_empty() {
            return Err("k list is empty".into());
        }
        if let Some(k) = self.k_list.iter().find(|k| **k == 0 || **k > self.n as u64) {
            return Err(format!("k={k} outside 1..={}", self.n));
        }
        Ok(())
    }
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig::smoke()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub id: String,
    pub n: u64,
    pub c: u64,
    /// One value per entry of `k_list`.
    pub pass_at_k: Vec<f64>,
    pub errors: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub k_list: Vec<u64>,
    pub rows: Vec<EvalRow>,
    /// Mean over problems, per k.
    pub aggregate: Vec<f64>,
    #[serde(default)]
    pub interrupted: bool,
}

impl EvalReport {
    pub fn from_outcomes(outcomes: &[EvalOutcome], k_list: &[u64], n: usize) -> Result<EvalReport, EstimatorError> {
        let mut rows = Vec::with_capacity(outcomes.len());
        for o in outcomes {
            let vals = k_list
                .iter()
                .map(|&k| pass_at_k(o.n, o.c, k))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(EvalRow {
                id: o.problem_id.clone(),
                n: o.n,
                c: o.c,
                pass_at_k: vals,
                errors: o.errors,
                first_error: o.first_error.clone(),
            });
        }
        let aggregate = (0..k_list.len())
            .map(|j| {
                if rows.is_empty() {
                    0.0
                } else {
                    rows.iter().map(|r| r.pass_at_k[j]).sum::<f64>() / rows.len() as f64
                }
            })
            .collect();
        Ok(EvalReport {
            n,
            k_list: k_list.to_vec(),
            rows,
            aggregate,
            interrupted: false,
        })
    }

    pub fn infrastructure_errors(&self) -> u64 {
        self.rows.iter().map(|r| r.errors).sum()
    }

    pub fn render_text(&self) -> String {
        let idw = self.rows.iter().map(|r| r.id.len()).max().unwrap_or(0).max("problem".len());
        let mut out = format!("{:<idw$}  {:>4}  {:>4}", "problem", "n", "c");
        for k in &self.k_list {
            out.push_str(&format!("  {:>12}", format!("pass@{k} (%)")));
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{:<idw$}  {:>4}  {:>4}", r.id, r.n, r.c));
            for v in &r.pass_at_k {
                out.push_str(&format!("  {:>12}", percent(*v)));
            }
            out.push('\n');
        }
        out.push_str(&format!("{:<idw$}  {:>4}  {:>4}", "aggregate", self.n, ""));
        for v in &self.aggregate {
            out.push_str(&format!("  {:>12}", percent(*v)));
        }
        out.push('\n');
        if self.interrupted {
            out.push_str("INTERRUPTED: partial results\n");
        }
        out
    }
}

/// Whole percent, halves rounded up.
pub fn percent(p: f64) -> String {
    format!("{}", (p * 100.0).round() as i64)
}

pub fn run_eval(
    problems: &[EvalProblem],
    cfg: &EvalConfig,
    agents: &Agents,
    verifier: &dyn Verifier,
    workers: usize,
    cancel: &AtomicBool,
) -> Result<EvalReport, String> {
    if problems.is_empty() {
        return Err("no problems to evaluate".into());
    }
    cfg.validate()?;
    let pool = worker_pool(workers)?;
    let outcomes: Vec<Option<EvalOutcome>> = pool.install(|| {
        problems
            .par_iter()
            .map(|p| (!cancel.load(Ordering::SeqCst)).then(|| evaluate_problem(p, cfg.n, agents, verifier)))
            .collect()
    });
    let interrupted = outcomes.iter().any(Option::is_none);
    let outcomes: Vec<EvalOutcome> = outcomes.into_iter().flatten().collect();
    let mut report = EvalReport::from_outcomes(&outcomes, &cfg.k_list, cfg.n).map_err(|e| e.to_string())?;
    report.interrupted = interrupted;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::Script;
    use crate::harness::{HarnessError, OutcomeKind, VerifyOutcome};
    use proptest::prelude::*;

    /// Independent oracle: count size-k subsets of n items (first c
    /// correct) that contain a correct item.
    fn brute(n: u64, c: u64, k: u64) -> f64 {
        let (mut hit, mut all) = (0u64, 0u64);
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as u64 != k {
                continue;
            }
            all += 1;
            if mask & ((1u32 << c) - 1) != 0 {
                hit += 1;
            }
        }
        hit as f64 / all as f64
    }

    struct Marker;

    impl Verifier for Marker {
        fn verify(&self, code: &str, _tb: &str) -> Result<VerifyOutcome, HarnessError> {
            assert!(!code.is_empty(), "empty sources must not reach the toolchain");
            Ok(VerifyOutcome {
                kind: if code.contains("GOOD") { OutcomeKind::Pass } else { OutcomeKind::SimFail },
                log: String::new(),
                wall_time: 0.0,
                workdir: None,
            })
        }
    }

    fn problem(id: &str) -> EvalProblem {
        EvalProblem {
            id: id.into(),
            spec: "s".into(),
            reference_tb: "module tb; endmodule".into(),
            interface_stub: None,
        }
    }

    #[test]
    fn estimator_examples() {
        assert_eq!(pass_at_k(1, 1, 1).unwrap(), 1.0);
        assert_eq!(pass_at_k(5, 0, 3).unwrap(), 0.0);
        assert!((pass_at_k(5, 2, 1).unwrap() - 0.4).abs() < 1e-12);
        assert!((pass_at_k(4, 2, 2).unwrap() - 5.0 / 6.0).abs() < 1e-12);
        assert!(pass_at_k(3, 1, 4).is_err());
        assert!(pass_at_k(3, 1, 0).is_err());
        assert!(pass_at_k(3, 4, 1).is_err());
    }

    #[test]
    fn estimator_matches_enumeration() {
        for n in 1..=8 {
            for c in 0..=n {
                for k in 1..=n {
                    let got = pass_at_k(n, c, k).unwrap();
                    assert!((got - brute(n, c, k)).abs() <= 1e-12, "n={n} c={c} k={k}");
                }
            }
        }
    }

    #[test]
    fn sampling_keeps_script_order_and_empties_prose() {
        let mut s = Script::default();
        for t in ["```verilog\nA\n```", "no code", "```verilog\nC\n```"] {
            s.push_for("p", AgentRole::CodeGenerator, t);
        }
        let (agents, _) = Agents::scripted(s);
        let v = sample_completions(&problem("p"), 3, &agents);
        let codes: Vec<_> = v.iter().map(|s| s.code.as_str()).collect();
        assert_eq!(codes, ["A", "", "C"]);
        assert!(v.iter().all(|s| s.error.is_none()));
    }

    #[test]
    fn two_problem_mean() {
        let mut s = Script::default();
        s.push_for("a", AgentRole::CodeGenerator, "```verilog\nGOOD\n```");
        s.push_for("b", AgentRole::CodeGenerator, "```verilog\nBAD\n```");
        let (agents, _) = Agents::scripted(s);
        let r = run_eval(&[problem("a"), problem("b")], &EvalConfig::smoke(), &agents, &Marker, 2, &AtomicBool::new(false)).unwrap();
        assert_eq!(r.aggregate, vec![0.5]);
        assert!(r.render_text().lines().last().unwrap().ends_with("50"));
    }

    #[test]
    fn agent_errors_are_flagged_compile_errors() {
        let (agents, _) = Agents::scripted(Script::default());
        let o = evaluate_problem(&problem("x"), 2, &agents, &Marker);
        assert_eq!(o.per_sample, vec![Classification::CompileError; 2]);
        assert_eq!((o.n, o.c, o.errors), (2, 0, 2));
    }

    #[test]
    fn config_defaults_and_validation() {
        let d = EvalConfig::default();
        assert_eq!((d.n, d.k_list.clone(), d.temperature), (1, vec![1], 0.0));
        let e = EvalConfig::estimator();
        assert_eq!((e.n, e.temperature), (20, 0.8));
        assert!(EvalConfig { n: 5, k_list: vec![1, 5], temperature: 0.8 }.validate().is_ok());
        assert!(EvalConfig { n: 5, k_list: vec![6], temperature: 0.8 }.validate().is_err());
    }

    #[test]
    fn record_conversion() {
        let mut r = ProblemRecord::new("p", "s", "spec", "module m; endmodule");
        assert!(EvalProblem::from_record(&r).is_err());
        r.reference_tb = Some("module tb; endmodule".into());
        r.meta.insert(INTERFACE_STUB_KEY.into(), "module m(input a);".into());
        let p = EvalProblem::from_record(&r).unwrap();
        assert_eq!(p.interface_stub.as_deref(), Some("module m(input a);"));
    }

    proptest! {
        #[test]
        fn monotone_in_c_and_k(n in 1u64..30, c in 0u64..30, k in 1u64..30) {
            prop_assume!(c <= n && k <= n);
            let p = pass_at_k(n, c, k).unwrap();
            if c < n { prop_assert!(pass_at_k(n, c + 1, k).unwrap() >= p - 1e-12); }
            if k < n { prop_assert!(pass_at_k(n, c, k + 1).unwrap() >= p - 1e-12); }
            prop_assert_eq!(pass_at_k(n, n, k).unwrap(), 1.0);
            prop_assert_eq!(pass_at_k(n, 0, k).unwrap(), 0.0);
        }

        #[test]
        fn aggregate_within_per_problem_range(cs in proptest::collection::vec(0u64..=6, 1..12), k in 1u64..=6) {
            let outs: Vec<EvalOutcome> = cs.iter().enumerate().map(|(i, &c)| {
                let classes = (0..6).map(|j| if j < c { Classification::Functional } else { Classification::SyntacticOnly }).collect();
                EvalOutcome::from_classes(&format!("p{i}"), classes, 0)
            }).collect();
            let r = EvalReport::from_outcomes(&outs, &[k], 6).unwrap();
            let vals: Vec<f64> = r.rows.iter().map(|x| x.pass_at_k[0]).collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(r.aggregate[0] >= lo - 1e-12 && r.aggregate[0] <= hi + 1e-12);
        }
    }
}
