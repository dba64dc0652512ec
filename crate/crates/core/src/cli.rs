// SPDX-License-Identifier: Apache-2.0

//! `tbforge` command line: `gen-tb`, `distill`, `eval` and `report`.
//!
//! Settings resolve in the order built-in default, `--config` file, then
//! command-line flag. Toolchain paths additionally honor
//! `TBFORGE_IVERILOG` / `TBFORGE_VVP` between the flag and the file.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Once};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::agents::{AgentRole, Agents, ChatBackend, LiveBackend, PromptSet, Script, ScriptedBackend};
use crate::corpus::{filter_records, load_dataset, write_sft_dataset, ProblemRecord};
use crate::distill::{run_distillation, sft_records, DistillOptions, SftPolicy};
use crate::evalrunner::{run_eval, EvalConfig, EvalProblem};
use crate::harness::{Harness, ToolConfig, COMPILER_ENV, RUNTIME_ENV};
use crate::pipeline::{aggregate_report, render_table, run_batch, PipelineConfig, PipelineVariant, StageLedger};

pub const EXIT_OK: i32 = 0;
/// Some problems hit backend or toolchain failures.
pub const EXIT_INFRA: i32 = 1;
/// Bad flags, config or inputs.
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INTERRUPTED: i32 = 130;

#[derive(Debug, Parser)]
#[command(name = "tbforge", version, about = "Verilog testbench generation, verification and curation")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Default, Args)]
struct GlobalArgs {
    /// TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Scripted backend response file; repeat to give run i the file i mod N.
    #[arg(long, global = true)]
    script: Vec<PathBuf>,
    /// OpenAI-compatible API base URL.
    #[arg(long, global = true)]
    endpoint: Option<String>,
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Directory of `<role>.txt` prompt template overrides.
    #[arg(long, global = true)]
    prompts: Option<PathBuf>,
    #[arg(long, global = true)]
    iverilog: Option<PathBuf>,
    #[arg(long, global = true)]
    vvp: Option<PathBuf>,
    /// Seconds.
    #[arg(long, global = true)]
    compile_timeout: Option<f64>,
    /// Seconds.
    #[arg(long, global = true)]
    sim_timeout: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Generate and verify testbenches for a dataset.
    GenTb {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_parser = parse_variant)]
        variant: Option<PipelineVariant>,
        /// Reviser cycles for the baseline variant.
        #[arg(long)]
        budget: Option<u32>,
        #[arg(long)]
        pre_budget: Option<u32>,
        #[arg(long)]
        post_budget: Option<u32>,
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Distill reasoning traces and build SFT datasets.
    Distill {
        #[arg(long)]
        dataset: PathBuf,
        /// Write only this SFT variant (default: both).
        #[arg(long, value_parser = parse_policy)]
        policy: Option<SftPolicy>,
        /// Do not show the golden solution to the distiller.
        #[arg(long)]
        hide_golden: bool,
    },
    /// Sample completions per problem and report pass@k.
    Eval {
        #[arg(long)]
        problems: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        /// Comma-separated k values.
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<u64>>,
        #[arg(long)]
        temperature: Option<f64>,
    },
    /// Re-render saved `ledgers.json` files side by side.
    Report {
        #[arg(long, required = true)]
        ledgers: Vec<PathBuf>,
    },
}

fn parse_variant(s: &str) -> Result<PipelineVariant, String> {
    PipelineVariant::parse(s).ok_or_else(|| format!("unknown variant `{s}` (expected baseline or pregen)"))
}

fn parse_policy(s: &str) -> Result<SftPolicy, String> {
    SftPolicy::parse(s).ok_or_else(|| format!("unknown policy `{s}` (expected functional or all-compiling)"))
}

/// Config file layout. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub prompts: Option<PathBuf>,
    #[serde(default)]
    pub backend: FileBackend,
    #[serde(default)]
    pub toolchain: FileToolchain,
    #[serde(default)]
    pub pipeline: FilePipeline,
    #[serde(default)]
    pub distill: FileDistill,
    #[serde(default)]
    pub eval: FileEval,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileBackend {
    #[serde(default)]
    pub script: Vec<PathBuf>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub max_retries: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileToolchain {
    pub iverilog: Option<PathBuf>,
    pub vvp: Option<PathBuf>,
    pub compile_timeout: Option<f64>,
    pub sim_timeout: Option<f64>,
    pub workdir_root: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilePipeline {
    pub variant: Option<PipelineVariant>,
    pub budget: Option<u32>,
    pub pre_budget: Option<u32>,
    pub post_budget: Option<u32>,
    pub runs: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileDistill {
    pub policy: Option<SftPolicy>,
    pub show_golden: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileEval {
    pub n: Option<usize>,
    pub k: Option<Vec<u64>>,
    pub temperature: Option<f64>,
}

/// Fully resolved settings; written to `config.toml` in the output
/// directory of every run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub workers: usize,
    pub seed: u64,
    pub out: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompts: Option<PathBuf>,
    pub backend: BackendConfig,
    pub toolchain: ToolchainConfig,
    pub pipeline: PipelineSection,
    pub distill: DistillSection,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BackendConfig {
    pub script: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub max_retries: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToolchainConfig {
    pub iverilog: PathBuf,
    pub vvp: PathBuf,
    pub compile_timeout: f64,
    pub sim_timeout: f64,
    pub workdir_root: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineSection {
    pub variant: PipelineVariant,
    pub budget: u32,
    pub pre_budget: u32,
    pub post_budget: u32,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistillSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<SftPolicy>,
    pub show_golden: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSection {
    pub n: usize,
    pub k: Vec<u64>,
    pub temperature: f64,
}

impl RunConfig {
    pub fn tool_config(&self) -> ToolConfig {
        ToolConfig {
            compiler_path: self.toolchain.iverilog.clone(),
            runtime_path: self.toolchain.vvp.clone(),
            compile_timeout: Duration::from_secs_f64(self.toolchain.compile_timeout.max(0.0)),
            sim_timeout: Duration::from_secs_f64(self.toolchain.sim_timeout.max(0.0)),
            workdir_root: self.toolchain.workdir_root.clone(),
        }
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            variant: self.pipeline.variant,
            budget: self.pipeline.budget,
            pre_budget: self.pipeline.pre_budget,
            post_budget: self.pipeline.post_budget,
        }
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            n: self.eval.n,
            k_list: self.eval.k.clone(),
            temperature: self.eval.temperature,
        }
    }

    /// Agents for run `index`: scripts rotate across runs; otherwise the
    /// live endpoint is used.
    pub fn agents(&self, index: usize) -> Result<Agents> {
        let backend: Arc<dyn ChatBackend> = if !self.backend.script.is_empty() {
            let path = &self.backend.script[index % self.backend.script.len()];
            Arc::new(ScriptedBackend::new(Script::load(path).map_err(|e| anyhow!("cannot load script {e}"))?))
        } else if let Some(endpoint) = &self.backend.endpoint {
            let model = self
                .backend
                .model
                .as_deref()
                .ok_or_else(|| anyhow!("--endpoint requires --model"))?;
            Arc::new(
                LiveBackend::new(endpoint, model)
                    .with_seed(Some(self.seed))
                    .with_max_retries(self.backend.max_retries),
            )
        } else {
            bail!("no backend configured: pass --script PATH or --endpoint URL --model NAME");
        };
        let mut prompts = PromptSet::default();
        if let Some(dir) = &self.prompts {
            prompts
                .load_overrides(dir)
                .with_context(|| format!("loading prompts from {}", dir.display()))?;
        }
        Ok(Agents::new(backend).with_prompts(prompts))
    }
}

fn resolve(g: &GlobalArgs, cmd: &Cmd) -> Result<RunConfig> {
    let file: FileConfig = match &g.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("cannot read config {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("invalid config {}", p.display()))?
        }
        None => FileConfig::default(),
    };
    let out = g.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("tbforge-out"));
    let discovered = ToolConfig::discover();
    let env_path = |k: &str| std::env::var_os(k).filter(|v| !v.is_empty()).map(PathBuf::from);
    let iverilog = g
        .iverilog
        .clone()
        .or_else(|| env_path(COMPILER_ENV))
        .or(file.toolchain.iverilog)
        .unwrap_or(discovered.compiler_path);
    let vvp = g
        .vvp
        .clone()
        .or_else(|| env_path(RUNTIME_ENV))
        .or(file.toolchain.vvp)
        .unwrap_or(discovered.runtime_path);
    let mut cfg = RunConfig {
        workers: g.workers.or(file.workers).unwrap_or(4),
        seed: g.seed.or(file.seed).unwrap_or(0),
        prompts: g.prompts.clone().or(file.prompts),
        backend: BackendConfig {
            script: if g.script.is_empty() { file.backend.script } else { g.script.clone() },
            endpoint: g.endpoint.clone().or(file.backend.endpoint),
            model: g.model.clone().or(file.backend.model),
            max_retries: file.backend.max_retries.unwrap_or(3),
        },
        toolchain: ToolchainConfig {
            iverilog,
            vvp,
            compile_timeout: g
                .compile_timeout
                .or(file.toolchain.compile_timeout)
                .unwrap_or(discovered.compile_timeout.as_secs_f64()),
            sim_timeout: g
                .sim_timeout
                .or(file.toolchain.sim_timeout)
                .unwrap_or(discovered.sim_timeout.as_secs_f64()),
            workdir_root: file.toolchain.workdir_root.unwrap_or_else(|| out.join("workdirs")),
        },
        out,
        pipeline: PipelineSection {
            variant: file.pipeline.variant.unwrap_or(PipelineVariant::Pregenerate),
            budget: file.pipeline.budget.unwrap_or(6),
            pre_budget: file.pipeline.pre_budget.unwrap_or(3),
            post_budget: file.pipeline.post_budget.unwrap_or(3),
            runs: file.pipeline.runs.unwrap_or(1),
        },
        distill: DistillSection {
            policy: file.distill.policy,
            show_golden: file.distill.show_golden.unwrap_or(true),
        },
        eval: EvalSection {
            n: file.eval.n.unwrap_or(1),
            k: file.eval.k.unwrap_or_else(|| vec![1]),
            temperature: 0.0,
        },
    };
    let mut eval_temp = file.eval.temperature;
    match cmd {
        Cmd::GenTb {
            variant,
            budget,
            pre_budget,
            post_budget,
            runs,
            ..
        } => {
            let p = &mut cfg.pipeline;
            p.variant = variant.unwrap_or(p.variant);
            p.budget = budget.unwrap_or(p.budget);
            p.pre_budget = pre_budget.unwrap_or(p.pre_budget);
            p.post_budget = post_budget.unwrap_or(p.post_budget);
            p.runs = runs.unwrap_or(p.runs);
        }
        Cmd::Distill {
            policy, hide_golden, ..
        } => {
            cfg.distill.policy = policy.or(cfg.distill.policy);
            if *hide_golden {
                cfg.distill.show_golden = false;
            }
        }
        Cmd::Eval { n, k, temperature, .. } => {
            cfg.eval.n = n.unwrap_or(cfg.eval.n);
            if let Some(k) = k {
                cfg.eval.k = k.clone();
            }
            eval_temp = temperature.or(eval_temp);
        }
        Cmd::Report { .. } => {}
    }
    // greedy for single-sample smoke runs, sampled otherwise
    cfg.eval.temperature = eval_temp.unwrap_or(if cfg.eval.n == 1 {
        EvalConfig::smoke().temperature
    } else {
        EvalConfig::estimator().temperature
    });
    if cfg.workers == 0 {
        bail!("workers must be at least 1");
    }
    if cfg.pipeline.runs == 0 {
        bail!("runs must be at least 1");
    }
    cfg.pipeline_config().validate()?;
    cfg.tool_config().validate()?;
    Ok(cfg)
}

static CANCEL: AtomicBool = AtomicBool::new(false);
static HANDLER: Once = Once::new();

fn install_interrupt_handler() -> &'static AtomicBool {
    HANDLER.call_once(|| {
        if let Err(e) = ctrlc::set_handler(|| {
            eprintln!("interrupt received: finishing in-flight work");
            CANCEL.store(true, Ordering::SeqCst);
        }) {
            eprintln!("warning: cannot install interrupt handler: {e}");
        }
    });
    &CANCEL
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, &text)
}

/// File-name-safe form of a problem id, made unique within `used`.
fn file_stem(id: &str, used: &mut std::collections::HashSet<String>) -> String {
    let base: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
        .collect();
    let base = if base.is_empty() || base.starts_with('.') { format!("_{base}") } else { base };
    let mut stem = base.clone();
    let mut n = 1;
    while !used.insert(stem.clone()) {
        n += 1;
        stem = format!("{base}-{n}");
    }
    stem
}

fn write_snapshot(cfg: &RunConfig) -> Result<()> {
    let text = toml::to_string_pretty(cfg).context("serializing config snapshot")?;
    write_file(&cfg.out.join("config.toml"), &text)
}

#[derive(Debug, Serialize)]
struct RunMeta<'a> {
    command: &'a str,
    version: &'a str,
    started_unix: f64,
    finished_unix: f64,
    elapsed_secs: f64,
    interrupted: bool,
}

fn write_meta(cfg: &RunConfig, command: &str, started: f64, interrupted: bool) -> Result<()> {
    let finished = unix_now();
    write_json(
        &cfg.out.join("run_meta.json"),
        &RunMeta {
            command,
            version: env!("CARGO_PKG_VERSION"),
            started_unix: started,
            finished_unix: finished,
            elapsed_secs: finished - started,
            interrupted,
        },
    )
}

fn load_records(path: &Path) -> Result<Vec<ProblemRecord>> {
    if !path.exists() {
        bail!("dataset not found: {}", path.display());
    }
    Ok(load_dataset(path)?)
}

fn exit_code(interrupted: bool, infra_errors: u64) -> i32 {
    if interrupted {
        EXIT_INTERRUPTED
    } else if infra_errors > 0 {
        EXIT_INFRA
    } else {
        EXIT_OK
    }
}

/// Saved per-run ledgers, re-renderable with `tbforge report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedLedgers {
    pub variant: PipelineVariant,
    pub interrupted: bool,
    pub runs: Vec<StageLedger>,
}

pub fn cmd_gen_tb(cfg: &RunConfig, dataset: &Path, cancel: &AtomicBool) -> Result<i32> {
    let started = unix_now();
    let records = load_records(dataset)?;
    let verifier = Harness::new(cfg.tool_config())?;
    let pcfg = cfg.pipeline_config();
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("cannot create {}", cfg.out.display()))?;
    write_snapshot(cfg)?;
    let mut ledgers = Vec::new();
    let mut interrupted = false;
    let mut first_error = None;
    for run in 0..cfg.pipeline.runs {
        if run > 0 && cancel.load(Ordering::SeqCst) {
            interrupted = true;
            break;
        }
        let agents = cfg.agents(run)?;
        let batch = run_batch(&records, &agents, &verifier, &pcfg, cfg.workers, cancel)?;
        let dir = cfg.out.join(format!("run-{run}"));
        let mut used = std::collections::HashSet::new();
        for r in &batch.results {
            let stem = file_stem(&r.problem_id, &mut used);
            write_json(&dir.join("transcripts").join(format!("{stem}.json")), r)?;
            if let Some(tb) = &r.final_tb {
                write_file(&dir.join("testbenches").join(format!("{stem}.v")), &format!("{}\n", tb.trim_end()))?;
            }
            if first_error.is_none() {
                first_error = r.error.clone().map(|e| format!("{}: {e}", r.problem_id));
            }
        }
        ledgers.push(batch.ledger);
        if batch.interrupted {
            interrupted = true;
            break;
        }
    }
    write_json(
        &cfg.out.join("ledgers.json"),
        &SavedLedgers {
            variant: pcfg.variant,
            interrupted,
            runs: ledgers.clone(),
        },
    )?;
    let errored: u64 = ledgers.iter().map(|l| l.errored).sum();
    if !ledgers.is_empty() {
        let mut report = aggregate_report(&ledgers, ledgers.len(), pcfg.variant)?;
        report.interrupted = interrupted;
        write_json(&cfg.out.join("report.json"), &report)?;
        let table = render_table(&[(pcfg.variant.as_str(), &report)]);
        write_file(&cfg.out.join("report.txt"), &table)?;
        print!("{table}");
    }
    if let Some(e) = first_error {
        eprintln!("error: {errored} problem(s) errored; first: {e}");
    }
    write_meta(cfg, "gen-tb", started, interrupted)?;
    Ok(exit_code(interrupted, errored))
}

pub fn cmd_distill(cfg: &RunConfig, dataset: &Path, cancel: &AtomicBool) -> Result<i32> {
    let started = unix_now();
    let all = load_records(dataset)?;
    let records = filter_records(&all, true, None);
    if records.len() < all.len() {
        eprintln!("skipped {} record(s) without a reference testbench", all.len() - records.len());
    }
    let verifier = Harness::new(cfg.tool_config())?;
    let agents = cfg.agents(0)?;
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("cannot create {}", cfg.out.display()))?;
    write_snapshot(cfg)?;
    let opts = DistillOptions {
        show_golden: cfg.distill.show_golden,
    };
    let batch = run_distillation(&records, &agents, &verifier, &opts, cfg.workers, cancel).map_err(|e| anyhow!(e))?;
    batch.stats.validate()?;
    let mut lines = String::new();
    for r in &batch.records {
        lines.push_str(&serde_json::to_string(r)?);
        lines.push('\n');
    }
    write_file(&cfg.out.join("distill_records.jsonl"), &lines)?;
    let policies = match cfg.distill.policy {
        Some(p) => vec![p],
        None => vec![SftPolicy::Functional, SftPolicy::AllCompiling],
    };
    for p in policies {
        let sft = sft_records(&batch.records, &records, p);
        let path = cfg.out.join(format!("sft_{}.jsonl", p.as_str().replace('-', "_")));
        write_sft_dataset(&sft, &path)?;
    }
    write_json(&cfg.out.join("stats.json"), &batch.stats)?;
    println!("{}", batch.stats.stats_line());
    let infra = batch.infrastructure_errors() as u64;
    if let Some((r, f)) = batch
        .records
        .iter()
        .find_map(|r| r.failure.as_ref().filter(|f| f.kind.is_infrastructure()).map(|f| (r, f)))
    {
        eprintln!("error: {infra} record(s) errored; first: {}: {}", r.problem_id, f.message);
    }
    write_meta(cfg, "distill", started, batch.interrupted)?;
    Ok(exit_code(batch.interrupted, infra))
}

pub fn cmd_eval(cfg: &RunConfig, problems_path: &Path, cancel: &AtomicBool) -> Result<i32> {
    let started = unix_now();
    let records = load_records(problems_path)?;
    let problems = records
        .iter()
        .map(EvalProblem::from_record)
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| anyhow!(e))?;
    let ecfg = cfg.eval_config();
    ecfg.validate().map_err(|e| anyhow!(e))?;
    let verifier = Harness::new(cfg.tool_config())?;
    let mut agents = cfg.agents(0)?;
    agents.set_temperature(AgentRole::CodeGenerator, ecfg.temperature);
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("cannot create {}", cfg.out.display()))?;
    write_snapshot(cfg)?;
    let report = run_eval(&problems, &ecfg, &agents, &verifier, cfg.workers, cancel).map_err(|e| anyhow!(e))?;
    write_json(&cfg.out.join("eval_report.json"), &report)?;
    let text = report.render_text();
    write_file(&cfg.out.join("eval_report.txt"), &text)?;
    print!("{text}");
    let infra = report.infrastructure_errors();
    if let Some(r) = report.rows.iter().find(|r| r.first_error.is_some()) {
        eprintln!(
            "error: {infra} sample(s) failed; first: {}: {}",
            r.id,
            r.first_error.as_deref().unwrap_or_default()
        );
    }
    write_meta(cfg, "eval", started, report.interrupted)?;
    Ok(exit_code(report.interrupted, infra))
}

pub fn cmd_report(ledger_files: &[PathBuf], out: Option<&Path>) -> Result<i32> {
    let mut saved = Vec::new();
    for p in ledger_files {
        let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
        let s: SavedLedgers = serde_json::from_str(&text).with_context(|| format!("invalid ledgers file {}", p.display()))?;
        saved.push(s);
    }
    let mut reports = Vec::new();
    for s in &saved {
        let mut r = aggregate_report(&s.runs, s.runs.len(), s.variant)?;
        r.interrupted = s.interrupted;
        reports.push(r);
    }
    let cols: Vec<(&str, &crate::pipeline::Report)> = reports.iter().map(|r| (r.variant.as_str(), r)).collect();
    let table = render_table(&cols);
    if let Some(dir) = out {
        write_file(&dir.join("report.txt"), &table)?;
        write_json(&dir.join("report.json"), &reports)?;
    }
    print!("{table}");
    Ok(EXIT_OK)
}

/// Parse `args` (including the program name) and run. Returns the exit
/// status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let cancel = install_interrupt_handler();
    let result = (|| -> Result<i32> {
        if let Cmd::Report { ledgers } = &cli.cmd {
            return cmd_report(ledgers, cli.global.out.as_deref());
        }
        let cfg = resolve(&cli.global, &cli.cmd)?;
        match &cli.cmd {
            Cmd::GenTb { dataset, .. } => cmd_gen_tb(&cfg, dataset, cancel),
            Cmd::Distill { dataset, .. } => cmd_distill(&cfg, dataset, cancel),
            Cmd::Eval { problems, .. } => cmd_eval(&cfg, problems, cancel),
            Cmd::Report { .. } => unreachable!(),
        }
    })();
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_USAGE
        }
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}
