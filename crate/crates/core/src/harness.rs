// SPDX-License-Identifier: Apache-2.0

//! Compile and simulate Verilog through an external toolchain.
//!
//! The toolchain follows the Icarus Verilog conventions: the compiler takes
//! `-o <artifact> <sources...>` and the runtime executes the artifact.
//! A testbench reports its verdict on stdout with [`PASS_SENTINEL`] or
//! [`FAIL_SENTINEL`]; a run without a pass sentinel is a failure.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

pub const PASS_SENTINEL: &str = "TBFORGE_PASS";
pub const FAIL_SENTINEL: &str = "TBFORGE_FAIL";

pub const COMPILER_ENV: &str = "TBFORGE_IVERILOG";
pub const RUNTIME_ENV: &str = "TBFORGE_VVP";

const ARTIFACT: &str = "sim.vvp";

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{which} not found at `{}`", .path.display())]
    MissingTool { which: &'static str, path: PathBuf },
    #[error("invalid toolchain configuration: {0}")]
    InvalidConfig(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Pass,
    SimFail,
    CompileError,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutcome {
    pub kind: OutcomeKind,
    pub log: String,
    pub wall_time: f64,
    /// Retained working directory, set only for failed runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workdir: Option<PathBuf>,
}

impl VerifyOutcome {
    pub fn passed(&self) -> bool {
        self.kind == OutcomeKind::Pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Functional,
    SyntacticOnly,
    CompileError,
}

impl Classification {
    pub fn from_outcome(kind: OutcomeKind) -> Classification {
        match kind {
            OutcomeKind::Pass => Classification::Functional,
            OutcomeKind::SimFail | OutcomeKind::Timeout => Classification::SyntacticOnly,
            OutcomeKind::CompileError => Classification::CompileError,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Functional => "functional",
            Classification::SyntacticOnly => "syntactic",
            Classification::CompileError => "compile_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolConfig {
    pub compiler_path: PathBuf,
    pub runtime_path: PathBuf,
    pub compile_timeout: Duration,
    pub sim_timeout: Duration,
    pub workdir_root: PathBuf,
}

pub const DEFAULT_COMPILE_TIMEOUT: Duration = Duration::from_secs(30);
pub const DEFAULT_SIM_TIMEOUT: Duration = Duration::from_secs(60);

impl ToolConfig {
    pub fn new(compiler: impl Into<PathBuf>, runtime: impl Into<PathBuf>) -> Self {
        ToolConfig {
            compiler_path: compiler.into(),
            runtime_path: runtime.into(),
            compile_timeout: DEFAULT_COMPILE_TIMEOUT,
            sim_timeout: DEFAULT_SIM_TIMEOUT,
            workdir_root: std::env::temp_dir().join("tbforge"),
        }
    }

    /// Locate a toolchain: `TBFORGE_IVERILOG`/`TBFORGE_VVP`, then
    /// `iverilog`/`vvp` on `PATH`, then the bundled `minivlog`/`minivvp`
    /// installed next to the running executable.
    pub fn discover() -> Self {
        let pick = |env: &str, system: &str, bundled: &str| -> PathBuf {
            if let Some(p) = std::env::var_os(env).filter(|v| !v.is_empty()) {
                return PathBuf::from(p);
            }
            if let Some(p) = find_on_path(system) {
                return p;
            }
            if let Some(p) = find_bundled(bundled) {
                return p;
            }
            PathBuf::from(system)
        };
        ToolConfig::new(
            pick(COMPILER_ENV, "iverilog", "minivlog"),
            pick(RUNTIME_ENV, "vvp", "minivvp"),
        )
    }

    pub fn with_timeouts(mut self, compile: Duration, sim: Duration) -> Self {
        self.compile_timeout = compile;
        self.sim_timeout = sim;
        self
    }

    pub fn with_workdir_root(mut self, root: impl Into<PathBuf>) -> Self {
        self.workdir_root = root.into();
        self
    }

    /// Timeouts below one millisecond count as zero and are rejected.
    pub fn validate(&self) -> Result<(), HarnessError> {
        for (name, t) in [("compile_timeout", self.compile_timeout), ("sim_timeout", self.sim_timeout)] {
            if t.as_millis() == 0 {
                return Err(HarnessError::InvalidConfig(format!(
                    "{name} must be positive (got {}s)",
                    t.as_secs_f64()
                )));
            }
        }
        Ok(())
    }

    fn check_tool(&self, which: &'static str, path: &Path) -> Result<PathBuf, HarnessError> {
        resolve_executable(path).ok_or_else(|| HarnessError::MissingTool {
            which,
            path: path.to_path_buf(),
        })
    }
}

fn exe_name(stem: &str) -> String {
    format!("{stem}{}", std::env::consts::EXE_SUFFIX)
}

fn find_on_path(name: &str) -> Option<PathBuf> {
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path)
        .map(|d| d.join(exe_name(name)))
        .find(|p| p.is_file())
}

fn find_bundled(name: &str) -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let dir = exe.parent()?.to_path_buf();
    let up = dir.parent().map(Path::to_path_buf);
    [Some(dir), up]
        .into_iter()
        .flatten()
        .map(|d| d.join(exe_name(name)))
        .find(|p| p.is_file())
}

fn resolve_executable(path: &Path) -> Option<PathBuf> {
    if path.components().count() > 1 || path.is_absolute() {
        // made absolute because the tool runs inside the workdir
        path.is_file().then(|| std::fs::canonicalize(path).ok()).flatten()
    } else {
        find_on_path(&path.to_string_lossy())
    }
}

static WORKDIR_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Create a fresh private directory under `root`.
pub fn fresh_workdir(root: &Path) -> Result<PathBuf, HarnessError> {
    std::fs::create_dir_all(root).map_err(|e| HarnessError::Io {
        context: format!("creating {}", root.display()),
        source: e,
    })?;
    loop {
        let n = WORKDIR_COUNTER.fetch_add(1, Ordering::SeqCst);
        let dir = root.join(format!("tbforge-{}-{n}", std::process::id()));
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => {
                return Err(HarnessError::Io {
                    context: format!("creating {}", dir.display()),
                    source: e,
                })
            }
        }
    }
}

struct ProcOutput {
    stdout: String,
    stderr: String,
    status: Option<i32>,
    timed_out: bool,
}

fn run_with_timeout(
    program: &Path,
    args: &[String],
    cwd: &Path,
    timeout: Duration,
) -> Result<ProcOutput, std::io::Error> {
    let mut child = Command::new(program)
        .args(args)
        .current_dir(cwd)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()?;
    let drain = |r: Option<Box<dyn Read + Send>>| {
        std::thread::spawn(move || {
            let mut buf = Vec::new();
            if let Some(mut r) = r {
                let _ = r.read_to_end(&mut buf);
            }
            String::from_utf8_lossy(&buf).into_owned()
        })
    };
    let out_h = drain(child.stdout.take().map(|s| Box::new(s) as Box<dyn Read + Send>));
    let err_h = drain(child.stderr.take().map(|s| Box::new(s) as Box<dyn Read + Send>));
    let (status, timed_out) = match child.wait_timeout(timeout)? {
        Some(st) => (st.code(), false),
        None => {
            let _ = child.kill();
            let _ = child.wait();
            (None, true)
        }
    };
    Ok(ProcOutput {
        stdout: out_h.join().unwrap_or_default(),
        stderr: err_h.join().unwrap_or_default(),
        status,
        timed_out,
    })
}

fn log_section(log: &mut String, label: &str, program: &Path, args: &[String], out: &ProcOutput) {
    log.push_str(&format!("# {label}: {} {:?}\n", program.display(), args));
    log.push_str(&out.stdout);
    if !out.stdout.is_empty() && !out.stdout.ends_with('\n') {
        log.push('\n');
    }
    log.push_str(&out.stderr);
    if !out.stderr.is_empty() && !out.stderr.ends_with('\n') {
        log.push('\n');
    }
    match (out.timed_out, out.status) {
        (true, _) => log.push_str("# status: timeout\n"),
        (false, Some(c)) => log.push_str(&format!("# status: exit {c}\n")),
        (false, None) => log.push_str("# status: killed by signal\n"),
    }
}

/// Sentinel rule: pass iff the pass sentinel is on stdout, the fail sentinel
/// appears nowhere, and the runtime exited cleanly.
pub fn sentinel_verdict(stdout: &str, stderr: &str, exit_ok: bool) -> OutcomeKind {
    let failed = stdout.contains(FAIL_SENTINEL) || stderr.contains(FAIL_SENTINEL);
    if exit_ok && !failed && stdout.contains(PASS_SENTINEL) {
        OutcomeKind::Pass
    } else {
        OutcomeKind::SimFail
    }
}

/// A successfully compiled design awaiting simulation.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub workdir: PathBuf,
    pub artifact: PathBuf,
    log: String,
    wall_time: f64,
}

#[derive(Debug, Clone)]
pub enum CompileResult {
    Compiled(Compiled),
    /// Compilation failed or timed out; the workdir is retained.
    Failed(VerifyOutcome),
}

/// Write `sources` into a fresh working directory and compile them.
pub fn compile(sources: &[&str], cfg: &ToolConfig) -> Result<CompileResult, HarnessError> {
    cfg.validate()?;
    let compiler = cfg.check_tool("compiler", &cfg.compiler_path)?;
    let start = Instant::now();
    let workdir = fresh_workdir(&cfg.workdir_root)?;
    let mut names = Vec::with_capacity(sources.len());
    for (i, text) in sources.iter().enumerate() {
        let name = format!("source{i}.v");
        std::fs::write(workdir.join(&name), text).map_err(|e| HarnessError::Io {
            context: format!("writing {}", workdir.join(&name).display()),
            source: e,
        })?;
        names.push(name);
    }
    let mut args = vec!["-g2012".to_string(), "-o".to_string(), ARTIFACT.to_string()];
    args.extend(names);
    let out = run_with_timeout(&compiler, &args, &workdir, cfg.compile_timeout).map_err(|e| HarnessError::Io {
        context: format!("running {}", compiler.display()),
        source: e,
    })?;
    let mut log = String::new();
    log_section(&mut log, "compile", &compiler, &args, &out);
    let wall_time = start.elapsed().as_secs_f64();
    let artifact = workdir.join(ARTIFACT);
    let kind = if out.timed_out {
        Some(OutcomeKind::Timeout)
    } else if out.status != Some(0) || !artifact.is_file() {
        Some(OutcomeKind::CompileError)
    } else {
        None
    };
    Ok(match kind {
        Some(kind) => CompileResult::Failed(VerifyOutcome {
            kind,
            log,
            wall_time,
            workdir: Some(workdir),
        }),
        None => CompileResult::Compiled(Compiled {
            workdir,
            artifact,
            log,
            wall_time,
        }),
    })
}

/// Run a compiled design and apply the sentinel rule. The log includes the
/// compile section that produced the artifact.
pub fn simulate(compiled: &Compiled, cfg: &ToolConfig) -> Result<VerifyOutcome, HarnessError> {
    cfg.validate()?;
    let runtime = cfg.check_tool("runtime", &cfg.runtime_path)?;
    let start = Instant::now();
    let args = vec!["-n".to_string(), ARTIFACT.to_string()];
    let out = run_with_timeout(&runtime, &args, &compiled.workdir, cfg.sim_timeout).map_err(|e| HarnessError::Io {
        context: format!("running {}", runtime.display()),
        source: e,
    })?;
    let mut log = compiled.log.clone();
    log_section(&mut log, "simulate", &runtime, &args, &out);
    let kind = if out.timed_out {
        OutcomeKind::Timeout
    } else {
        sentinel_verdict(&out.stdout, &out.stderr, out.status == Some(0))
    };
    Ok(VerifyOutcome {
        kind,
        log,
        wall_time: compiled.wall_time + start.elapsed().as_secs_f64(),
        workdir: Some(compiled.workdir.clone()),
    })
}

/// Compile `module_src` with `tb_src` and simulate. The working directory
/// is deleted after a pass and kept otherwise.
pub fn verify(module_src: &str, tb_src: &str, cfg: &ToolConfig) -> Result<VerifyOutcome, HarnessError> {
    let compiled = match compile(&[module_src, tb_src], cfg)? {
        CompileResult::Failed(o) => return Ok(o),
        CompileResult::Compiled(c) => c,
    };
    let result = simulate(&compiled, cfg);
    match result {
        Ok(mut o) if o.passed() => {
            let _ = std::fs::remove_dir_all(&compiled.workdir);
            o.workdir = None;
            Ok(o)
        }
        other => other,
    }
}

pub fn classify(code: &str, reference_tb: &str, cfg: &ToolConfig) -> Result<Classification, HarnessError> {
    Ok(Classification::from_outcome(verify(code, reference_tb, cfg)?.kind))
}

/// Anything that can judge a (module, testbench) pair.
pub trait Verifier: Send + Sync {
    fn verify(&self, module_src: &str, tb_src: &str) -> Result<VerifyOutcome, HarnessError>;

    fn classify(&self, code: &str, reference_tb: &str) -> Result<Classification, HarnessError> {
        Ok(Classification::from_outcome(self.verify(code, reference_tb)?.kind))
    }
}

/// [`Verifier`] backed by the configured external toolchain.
#[derive(Debug, Clone)]
pub struct Harness {
    cfg: ToolConfig,
}

impl Harness {
    pub fn new(cfg: ToolConfig) -> Result<Self, HarnessError> {
        cfg.validate()?;
        cfg.check_tool("compiler", &cfg.compiler_path)?;
        cfg.check_tool("runtime", &cfg.runtime_path)?;
        Ok(Harness { cfg })
    }

    pub fn config(&self) -> &ToolConfig {
        &self.cfg
    }
}

impl Verifier for Harness {
    fn verify(&self, module_src: &str, tb_src: &str) -> Result<VerifyOutcome, HarnessError> {
        verify(module_src, tb_src, &self.cfg)
    }
}
