// SPDX-License-Identifier: Apache-2.0

//! Role-specialized chat agents.
//!
//! [`Agents`] pairs a [`ChatBackend`] with the prompt templates and an
//! [`ApiCounter`]. Two backends ship: [`ScriptedBackend`] replays canned
//! responses keyed by role and per-role sequence index, and [`LiveBackend`]
//! talks to an OpenAI-compatible chat-completions endpoint.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::corpus::ProblemRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    QualityRefiner,
    TestbenchWriter,
    TestbenchReviser,
    ReasoningDistiller,
    CodeGenerator,
}

impl AgentRole {
    pub const ALL: [AgentRole; 5] = [
        AgentRole::QualityRefiner,
        AgentRole::TestbenchWriter,
        AgentRole::TestbenchReviser,
        AgentRole::ReasoningDistiller,
        AgentRole::CodeGenerator,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentRole::QualityRefiner => "quality_refiner",
            AgentRole::TestbenchWriter => "testbench_writer",
            AgentRole::TestbenchReviser => "testbench_reviser",
            AgentRole::ReasoningDistiller => "reasoning_distiller",
            AgentRole::CodeGenerator => "code_generator",
        }
    }

    pub fn parse(s: &str) -> Option<AgentRole> {
        AgentRole::ALL.into_iter().find(|r| r.as_str() == s)
    }

    /// Editorial work runs greedy; generation roles sample.
    pub fn default_temperature(self) -> f64 {
        match self {
            AgentRole::QualityRefiner => 0.0,
            _ => 0.8,
        }
    }

    fn default_template(self) -> &'static str {
        match self {
            AgentRole::QualityRefiner => include_str!("../prompts/quality_refiner.txt"),
            AgentRole::TestbenchWriter => include_str!("../prompts/testbench_writer.txt"),
            AgentRole::TestbenchReviser => include_str!("../prompts/testbench_reviser.txt"),
            AgentRole::ReasoningDistiller => include_str!("../prompts/reasoning_distiller.txt"),
            AgentRole::CodeGenerator => include_str!("../prompts/code_generator.txt"),
        }
    }
}

impl std::fmt::Display for AgentRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl TokenUsage {
    pub fn total(&self) -> u64 {
        self.input_tokens + self.output_tokens
    }
}

impl std::ops::Add for TokenUsage {
    type Output = TokenUsage;
    fn add(self, o: TokenUsage) -> TokenUsage {
        TokenUsage {
            input_tokens: self.input_tokens + o.input_tokens,
            output_tokens: self.output_tokens + o.output_tokens,
        }
    }
}

impl std::ops::AddAssign for TokenUsage {
    fn add_assign(&mut self, o: TokenUsage) {
        *self = *self + o;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentResponse {
    pub text: String,
    pub usage: TokenUsage,
    /// Seconds spent waiting for the backend.
    pub latency: f64,
}

/// Completion accounting shared by every worker of a run.
#[derive(Debug, Default)]
pub struct ApiCounter {
    calls: AtomicU64,
    transport_retries: AtomicU64,
}

impl ApiCounter {
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn transport_retries(&self) -> u64 {
        self.transport_retries.load(Ordering::SeqCst)
    }

    pub fn record_call(&self) {
        self.calls.fetch_add(1, Ordering::SeqCst);
    }

    pub fn record_retry(&self) {
        self.transport_retries.fetch_add(1, Ordering::SeqCst);
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TemplateError {
    #[error("template for {role}: no value for placeholder `{placeholder}`")]
    MissingPlaceholder { role: AgentRole, placeholder: String },
    #[error("template for {role}: unterminated placeholder at byte {offset}")]
    Unterminated { role: AgentRole, offset: usize },
    #[error("cannot read template {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AgentError {
    #[error("script exhausted: no response for role {role} at index {index}{}", scope_suffix(.scope))]
    ScriptExhausted {
        role: AgentRole,
        index: usize,
        scope: String,
    },
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed completion response: {0}")]
    Protocol(String),
    #[error(transparent)]
    Template(#[from] TemplateError),
}

fn scope_suffix(scope: &str) -> String {
    if scope.is_empty() {
        String::new()
    } else {
        format!(" (problem {scope})")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no fenced code block found in response")]
pub struct ExtractError;

/// Return the body of the last fenced block tagged as Verilog, or of the
/// last untagged block when none is tagged. Blocks tagged with any other
/// language are ignored. An unterminated final block counts as a block.
pub fn extract_code_block(text: &str) -> Result<String, ExtractError> {
    let mut tagged = None;
    let mut untagged = None;
    let mut open: Option<(String, Vec<&str>)> = None;
    for line in text.lines() {
        let t = line.trim_start();
        match open.take() {
            None => {
                if let Some(info) = t.strip_prefix("```") {
                    open = Some((info.trim().to_ascii_lowercase(), Vec::new()));
                }
            }
            Some((info, mut body)) => {
                if t.trim_end() == "```" {
                    let content = body.join("\n");
                    match info.as_str() {
                        "verilog" | "systemverilog" | "v" | "sv" => tagged = Some(content),
                        "" => untagged = Some(content),
                        _ => {}
                    }
                } else {
                    body.push(line);
                    open = Some((info, body));
                }
            }
        }
    }
    if let Some((info, body)) = open {
        let content = body.join("\n");
        match info.as_str() {
            "verilog" | "systemverilog" | "v" | "sv" => tagged = Some(content),
            "" => untagged = Some(content),
            _ => {}
        }
    }
    tagged.or(untagged).ok_or(ExtractError)
}

/// One prompt template per role. Templates use `{name}` placeholders;
/// `{{` and `}}` produce literal braces. Braces that do not enclose a plain
/// identifier are copied verbatim, so Verilog concatenations such as
/// `{c, s}` in a template need no escaping.
#[derive(Debug, Clone)]
pub struct PromptSet {
    templates: BTreeMap<AgentRole, String>,
}

impl Default for PromptSet {
    fn default() -> Self {
        PromptSet {
            templates: AgentRole::ALL
                .into_iter()
                .map(|r| (r, r.default_template().to_string()))
                .collect(),
        }
    }
}

impl PromptSet {
    pub fn set(&mut self, role: AgentRole, template: impl Into<String>) {
        self.templates.insert(role, template.into());
    }

    pub fn template(&self, role: AgentRole) -> &str {
        &self.templates[&role]
    }

    /// Replace defaults with `<dir>/<role>.txt` for every such file present.
    pub fn load_overrides(&mut self, dir: &Path) -> Result<usize, TemplateError> {
        let mut n = 0;
        for role in AgentRole::ALL {
            let p = dir.join(format!("{}.txt", role.as_str()));
            if p.exists() {
                let text = std::fs::read_to_string(&p).map_err(|e| TemplateError::Io {
                    path: p.display().to_string(),
                    message: e.to_string(),
                })?;
                self.set(role, text);
                n += 1;
            }
        }
        Ok(n)
    }

    pub fn render_with(&self, role: AgentRole, vars: &BTreeMap<String, String>) -> Result<String, TemplateError> {
        render_template(role, self.template(role), vars)
    }

    /// Record fields (`id`, `source`, `spec`, `golden_code`, `reference_tb`
    /// when present, and `meta` entries) are available as placeholders;
    /// `context` entries take precedence.
    pub fn render(
        &self,
        role: AgentRole,
        record: &ProblemRecord,
        context: &BTreeMap<String, String>,
    ) -> Result<String, TemplateError> {
        let mut vars: BTreeMap<String, String> = record.meta.clone();
        vars.insert("id".into(), record.id.clone());
        vars.insert("source".into(), record.source.clone());
        vars.insert("spec".into(), record.spec.clone());
        vars.insert("golden_code".into(), record.golden_code.clone());
        if let Some(tb) = &record.reference_tb {
            vars.insert("reference_tb".into(), tb.clone());
        }
        vars.extend(context.iter().map(|(k, v)| (k.clone(), v.clone())));
        self.render_with(role, &vars)
    }
}

/// Render with the shipped default templates.
pub fn render_prompt(
    role: AgentRole,
    record: &ProblemRecord,
    context: &BTreeMap<String, String>,
) -> Result<String, TemplateError> {
    PromptSet::default().render(role, record, context)
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn render_template(
    role: AgentRole,
    template: &str,
    vars: &BTreeMap<String, String>,
) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(pos) = rest.find(['{', '}']) {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        if tail.starts_with("{{") || tail.starts_with("}}") {
            out.push_str(&tail[..1]);
            rest = &tail[2..];
            continue;
        }
        if let Some(after) = tail.strip_prefix('}') {
            out.push('}');
            rest = after;
            continue;
        }
        match tail[1..].find('}') {
            Some(end) if is_ident(&tail[1..1 + end]) => {
                let name = &tail[1..1 + end];
                match vars.get(name) {
                    Some(v) => out.push_str(v),
                    None => {
                        return Err(TemplateError::MissingPlaceholder {
                            role,
                            placeholder: name.to_string(),
                        })
                    }
                }
                rest = &tail[end + 2..];
            }
            Some(_) => {
                out.push('{');
                rest = &tail[1..];
            }
            None => {
                let offset = template.len() - tail.len();
                if is_ident(tail[1..].trim_end()) {
                    return Err(TemplateError::Unterminated { role, offset });
                }
                out.push_str(tail);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// What a backend is asked for. `scope` names the problem the call belongs
/// to, so replayed scripts stay deterministic when problems run
/// concurrently.
#[derive(Debug, Clone, Copy)]
pub struct Request<'a> {
    pub role: AgentRole,
    pub prompt: &'a str,
    pub scope: &'a str,
    pub temperature: f64,
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, req: &Request<'_>, counter: &ApiCounter) -> Result<AgentResponse, AgentError>;
}

/// Canned responses per role, optionally overridden per problem id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Script {
    /// Responses used by any problem without its own entry.
    #[serde(default)]
    pub responses: BTreeMap<AgentRole, Vec<String>>,
    #[serde(default)]
    pub problems: BTreeMap<String, BTreeMap<AgentRole, Vec<String>>>,
}

impl Script {
    pub fn push(&mut self, role: AgentRole, text: impl Into<String>) -> &mut Self {
        self.responses.entry(role).or_default().push(text.into());
        self
    }

    pub fn push_for(&mut self, problem: &str, role: AgentRole, text: impl Into<String>) -> &mut Self {
        self.problems
            .entry(problem.to_string())
            .or_default()
            .entry(role)
            .or_default()
            .push(text.into());
        self
    }

    pub fn load(path: &Path) -> Result<Script, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

/// Synthetic token count: one token per four bytes, rounded up.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.len() as u64).div_ceil(4)
}

#[derive(Debug, Default)]
pub struct ScriptedBackend {
    script: Script,
    cursors: Mutex<HashMap<(String, AgentRole), usize>>,
    consumed: AtomicU64,
}

impl ScriptedBackend {
    pub fn new(script: Script) -> Self {
        ScriptedBackend {
            script,
            cursors: Mutex::new(HashMap::new()),
            consumed: AtomicU64::new(0),
        }
    }

    /// Responses handed out so far.
    pub fn consumed(&self) -> u64 {
        self.consumed.load(Ordering::SeqCst)
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, req: &Request<'_>, _counter: &ApiCounter) -> Result<AgentResponse, AgentError> {
        let (scope, table) = match self.script.problems.get(req.scope) {
            Some(t) => (req.scope, t),
            None => ("", &self.script.responses),
        };
        let index = {
            let mut cursors = self.cursors.lock().expect("cursor lock");
            let c = cursors.entry((scope.to_string(), req.role)).or_insert(0);
            let i = *c;
            *c += 1;
            i
        };
        let text = table
            .get(&req.role)
            .and_then(|v| v.get(index))
            .ok_or_else(|| AgentError::ScriptExhausted {
                role: req.role,
                index,
                scope: scope.to_string(),
            })?;
        self.consumed.fetch_add(1, Ordering::SeqCst);
        Ok(AgentResponse {
            text: text.clone(),
            usage: TokenUsage {
                input_tokens: estimate_tokens(req.prompt),
                output_tokens: estimate_tokens(text),
            },
            latency: 0.0,
        })
    }
}

/// Client for an OpenAI-compatible `/chat/completions` endpoint.
#[derive(Debug, Clone)]
pub struct LiveBackend {
    url: String,
    model: String,
    api_key: Option<String>,
    max_retries: u32,
    seed: Option<u64>,
    agent: ureq::Agent,
}

pub const API_KEY_ENV: &str = "TBFORGE_API_KEY";

impl LiveBackend {
    /// `endpoint` is the API base (e.g. `http://host:8000/v1`); the
    /// `/chat/completions` suffix is appended unless already present. The
    /// credential is read from `TBFORGE_API_KEY` when set.
    pub fn new(endpoint: &str, model: &str) -> Self {
        let base = endpoint.trim_end_matches('/');
        let url = if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        };
        LiveBackend {
            url,
            model: model.to_string(),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            max_retries: 3,
            seed: None,
            agent: ureq::AgentBuilder::new()
                .timeout_connect(Duration::from_secs(10))
                .timeout(Duration::from_secs(600))
                .build(),
        }
    }

    pub fn with_max_retries(mut self, n: u32) -> Self {
        self.max_retries = n;
        self
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn request_body(&self, req: &Request<'_>) -> serde_json::Value {
        let mut body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "n": 1,
        });
        if let Some(seed) = self.seed {
            body["seed"] = json!(seed);
        }
        body
    }
}

/// Pull the completion text and usage out of a chat-completions response.
pub fn parse_completion(body: &serde_json::Value) -> Result<(String, TokenUsage), AgentError> {
    let text = body
        .pointer("/choices/0/message/content")
        .and_then(|v| v.as_str())
        .ok_or_else(|| AgentError::Protocol("missing choices[0].message.content".into()))?;
    let get = |k: &str| body.pointer(&format!("/usage/{k}")).and_then(|v| v.as_u64()).unwrap_or(0);
    Ok((
        text.to_string(),
        TokenUsage {
            input_tokens: get("prompt_tokens"),
            output_tokens: get("completion_tokens"),
        },
    ))
}

impl ChatBackend for LiveBackend {
    fn complete(&self, req: &Request<'_>, counter: &ApiCounter) -> Result<AgentResponse, AgentError> {
        let body = self.request_body(req);
        let start = Instant::now();
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            let mut call = self.agent.post(&self.url).set("Content-Type", "application/json");
            if let Some(key) = &self.api_key {
                call = call.set("Authorization", &format!("Bearer {key}"));
            }
            let retryable = match call.send_json(body.clone()) {
                Ok(resp) => {
                    let v: serde_json::Value = resp
                        .into_json()
                        .map_err(|e| AgentError::Protocol(format!("invalid JSON body: {e}")))?;
                    let (text, usage) = parse_completion(&v)?;
                    return Ok(AgentResponse {
                        text,
                        usage,
                        latency: start.elapsed().as_secs_f64(),
                    });
                }
                Err(ureq::Error::Status(status, resp)) => {
                    let body = resp.into_string().unwrap_or_default();
                    if status == 429 || status >= 500 {
                        format!("HTTP {status}: {body}")
                    } else {
                        return Err(AgentError::Http { status, body });
                    }
                }
                Err(ureq::Error::Transport(t)) => t.to_string(),
            };
            if attempt > self.max_retries {
                return Err(AgentError::Transport {
                    attempts: attempt,
                    message: retryable,
                });
            }
            counter.record_retry();
            std::thread::sleep(Duration::from_millis(100 * (1 << (attempt - 1).min(6))));
        }
    }
}

/// The agent pool used by every workflow: backend, templates, sampling
/// temperatures and the shared call counter.
pub struct Agents {
    backend: Arc<dyn ChatBackend>,
    prompts: PromptSet,
    temperatures: BTreeMap<AgentRole, f64>,
    counter: ApiCounter,
}

impl Agents {
    pub fn new(backend: Arc<dyn ChatBackend>) -> Self {
        Agents {
            backend,
            prompts: PromptSet::default(),
            temperatures: AgentRole::ALL
                .into_iter()
                .map(|r| (r, r.default_temperature()))
                .collect(),
            counter: ApiCounter::default(),
        }
    }

    pub fn scripted(script: Script) -> (Self, Arc<ScriptedBackend>) {
        let b = Arc::new(ScriptedBackend::new(script));
        (Agents::new(b.clone()), b)
    }

    pub fn with_prompts(mut self, prompts: PromptSet) -> Self {
        self.prompts = prompts;
        self
    }

    pub fn set_temperature(&mut self, role: AgentRole, t: f64) {
        self.temperatures.insert(role, t);
    }

    pub fn temperature(&self, role: AgentRole) -> f64 {
        self.temperatures[&role]
    }

    pub fn prompts(&self) -> &PromptSet {
        &self.prompts
    }

    pub fn counter(&self) -> &ApiCounter {
        &self.counter
    }

    pub fn render(
        &self,
        role: AgentRole,
        record: &ProblemRecord,
        context: &BTreeMap<String, String>,
    ) -> Result<String, TemplateError> {
        self.prompts.render(role, record, context)
    }

    pub fn complete(&self, role: AgentRole, prompt: &str) -> Result<AgentResponse, AgentError> {
        self.complete_in("", role, prompt)
    }

    /// Complete on behalf of problem `scope`. `calls` grows by one exactly
    /// when a response is returned.
    pub fn complete_in(&self, scope: &str, role: AgentRole, prompt: &str) -> Result<AgentResponse, AgentError> {
        let req = Request {
            role,
            prompt,
            scope,
            temperature: self.temperature(role),
        };
        let resp = self.backend.complete(&req, &self.counter)?;
        self.counter.record_call();
        Ok(resp)
    }
}
