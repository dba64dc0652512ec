// SPDX-License-Identifier: Apache-2.0

//! Event-driven scheduler and instruction interpreter.

use std::collections::{BTreeMap, VecDeque};
use std::io::Write;

use crate::ast::Edge;
use crate::error::SimError;
use crate::eval::{eval_for_width, eval_index, eval_self, EvalCtx};
use crate::format::format_args;
use crate::ir::*;
use crate::value::Value;

const MAX_CALL_DEPTH: usize = 256;

#[derive(Debug, Clone)]
pub struct SimOptions {
    /// Stop (with an error) once simulated time passes this bound.
    pub max_time: Option<u64>,
    /// Instructions allowed within one time step before the run is declared
    /// stuck in a zero-delay loop.
    pub step_limit: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            max_time: None,
            step_limit: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimSummary {
    /// Whether `$finish`, `$stop` or `$fatal` ended the run.
    pub finished: bool,
    pub exit_code: i32,
    pub time: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Ready,
    Waiting,
    Done,
}

struct Proc {
    pc: usize,
    state: State,
    /// Bumped on every wake-up; stale watcher entries carry an older value.
    gen: u64,
    /// Index of the wait instruction the process is blocked on.
    wait_at: usize,
    /// Values of the awaited event expressions when the wait began.
    olds: Vec<Value>,
}

enum Timed {
    Resume(usize),
    Nba(Vec<Write1>),
}

/// A resolved write: signal, optional (bit position, width), value.
#[derive(Clone)]
struct Write1 {
    sig: SigId,
    part: Option<(i64, u32)>,
    value: Value,
}

pub struct Sim<'d> {
    d: &'d Design,
    values: Vec<Value>,
    procs: Vec<Proc>,
    watchers: Vec<Vec<(usize, u64)>>,
    active: VecDeque<usize>,
    inactive: Vec<usize>,
    nba: Vec<Write1>,
    timed: BTreeMap<u64, Vec<Timed>>,
    time: u64,
    rng: u64,
    monitor: Option<(Vec<EExpr>, String, Option<Vec<Value>>)>,
    strobes: Vec<(Vec<EExpr>, String)>,
    out: Vec<u8>,
    err: Vec<u8>,
    finished: Option<i32>,
    fatal: bool,
    steps: u64,
    call_depth: usize,
    opts: SimOptions,
}

impl<'d> Sim<'d> {
    pub fn new(d: &'d Design, opts: SimOptions) -> Self {
        let values = d
            .signals
            .iter()
            .map(|s| s.init.unwrap_or_else(|| Value::unknown(s.width)))
            .collect();
        let procs = d
            .processes
            .iter()
            .map(|_| Proc {
                pc: 0,
                state: State::Ready,
                gen: 0,
                wait_at: 0,
                olds: Vec::new(),
            })
            .collect();
        Sim {
            d,
            values,
            procs,
            watchers: vec![Vec::new(); d.signals.len()],
            active: (0..d.processes.len()).collect(),
            inactive: Vec::new(),
            nba: Vec::new(),
            timed: BTreeMap::new(),
            time: 0,
            rng: 0x2545_f491_4f6c_dd1d,
            monitor: None,
            strobes: Vec::new(),
            out: Vec::new(),
            err: Vec::new(),
            finished: None,
            fatal: false,
            steps: 0,
            call_depth: 0,
            opts,
        }
    }

    pub fn value(&self, id: SigId) -> Value {
        self.values[id]
    }

    pub fn signal_by_name(&self, name: &str) -> Option<Value> {
        self.d
            .signals
            .iter()
            .position(|s| s.name == name)
            .map(|i| self.values[i])
    }

    /// Run to completion, streaming `$display` output to `stdout` and
    /// diagnostics to `stderr`.
    pub fn run(
        &mut self,
        stdout: &mut dyn Write,
        stderr: &mut dyn Write,
    ) -> Result<SimSummary, SimError> {
        let result = self.run_inner(stdout, stderr);
        self.flush(stdout, stderr)?;
        result
    }

    fn flush(&mut self, stdout: &mut dyn Write, stderr: &mut dyn Write) -> std::io::Result<()> {
        stdout.write_all(&self.out)?;
        stderr.write_all(&self.err)?;
        self.out.clear();
        self.err.clear();
        stdout.flush()?;
        stderr.flush()
    }

    fn run_inner(
        &mut self,
        stdout: &mut dyn Write,
        stderr: &mut dyn Write,
    ) -> Result<SimSummary, SimError> {
        loop {
            self.steps = 0;
            loop {
                while let Some(p) = self.active.pop_front() {
                    self.exec(p)?;
                    if self.finished.is_some() {
                        return Ok(self.summary());
                    }
                }
                if !self.inactive.is_empty() {
                    self.active.extend(self.inactive.drain(..));
                    continue;
                }
                if !self.nba.is_empty() {
                    let writes = std::mem::take(&mut self.nba);
                    for w in writes {
                        self.apply(&w);
                    }
                    continue;
                }
                break;
            }
            self.end_of_step();
            if self.out.len() + self.err.len() > 1 << 16 {
                self.flush(stdout, stderr)?;
            }
            let Some((t, events)) = self.timed.pop_first() else {
                return Ok(self.summary());
            };
            if let Some(limit) = self.opts.max_time {
                if t > limit {
                    return Err(SimError::TimeLimit(limit));
                }
            }
            self.time = t;
            for ev in events {
                match ev {
                    Timed::Resume(p) => self.active.push_back(p),
                    Timed::Nba(ws) => self.nba.extend(ws),
                }
            }
        }
    }

    fn summary(&self) -> SimSummary {
        SimSummary {
            finished: self.finished.is_some(),
            exit_code: self.finished.unwrap_or(0),
            time: self.time,
        }
    }

    fn end_of_step(&mut self) {
        for (args, scope) in std::mem::take(&mut self.strobes) {
            let s = format_args(self, &args, &scope);
            self.out.extend_from_slice(s.as_bytes());
            self.out.push(b'\n');
        }
        if let Some((args, scope, last)) = self.monitor.take() {
            let now: Vec<Value> = args
                .iter()
                .filter(|a| !matches!(a.kind, EKind::Time))
                .map(|a| eval_self(self, a))
                .collect();
            let changed = last.as_ref() != Some(&now);
            if changed {
                let s = format_args(self, &args, &scope);
                self.out.extend_from_slice(s.as_bytes());
                self.out.push(b'\n');
            }
            self.monitor = Some((args, scope, Some(now)));
        }
    }

    // ---- writes and wake-ups ----

    fn resolve(&mut self, lv: &LValue, v: Value, out: &mut Vec<Write1>) {
        match lv {
            LValue::Whole(t) => {
                if let Some(sig) = self.target_sig(t) {
                    out.push(Write1 {
                        sig,
                        part: None,
                        value: v,
                    });
                }
            }
            LValue::Slice {
                target,
                index,
                map,
                width,
            } => {
                let Some(sig) = self.target_sig(target) else { return };
                let Some(i) = eval_index(self, index) else { return };
                out.push(Write1 {
                    sig,
                    part: Some((map.position(i), *width)),
                    value: v.resize(*width, false),
                });
            }
            LValue::Concat(parts) => {
                let mut lo = 0i64;
                for p in parts.iter().rev() {
                    let w = p.width(self.d);
                    let piece = v.slice(lo, w);
                    self.resolve(p, piece, out);
                    lo += w as i64;
                }
            }
        }
    }

    fn target_sig(&mut self, t: &Target) -> Option<SigId> {
        match t {
            Target::Sig(id) => Some(*id),
            Target::ArrayElem(a, idx) => {
                let info = &self.d.arrays[*a];
                let (first, lo, len) = (info.first, info.lo, info.len);
                let i = eval_index(self, idx)?;
                let off = i - lo;
                (off >= 0 && (off as usize) < len).then(|| first + off as usize)
            }
        }
    }

    fn apply(&mut self, w: &Write1) {
        let old = self.values[w.sig];
        let new = match w.part {
            None => w.value.resize(old.width, false),
            Some((pos, _)) => old.set_slice(pos, &w.value),
        };
        if !new.case_eq(&old) {
            self.values[w.sig] = new;
            self.notify(w.sig);
        }
    }

    fn notify(&mut self, sig: SigId) {
        if self.watchers[sig].is_empty() {
            return;
        }
        let list = std::mem::take(&mut self.watchers[sig]);
        let mut keep = Vec::with_capacity(list.len());
        for (p, gen) in list {
            if self.procs[p].gen != gen || self.procs[p].state != State::Waiting {
                continue;
            }
            if self.triggered(p) {
                let pr = &mut self.procs[p];
                pr.gen += 1;
                pr.state = State::Ready;
                self.active.push_back(p);
            } else {
                keep.push((p, gen));
            }
        }
        // watchers added while evaluating stay registered
        keep.append(&mut self.watchers[sig]);
        self.watchers[sig] = keep;
    }

    fn triggered(&mut self, p: usize) -> bool {
        let d = self.d;
        let at = self.procs[p].wait_at;
        match &d.processes[p].code[at] {
            Instr::WaitEvent(items) => {
                let mut hit = false;
                for (k, it) in items.iter().enumerate() {
                    let new = eval_self(self, &it.expr);
                    let old = self.procs[p].olds[k];
                    let fired = match it.edge {
                        Edge::Any => !new.case_eq(&old),
                        Edge::Pos => edge(&old, &new, true),
                        Edge::Neg => edge(&old, &new, false),
                    };
                    self.procs[p].olds[k] = new;
                    hit |= fired;
                }
                hit
            }
            Instr::WaitCond(c) => eval_self(self, c).truthy() == Some(true),
            _ => false,
        }
    }

    fn watch(&mut self, p: usize, exprs: &[&EExpr]) {
        let mut sigs = Vec::new();
        let mut arrays = Vec::new();
        for e in exprs {
            e.reads(&mut sigs);
            e.arrays_read(&mut arrays);
        }
        for a in arrays {
            let info = &self.d.arrays[a];
            sigs.extend(info.first..info.first + info.len);
        }
        sigs.sort_unstable();
        sigs.dedup();
        let gen = self.procs[p].gen;
        for s in sigs {
            self.watchers[s].push((p, gen));
        }
    }

    // ---- interpreter ----

    fn exec(&mut self, p: usize) -> Result<(), SimError> {
        let d = self.d;
        let code = &d.processes[p].code;
        if self.procs[p].state == State::Done {
            return Ok(());
        }
        self.procs[p].state = State::Ready;
        loop {
            self.steps += 1;
            if self.steps > self.opts.step_limit {
                return Err(SimError::ZeroDelayLoop {
                    time: self.time,
                    limit: self.opts.step_limit,
                });
            }
            let pc = self.procs[p].pc;
            match &code[pc] {
                Instr::Assign { lhs, rhs } => {
                    self.assign(lhs, rhs);
                    self.procs[p].pc += 1;
                }
                Instr::NbAssign { lhs, rhs, delay } => {
                    let w = lhs.width(d);
                    let v = eval_for_width(self, rhs, w);
                    let mut writes = Vec::new();
                    self.resolve(lhs, v, &mut writes);
                    match delay {
                        None => self.nba.extend(writes),
                        Some(dl) => {
                            let t = self.delay_amount(dl);
                            self.timed
                                .entry(self.time + t)
                                .or_default()
                                .push(Timed::Nba(writes));
                        }
                    }
                    self.procs[p].pc += 1;
                }
                Instr::Delay(dl) => {
                    let t = self.delay_amount(dl);
                    self.procs[p].pc += 1;
                    self.procs[p].state = State::Waiting;
                    if t == 0 {
                        self.procs[p].state = State::Ready;
                        self.inactive.push(p);
                    } else {
                        self.timed
                            .entry(self.time + t)
                            .or_default()
                            .push(Timed::Resume(p));
                    }
                    return Ok(());
                }
                Instr::WaitEvent(items) => {
                    let olds = items.iter().map(|it| eval_self(self, &it.expr)).collect();
                    let pr = &mut self.procs[p];
                    pr.olds = olds;
                    pr.state = State::Waiting;
                    pr.wait_at = pc;
                    pr.pc = pc + 1;
                    let exprs: Vec<&EExpr> = items.iter().map(|it| &it.expr).collect();
                    self.watch(p, &exprs);
                    return Ok(());
                }
                Instr::WaitCond(c) => {
                    if eval_self(self, c).truthy() == Some(true) {
                        self.procs[p].pc += 1;
                        continue;
                    }
                    self.procs[p].state = State::Waiting;
                    self.procs[p].wait_at = pc;
                    self.watch(p, &[c]);
                    return Ok(());
                }
                Instr::JumpIfNot(c, t) => {
                    if eval_self(self, c).truthy() == Some(true) {
                        self.procs[p].pc += 1;
                    } else {
                        self.procs[p].pc = *t;
                    }
                }
                Instr::Jump(t) => self.procs[p].pc = *t,
                Instr::Print {
                    kind,
                    args,
                    scope,
                    loc,
                } => {
                    self.print(*kind, args, scope, loc);
                    self.procs[p].pc += 1;
                }
                Instr::Finish { loc } => {
                    let code = if self.fatal { 1 } else { 0 };
                    let msg = format!("{loc}: $finish called at {} (1s)\n", self.time);
                    self.err.extend_from_slice(msg.as_bytes());
                    self.finished = Some(code);
                    return Ok(());
                }
                Instr::Halt => {
                    self.procs[p].state = State::Done;
                    return Ok(());
                }
            }
        }
    }

    fn delay_amount(&mut self, e: &EExpr) -> u64 {
        let v = eval_self(self, e);
        if !v.is_known() || (e.signed && v.sign_bit_set()) {
            0
        } else {
            v.bits
        }
    }

    fn assign(&mut self, lhs: &LValue, rhs: &EExpr) {
        let w = lhs.width(self.d);
        let v = eval_for_width(self, rhs, w);
        let mut writes = Vec::new();
        self.resolve(lhs, v, &mut writes);
        for wr in &writes {
            self.apply(wr);
        }
    }

    fn print(&mut self, kind: SysTaskKind, args: &[EExpr], scope: &str, loc: &str) {
        match kind {
            SysTaskKind::Monitor => {
                self.monitor = Some((args.to_vec(), scope.to_string(), None));
                return;
            }
            SysTaskKind::Strobe => {
                self.strobes.push((args.to_vec(), scope.to_string()));
                return;
            }
            _ => {}
        }
        let text = format_args(self, args, scope);
        let line = match kind {
            SysTaskKind::Display => format!("{text}\n"),
            SysTaskKind::Write => text,
            SysTaskKind::Error => format!("ERROR: {loc}: {text}\n       Time: {} Scope: {scope}\n", self.time),
            SysTaskKind::Warning => format!("WARNING: {loc}: {text}\n       Time: {} Scope: {scope}\n", self.time),
            SysTaskKind::Info => format!("INFO: {loc}: {text}\n       Time: {} Scope: {scope}\n", self.time),
            SysTaskKind::Fatal => {
                self.fatal = true;
                format!("FATAL: {loc}: {text}\n       Time: {} Scope: {scope}\n", self.time)
            }
            SysTaskKind::Monitor | SysTaskKind::Strobe => unreachable!(),
        };
        self.out.extend_from_slice(line.as_bytes());
    }

    fn next_random(&mut self) -> u32 {
        // 64-bit LCG; the high half has the better statistical quality
        self.rng = self
            .rng
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (self.rng >> 32) as u32
    }
}

fn edge(old: &Value, new: &Value, rising: bool) -> bool {
    let o = old.get_bit(0);
    let n = new.get_bit(0);
    let (o_known, n_known) = (o.is_known(), n.is_known());
    let (o1, n1) = (o.bits == 1, n.bits == 1);
    if rising {
        (o_known && !o1 && (!n_known || n1)) || (!o_known && n_known && n1)
    } else {
        (o_known && o1 && (!n_known || !n1)) || (!o_known && n_known && !n1)
    }
}

impl EvalCtx for Sim<'_> {
    fn sig(&mut self, id: SigId) -> Value {
        self.values[id]
    }

    fn array_elem(&mut self, arr: ArrayId, idx: Option<i64>) -> Value {
        let info = &self.d.arrays[arr];
        match idx {
            Some(i) if i >= info.lo && ((i - info.lo) as usize) < info.len => {
                self.values[info.first + (i - info.lo) as usize]
            }
            _ => Value::unknown(info.elem_width),
        }
    }

    fn call(&mut self, func: FuncId, args: &[EExpr]) -> Value {
        let d = self.d;
        let f = &d.functions[func];
        let ret_w = d.signals[f.ret].width;
        if self.call_depth >= MAX_CALL_DEPTH {
            return Value::unknown(ret_w);
        }
        let vals: Vec<Value> = args
            .iter()
            .zip(&f.args)
            .map(|(a, s)| eval_for_width(self, a, d.signals[*s].width))
            .collect();
        self.call_depth += 1;
        for (s, v) in f.args.iter().zip(vals) {
            self.values[*s] = v;
        }
        let mut pc = 0;
        let mut budget: u64 = 10_000_000;
        while budget > 0 {
            budget -= 1;
            match &f.code[pc] {
                Instr::Assign { lhs, rhs } => {
                    self.assign(lhs, rhs);
                    pc += 1;
                }
                Instr::JumpIfNot(c, t) => {
                    pc = if eval_self(self, c).truthy() == Some(true) {
                        pc + 1
                    } else {
                        *t
                    };
                }
                Instr::Jump(t) => pc = *t,
                Instr::Print {
                    kind,
                    args,
                    scope,
                    loc,
                } => {
                    self.print(*kind, args, scope, loc);
                    pc += 1;
                }
                Instr::Finish { .. } => {
                    self.finished.get_or_insert(0);
                    pc += 1;
                }
                _ => break,
            }
        }
        self.call_depth -= 1;
        self.values[f.ret]
    }

    fn time(&mut self) -> u64 {
        self.time
    }

    fn random(&mut self) -> u32 {
        self.next_random()
    }
}
