// SPDX-License-Identifier: Apache-2.0

//! Flattened design produced by elaboration and consumed by the scheduler.

use crate::ast::{BinaryOp, Edge, UnaryOp};
use crate::value::Value;

pub type SigId = usize;
pub type ArrayId = usize;
pub type FuncId = usize;

#[derive(Debug, Clone)]
pub struct Signal {
    pub name: String,
    pub width: u32,
    pub signed: bool,
    pub init: Option<Value>,
}

#[derive(Debug, Clone)]
pub struct ArrayInfo {
    pub name: String,
    pub first: SigId,
    pub lo: i64,
    pub len: usize,
    pub elem_width: u32,
}

/// Maps a declared index onto a bit position: descending ranges (`[7:0]`)
/// count up from `lsb`, ascending ones (`[0:7]`) count down from it.
#[derive(Debug, Clone, Copy)]
pub struct IndexMap {
    pub lsb: i64,
    pub descending: bool,
    pub offset: i64,
}

impl IndexMap {
    pub const IDENTITY: IndexMap = IndexMap {
        lsb: 0,
        descending: true,
        offset: 0,
    };

    pub fn position(&self, idx: i64) -> i64 {
        let p = if self.descending {
            idx - self.lsb
        } else {
            self.lsb - idx
        };
        p + self.offset
    }
}

#[derive(Debug, Clone)]
pub enum EKind {
    Const(Value),
    Str(String),
    Sig(SigId),
    ArrayElem(ArrayId, Box<EExpr>),
    Slice {
        base: Box<EExpr>,
        index: Box<EExpr>,
        map: IndexMap,
    },
    Concat(Vec<EExpr>),
    Repl(u32, Vec<EExpr>),
    Unary(UnaryOp, Box<EExpr>),
    Binary(BinaryOp, Box<EExpr>, Box<EExpr>),
    Ternary(Box<EExpr>, Box<EExpr>, Box<EExpr>),
    Wildcard {
        subject: Box<EExpr>,
        pattern: Box<EExpr>,
        both: bool,
    },
    Cast(Box<EExpr>),
    Clog2(Box<EExpr>),
    Time,
    Random,
    Call(FuncId, Vec<EExpr>),
}

/// An elaborated expression annotated with its self-determined width and
/// signedness.
#[derive(Debug, Clone)]
pub struct EExpr {
    pub kind: EKind,
    pub width: u32,
    pub signed: bool,
}

impl EExpr {
    pub fn konst(v: Value, signed: bool) -> Self {
        EExpr {
            width: v.width,
            kind: EKind::Const(v),
            signed,
        }
    }

    pub fn is_const(&self) -> bool {
        matches!(self.kind, EKind::Const(_))
    }

    /// Signals read when evaluating this expression, excluding reads that
    /// happen inside called functions.
    pub fn reads(&self, out: &mut Vec<SigId>) {
        match &self.kind {
            EKind::Const(_) | EKind::Str(_) | EKind::Time | EKind::Random => {}
            EKind::Sig(id) => out.push(*id),
            EKind::ArrayElem(_, idx) => idx.reads(out),
            EKind::Slice { base, index, .. } => {
                base.reads(out);
                index.reads(out);
            }
            EKind::Concat(parts) | EKind::Repl(_, parts) | EKind::Call(_, parts) => {
                parts.iter().for_each(|p| p.reads(out))
            }
            EKind::Unary(_, a) | EKind::Cast(a) | EKind::Clog2(a) => a.reads(out),
            EKind::Binary(_, a, b) => {
                a.reads(out);
                b.reads(out);
            }
            EKind::Wildcard {
                subject, pattern, ..
            } => {
                subject.reads(out);
                pattern.reads(out);
            }
            EKind::Ternary(c, t, f) => {
                c.reads(out);
                t.reads(out);
                f.reads(out);
            }
        }
    }

    pub fn arrays_read(&self, out: &mut Vec<ArrayId>) {
        match &self.kind {
            EKind::ArrayElem(a, idx) => {
                out.push(*a);
                idx.arrays_read(out);
            }
            EKind::Slice { base, index, .. } => {
                base.arrays_read(out);
                index.arrays_read(out);
            }
            EKind::Concat(parts) | EKind::Repl(_, parts) | EKind::Call(_, parts) => {
                parts.iter().for_each(|p| p.arrays_read(out))
            }
            EKind::Unary(_, a) | EKind::Cast(a) | EKind::Clog2(a) => a.arrays_read(out),
            EKind::Binary(_, a, b) => {
                a.arrays_read(out);
                b.arrays_read(out);
            }
            EKind::Wildcard {
                subject, pattern, ..
            } => {
                subject.arrays_read(out);
                pattern.arrays_read(out);
            }
            EKind::Ternary(c, t, f) => {
                c.arrays_read(out);
                t.arrays_read(out);
                f.arrays_read(out);
            }
            _ => {}
        }
    }

    pub fn calls(&self, out: &mut Vec<FuncId>) {
        match &self.kind {
            EKind::Call(f, args) => {
                out.push(*f);
                args.iter().for_each(|a| a.calls(out));
            }
            EKind::ArrayElem(_, a) | EKind::Unary(_, a) | EKind::Cast(a) | EKind::Clog2(a) => {
                a.calls(out)
            }
            EKind::Slice { base, index, .. } => {
                base.calls(out);
                index.calls(out);
            }
            EKind::Concat(parts) | EKind::Repl(_, parts) => parts.iter().for_each(|p| p.calls(out)),
            EKind::Binary(_, a, b)
            | EKind::Wildcard {
                subject: a,
                pattern: b,
                ..
            } => {
                a.calls(out);
                b.calls(out);
            }
            EKind::Ternary(c, t, f) => {
                c.calls(out);
                t.calls(out);
                f.calls(out);
            }
            _ => {}
        }
    }
}

#[derive(Debug, Clone)]
pub enum Target {
    Sig(SigId),
    ArrayElem(ArrayId, EExpr),
}

#[derive(Debug, Clone)]
pub enum LValue {
    Whole(Target),
    Slice {
        target: Target,
        index: EExpr,
        map: IndexMap,
        width: u32,
    },
    Concat(Vec<LValue>),
}

impl LValue {
    pub fn width(&self, design: &Design) -> u32 {
        match self {
            LValue::Whole(Target::Sig(id)) => design.signals[*id].width,
            LValue::Whole(Target::ArrayElem(a, _)) => design.arrays[*a].elem_width,
            LValue::Slice { width, .. } => *width,
            LValue::Concat(parts) => parts.iter().map(|p| p.width(design)).sum(),
        }
    }

    /// Expressions evaluated to locate the target (indices).
    pub fn index_reads(&self, out: &mut Vec<SigId>) {
        match self {
            LValue::Whole(Target::Sig(_)) => {}
            LValue::Whole(Target::ArrayElem(_, i)) => i.reads(out),
            LValue::Slice { target, index, .. } => {
                if let Target::ArrayElem(_, i) = target {
                    i.reads(out);
                }
                index.reads(out);
            }
            LValue::Concat(parts) => parts.iter().for_each(|p| p.index_reads(out)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EventItem {
    pub edge: Edge,
    pub expr: EExpr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SysTaskKind {
    Display,
    Write,
    Monitor,
    Strobe,
    Error,
    Warning,
    Info,
    Fatal,
}

#[derive(Debug, Clone)]
pub enum Instr {
    Assign { lhs: LValue, rhs: EExpr },
    NbAssign {
        lhs: LValue,
        rhs: EExpr,
        delay: Option<EExpr>,
    },
    Delay(EExpr),
    WaitEvent(Vec<EventItem>),
    WaitCond(EExpr),
    JumpIfNot(EExpr, usize),
    Jump(usize),
    Print {
        kind: SysTaskKind,
        args: Vec<EExpr>,
        scope: String,
        loc: String,
    },
    Finish { loc: String },
    Halt,
}

impl Instr {
    pub fn has_timing(&self) -> bool {
        matches!(
            self,
            Instr::Delay(_) | Instr::WaitEvent(_) | Instr::WaitCond(_) | Instr::NbAssign { .. }
        )
    }
}

#[derive(Debug, Clone)]
pub struct Process {
    pub name: String,
    pub code: Vec<Instr>,
}

#[derive(Debug, Clone)]
pub struct Function {
    pub name: String,
    pub code: Vec<Instr>,
    pub ret: SigId,
    pub args: Vec<SigId>,
}

#[derive(Debug, Clone, Default)]
pub struct Design {
    pub signals: Vec<Signal>,
    pub arrays: Vec<ArrayInfo>,
    pub processes: Vec<Process>,
    pub functions: Vec<Function>,
}
