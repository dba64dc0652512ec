// SPDX-License-Identifier: Apache-2.0

//! Expression evaluation with Verilog's context-determined widths.

use std::cmp::Ordering;

use crate::ast::{BinaryOp, UnaryOp};
use crate::ir::{ArrayId, EExpr, EKind, FuncId, SigId};
use crate::value::{Value, MAX_WIDTH};

pub trait EvalCtx {
    fn sig(&mut self, id: SigId) -> Value;
    fn array_elem(&mut self, arr: ArrayId, idx: Option<i64>) -> Value;
    fn call(&mut self, func: FuncId, args: &[EExpr]) -> Value;
    fn time(&mut self) -> u64;
    fn random(&mut self) -> u32;
}

/// Evaluate `e` as the whole right-hand side of an assignment to a target of
/// `target_width` bits.
pub fn eval_for_width(ctx: &mut dyn EvalCtx, e: &EExpr, target_width: u32) -> Value {
    let w = e.width.max(target_width).min(MAX_WIDTH);
    eval(ctx, e, w, e.signed).resize(target_width, e.signed)
}

pub fn eval_self(ctx: &mut dyn EvalCtx, e: &EExpr) -> Value {
    eval(ctx, e, e.width, e.signed)
}

/// Evaluate an index-like operand as a signed integer; `None` if unknown.
pub fn eval_index(ctx: &mut dyn EvalCtx, e: &EExpr) -> Option<i64> {
    let v = eval_self(ctx, e);
    if !v.is_known() {
        return None;
    }
    Some(if e.signed { v.to_i64() } else { v.bits as i64 })
}

fn cmp_to_bit(ord: Option<Ordering>, f: impl FnOnce(Ordering) -> bool) -> Value {
    Value::from_opt_bool(ord.map(f))
}

/// `width` is the context width (at least `e.width` for context-determined
/// operators); `signed` is the expression type propagated from the parent.
pub fn eval(ctx: &mut dyn EvalCtx, e: &EExpr, width: u32, signed: bool) -> Value {
    let width = width.clamp(1, MAX_WIDTH);
    match &e.kind {
        EKind::Const(v) => v.resize(width, signed),
        EKind::Str(s) => {
            let mut bits = 0u64;
            for b in s.bytes().rev().take(8).collect::<Vec<_>>().into_iter().rev() {
                bits = (bits << 8) | b as u64;
            }
            Value::new(e.width, bits).resize(width, false)
        }
        EKind::Sig(id) => ctx.sig(*id).resize(width, signed),
        EKind::ArrayElem(arr, idx) => {
            let i = eval_index(ctx, idx);
            ctx.array_elem(*arr, i).resize(width, signed)
        }
        EKind::Slice { base, index, map } => {
            let b = eval_self(ctx, base);
            match eval_index(ctx, index) {
                Some(i) => b.slice(map.position(i), e.width),
                None => Value::unknown(e.width),
            }
            .resize(width, false)
        }
        EKind::Concat(parts) => concat(ctx, parts).resize(width, false),
        EKind::Repl(n, parts) => {
            let one = concat(ctx, parts);
            let mut out = Value::new(e.width, 0);
            for k in 0..*n {
                out = out.set_slice((k * one.width) as i64, &one);
            }
            out.resize(width, false)
        }
        EKind::Unary(op, a) => match op {
            UnaryOp::Plus => eval(ctx, a, width, signed),
            UnaryOp::Neg => eval(ctx, a, width, signed).neg(),
            UnaryOp::Not => eval(ctx, a, width, signed).not(),
            UnaryOp::LogNot => {
                let v = eval_self(ctx, a);
                Value::from_opt_bool(v.truthy().map(|b| !b)).resize(width, false)
            }
            UnaryOp::RedAnd => eval_self(ctx, a).reduce_and().resize(width, false),
            UnaryOp::RedOr => eval_self(ctx, a).reduce_or().resize(width, false),
            UnaryOp::RedXor => eval_self(ctx, a).reduce_xor().resize(width, false),
            UnaryOp::RedNand => eval_self(ctx, a).reduce_and().not().resize(width, false),
            UnaryOp::RedNor => eval_self(ctx, a).reduce_or().not().resize(width, false),
            UnaryOp::RedXnor => eval_self(ctx, a).reduce_xor().not().resize(width, false),
        },
        EKind::Binary(op, a, b) => binary(ctx, *op, a, b, width, signed),
        EKind::Ternary(c, t, f) => {
            let cv = eval_self(ctx, c);
            match cv.truthy() {
                Some(true) => eval(ctx, t, width, signed),
                Some(false) => eval(ctx, f, width, signed),
                None => {
                    let tv = eval(ctx, t, width, signed);
                    let fv = eval(ctx, f, width, signed);
                    tv.merge(&fv)
                }
            }
        }
        EKind::Wildcard {
            subject,
            pattern,
            both,
        } => {
            let w = subject.width.max(pattern.width);
            let s = eval(ctx, subject, w, false);
            let p = eval(ctx, pattern, w, false);
            Value::bit(s.wildcard_eq(&p, *both)).resize(width, false)
        }
        EKind::Cast(a) => eval_self(ctx, a).resize(width, signed),
        EKind::Clog2(a) => {
            let v = eval_self(ctx, a);
            match v.to_u64() {
                Some(n) => Value::new(32, clog2(n)).resize(width, false),
                None => Value::unknown(width),
            }
        }
        EKind::Time => Value::new(64, ctx.time()).resize(width, false),
        EKind::Random => Value::new(32, ctx.random() as u64).resize(width, signed),
        EKind::Call(f, args) => ctx.call(*f, args).resize(width, signed),
    }
}

pub fn clog2(n: u64) -> u64 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros() as u64
    }
}

fn concat(ctx: &mut dyn EvalCtx, parts: &[EExpr]) -> Value {
    let total: u32 = parts.iter().map(|p| p.width).sum::<u32>().clamp(1, MAX_WIDTH);
    let mut out = Value::new(total, 0);
    let mut pos = total as i64;
    for p in parts {
        let v = eval_self(ctx, p).resize(p.width, false);
        pos -= p.width as i64;
        out = out.set_slice(pos, &v);
    }
    out
}

fn binary(
    ctx: &mut dyn EvalCtx,
    op: BinaryOp,
    a: &EExpr,
    b: &EExpr,
    width: u32,
    signed: bool,
) -> Value {
    use BinaryOp::*;
    match op {
        Add | Sub | Mul | Div | Rem | And | Or | Xor | Xnor => {
            let x = eval(ctx, a, width, signed);
            let y = eval(ctx, b, width, signed);
            match op {
                Add => x.add(&y),
                Sub => x.sub(&y),
                Mul => x.mul(&y),
                Div => x.div(&y, signed),
                Rem => x.rem(&y, signed),
                And => x.and(&y),
                Or => x.or(&y),
                Xor => x.xor(&y),
                _ => x.xor(&y).not(),
            }
        }
        Pow => {
            let x = eval(ctx, a, width, signed);
            let y = eval_self(ctx, b);
            x.pow(&y)
        }
        Shl | AShl | Shr | AShr => {
            let x = eval(ctx, a, width, signed);
            let y = eval_self(ctx, b);
            match op {
                Shl | AShl => x.shl(&y),
                Shr => x.shr(&y),
                _ if signed => x.ashr(&y),
                _ => x.shr(&y),
            }
        }
        Lt | Le | Gt | Ge | Eq | Ne | CaseEq | CaseNe => {
            let w = a.width.max(b.width);
            let s = a.signed && b.signed;
            let x = eval(ctx, a, w, s);
            let y = eval(ctx, b, w, s);
            let bit = match op {
                Lt => cmp_to_bit(x.compare(&y, s), |o| o == Ordering::Less),
                Le => cmp_to_bit(x.compare(&y, s), |o| o != Ordering::Greater),
                Gt => cmp_to_bit(x.compare(&y, s), |o| o == Ordering::Greater),
                Ge => cmp_to_bit(x.compare(&y, s), |o| o != Ordering::Less),
                Eq => x.logic_eq(&y),
                Ne => x.logic_eq(&y).not(),
                CaseEq => Value::bit(x.case_eq(&y)),
                _ => Value::bit(!x.case_eq(&y)),
            };
            bit.resize(width, false)
        }
        LogAnd | LogOr => {
            let x = eval_self(ctx, a).truthy();
            let y = eval_self(ctx, b).truthy();
            let r = match (op, x, y) {
                (LogAnd, Some(false), _) | (LogAnd, _, Some(false)) => Some(false),
                (LogAnd, Some(true), Some(true)) => Some(true),
                (LogOr, Some(true), _) | (LogOr, _, Some(true)) => Some(true),
                (LogOr, Some(false), Some(false)) => Some(false),
                _ => None,
            };
            Value::from_opt_bool(r).resize(width, false)
        }
    }
}

/// Evaluator for elaboration-time constants. Any reference to simulation
/// state marks the result non-constant.
#[derive(Default)]
pub struct ConstCtx {
    pub non_const: bool,
}

impl EvalCtx for ConstCtx {
    fn sig(&mut self, _id: SigId) -> Value {
        self.non_const = true;
        Value::unknown(1)
    }
    fn array_elem(&mut self, _arr: ArrayId, _idx: Option<i64>) -> Value {
        self.non_const = true;
        Value::unknown(1)
    }
    fn call(&mut self, _func: FuncId, _args: &[EExpr]) -> Value {
        self.non_const = true;
        Value::unknown(1)
    }
    fn time(&mut self) -> u64 {
        self.non_const = true;
        0
    }
    fn random(&mut self) -> u32 {
        self.non_const = true;
        0
    }
}

pub fn const_eval(e: &EExpr) -> Option<Value> {
    let mut ctx = ConstCtx::default();
    let v = eval_self(&mut ctx, e);
    (!ctx.non_const).then_some(v)
}
