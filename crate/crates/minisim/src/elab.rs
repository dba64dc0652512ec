// SPDX-License-Identifier: Apache-2.0

//! Elaboration: resolve parameters, flatten the instance hierarchy and lower
//! procedural code to a small jump-based instruction set.

use std::collections::{HashMap, HashSet};

use crate::ast::*;
use crate::error::CompileError;
use crate::eval::{clog2, const_eval};
use crate::ir::*;
use crate::value::{Value, MAX_WIDTH};

const MAX_INSTANCE_DEPTH: usize = 64;
const MAX_TASK_INLINE_DEPTH: usize = 16;

#[derive(Clone)]
enum Binding {
    Sig(SigId, IndexMap),
    Array(ArrayId, IndexMap),
    Param(Value, bool),
    Func(FuncId),
    Task(usize),
}

#[derive(Clone)]
struct Scope {
    path: String,
    file: String,
    names: HashMap<String, Binding>,
    port_dirs: HashMap<String, Direction>,
}

struct TaskInfo {
    scope: Scope,
    ports: Vec<(Direction, SigId)>,
    body: Stmt,
}

pub struct Elaborator<'a> {
    modules: HashMap<&'a str, &'a Module>,
    design: Design,
    tasks: Vec<TaskInfo>,
    quiet: HashSet<SigId>,
    file: String,
    line: u32,
    tmp_counter: usize,
}

struct DeclInfo {
    dir: Option<Direction>,
    kind: Option<NetKind>,
    signed: bool,
    range: Option<(Expr, Expr)>,
    array: Option<(Expr, Expr)>,
    init: Option<Expr>,
    line: u32,
}

type EResult<T> = Result<T, CompileError>;

pub fn elaborate(modules: &[Module], top: Option<&str>) -> EResult<Design> {
    let mut by_name: HashMap<&str, &Module> = HashMap::new();
    for m in modules {
        if let Some(prev) = by_name.insert(m.name.as_str(), m) {
            return Err(CompileError::new(
                &m.file,
                m.line,
                format!(
                    "module '{}' already defined at {}:{}",
                    m.name, prev.file, prev.line
                ),
            ));
        }
    }
    let roots: Vec<&Module> = match top {
        Some(t) => match by_name.get(t) {
            Some(m) => vec![*m],
            None => {
                return Err(CompileError::new(
                    "<command line>",
                    0,
                    format!("unknown top module '{t}'"),
                ))
            }
        },
        None => {
            let mut used = HashSet::new();
            for m in modules {
                for it in &m.items {
                    if let Item::Instance(inst) = it {
                        used.insert(inst.module.as_str());
                    }
                }
            }
            modules
                .iter()
                .filter(|m| !used.contains(m.name.as_str()))
                .collect()
        }
    };
    if roots.is_empty() {
        return Err(CompileError::new(
            "<design>",
            0,
            "no top-level module found",
        ));
    }
    let mut el = Elaborator {
        modules: by_name,
        design: Design::default(),
        tasks: Vec::new(),
        quiet: HashSet::new(),
        file: String::new(),
        line: 0,
        tmp_counter: 0,
    };
    for r in roots {
        el.module(r, r.name.clone(), &[], 0)?;
    }
    Ok(el.design)
}

impl<'a> Elaborator<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> EResult<T> {
        Err(CompileError::new(&self.file, self.line, msg))
    }

    fn new_signal(&mut self, name: String, width: u32, signed: bool) -> SigId {
        self.design.signals.push(Signal {
            name,
            width,
            signed,
            init: None,
        });
        self.design.signals.len() - 1
    }

    fn tmp_signal(&mut self, scope: &Scope, width: u32, signed: bool) -> SigId {
        self.tmp_counter += 1;
        let name = format!("{}.$tmp{}", scope.path, self.tmp_counter);
        self.new_signal(name, width.clamp(1, MAX_WIDTH), signed)
    }

    fn const_int(&mut self, scope: &Scope, e: &Expr) -> EResult<i64> {
        let ee = self.expr(scope, e)?;
        match const_eval(&ee) {
            Some(v) if v.is_known() => Ok(if ee.signed { v.to_i64() } else { v.bits as i64 }),
            Some(_) => self.err("constant expression evaluates to x"),
            None => self.err("expression must be constant"),
        }
    }

    fn range_width(&mut self, scope: &Scope, r: &Option<(Expr, Expr)>) -> EResult<(u32, IndexMap)> {
        match r {
            None => Ok((1, IndexMap::IDENTITY)),
            Some((m, l)) => {
                let msb = self.const_int(scope, m)?;
                let lsb = self.const_int(scope, l)?;
                let width = (msb - lsb).unsigned_abs() + 1;
                if width > MAX_WIDTH as u64 {
                    return self.err(format!(
                        "unsupported: vectors wider than {MAX_WIDTH} bits"
                    ));
                }
                Ok((
                    width as u32,
                    IndexMap {
                        lsb,
                        descending: msb >= lsb,
                        offset: 0,
                    },
                ))
            }
        }
    }

    fn module(
        &mut self,
        m: &'a Module,
        path: String,
        overrides: &[(Option<String>, Value, bool)],
        depth: usize,
    ) -> EResult<Scope> {
        if depth > MAX_INSTANCE_DEPTH {
            return Err(CompileError::new(
                &m.file,
                m.line,
                "instance hierarchy too deep (recursive instantiation?)",
            ));
        }
        self.file = m.file.clone();
        self.line = m.line;
        let mut scope = Scope {
            path: path.clone(),
            file: m.file.clone(),
            names: HashMap::new(),
            port_dirs: HashMap::new(),
        };

        // parameters, in declaration order
        let mut positional = overrides.iter().filter(|o| o.0.is_none());
        let mut used_named = HashSet::new();
        for it in &m.items {
            if let Item::Param(p) = it {
                self.line = p.line;
                let over = if p.local {
                    None
                } else if let Some(o) = overrides
                    .iter()
                    .find(|o| o.0.as_deref() == Some(p.name.as_str()))
                {
                    used_named.insert(p.name.clone());
                    Some((o.1, o.2))
                } else {
                    positional.next().map(|o| (o.1, o.2))
                };
                let (v, signed) = match over {
                    Some(v) => v,
                    None => {
                        let e = self.expr(&scope, &p.value)?;
                        match const_eval(&e) {
                            Some(v) => (v, e.signed),
                            None => return self.err(format!("parameter '{}' is not constant", p.name)),
                        }
                    }
                };
                scope.names.insert(p.name.clone(), Binding::Param(v, signed));
            }
        }
        for o in overrides {
            if let Some(n) = &o.0 {
                if !used_named.contains(n) {
                    return self.err(format!("module '{}' has no parameter '{}'", m.name, n));
                }
            }
        }

        // declarations, merging direction-only and kind-only declarations
        let mut order: Vec<String> = Vec::new();
        let mut decls: HashMap<String, DeclInfo> = HashMap::new();
        for it in &m.items {
            let Item::Decl(d, _) = it else { continue };
            for n in &d.names {
                self.line = n.line;
                match decls.get_mut(&n.name) {
                    Some(prev) => {
                        let dup_dir = prev.dir.is_some() && d.dir.is_some();
                        let dup_kind = prev.kind.is_some() && d.kind.is_some();
                        if dup_dir || (dup_kind && prev.dir.is_none() == d.dir.is_none()) {
                            return self.err(format!("'{}' has already been declared", n.name));
                        }
                        prev.dir = prev.dir.or(d.dir);
                        prev.kind = prev.kind.or(d.kind);
                        prev.signed |= d.signed;
                        if prev.range.is_none() {
                            prev.range = d.range.clone();
                        }
                        if prev.init.is_none() {
                            prev.init = n.init.clone();
                        }
                    }
                    None => {
                        if scope.names.contains_key(&n.name) {
                            return self.err(format!("'{}' has already been declared", n.name));
                        }
                        order.push(n.name.clone());
                        decls.insert(
                            n.name.clone(),
                            DeclInfo {
                                dir: d.dir,
                                kind: d.kind,
                                signed: d.signed,
                                range: d.range.clone(),
                                array: n.array.clone(),
                                init: n.init.clone(),
                                line: n.line,
                            },
                        );
                    }
                }
            }
        }
        for p in &m.ports {
            match decls.get(p) {
                Some(d) if d.dir.is_some() => {}
                _ => {
                    self.line = m.line;
                    return self.err(format!("port '{p}' has no direction declaration"));
                }
            }
        }
        let mut wire_inits = Vec::new();
        for name in &order {
            let d = &decls[name];
            self.line = d.line;
            let full = format!("{path}.{name}");
            let (width, map, signed) = if d.kind == Some(NetKind::Integer) {
                (32, IndexMap::IDENTITY, true)
            } else {
                let (w, map) = self.range_width(&scope, &d.range)?;
                (w, map, d.signed)
            };
            if let Some(dir) = d.dir {
                scope.port_dirs.insert(name.clone(), dir);
            }
            if let Some((a, b)) = &d.array {
                let a = self.const_int(&scope, a)?;
                let b = self.const_int(&scope, b)?;
                let (lo, hi) = (a.min(b), a.max(b));
                let len = (hi - lo + 1) as usize;
                if len > 1 << 16 {
                    return self.err("unsupported: memories larger than 65536 entries");
                }
                let first = self.design.signals.len();
                for i in lo..=hi {
                    self.new_signal(format!("{full}[{i}]"), width, signed);
                }
                self.design.arrays.push(ArrayInfo {
                    name: full,
                    first,
                    lo,
                    len,
                    elem_width: width,
                });
                let id = self.design.arrays.len() - 1;
                scope.names.insert(name.clone(), Binding::Array(id, map));
                continue;
            }
            let id = self.new_signal(full, width, signed);
            scope.names.insert(name.clone(), Binding::Sig(id, map));
            if let Some(init) = &d.init {
                let is_var = matches!(d.kind, Some(NetKind::Reg) | Some(NetKind::Integer));
                if is_var {
                    let e = self.expr(&scope, init)?;
                    match const_eval(&e) {
                        Some(v) => {
                            self.design.signals[id].init =
                                Some(v.resize(width, e.signed));
                        }
                        None => return self.err("variable initializer must be constant"),
                    }
                } else {
                    wire_inits.push((id, init.clone(), d.line));
                }
            }
        }

        // implicit single-bit nets
        for it in &m.items {
            match it {
                Item::Instance(inst) => {
                    for (_, c) in &inst.conns {
                        if let Some(Expr::Ident(n)) = c {
                            self.implicit_net(&mut scope, n);
                        }
                    }
                }
                Item::Assign(Expr::Ident(n), _, _) => self.implicit_net(&mut scope, n),
                Item::Gate { terminals, .. } => {
                    for t in terminals {
                        if let Expr::Ident(n) = t {
                            self.implicit_net(&mut scope, n);
                        }
                    }
                }
                _ => {}
            }
        }

        // subroutines: allocate locals first so bodies can call each other
        let mut funcs = Vec::new();
        for it in &m.items {
            let Item::Subroutine(sub) = it else { continue };
            self.line = sub.line;
            if scope.names.contains_key(&sub.name) {
                return self.err(format!("'{}' has already been declared", sub.name));
            }
            let mut sub_scope = scope.clone();
            sub_scope.path = format!("{path}.{}", sub.name);
            let mut ret = None;
            if sub.is_function {
                let (w, map) = self.range_width(&scope, &sub.ret_range)?;
                let id = self.new_signal(sub_scope.path.clone(), w, sub.ret_signed);
                self.quiet.insert(id);
                sub_scope.names.insert(sub.name.clone(), Binding::Sig(id, map));
                ret = Some(id);
            }
            let mut local_ids = HashMap::new();
            for d in &sub.decls {
                for n in &d.names {
                    self.line = n.line;
                    if local_ids.contains_key(&n.name) {
                        continue;
                    }
                    let (w, map, signed) = if d.kind == Some(NetKind::Integer) {
                        (32, IndexMap::IDENTITY, true)
                    } else {
                        let (w, map) = self.range_width(&scope, &d.range)?;
                        (w, map, d.signed)
                    };
                    let id = self.new_signal(format!("{}.{}", sub_scope.path, n.name), w, signed);
                    if sub.is_function {
                        self.quiet.insert(id);
                    }
                    local_ids.insert(n.name.clone(), id);
                    sub_scope.names.insert(n.name.clone(), Binding::Sig(id, map));
                }
            }
            let mut ports = Vec::new();
            for (dir, pn) in &sub.ports {
                match local_ids.get(pn) {
                    Some(id) => ports.push((*dir, *id)),
                    None => return self.err(format!("argument '{pn}' is not declared")),
                }
            }
            if sub.is_function {
                self.design.functions.push(Function {
                    name: sub_scope.path.clone(),
                    code: Vec::new(),
                    ret: ret.unwrap_or(0),
                    args: ports.iter().map(|p| p.1).collect(),
                });
                let fid = self.design.functions.len() - 1;
                scope.names.insert(sub.name.clone(), Binding::Func(fid));
                funcs.push((fid, sub_scope, sub));
            } else {
                self.tasks.push(TaskInfo {
                    scope: sub_scope,
                    ports,
                    body: sub.body.clone(),
                });
                scope
                    .names
                    .insert(sub.name.clone(), Binding::Task(self.tasks.len() - 1));
            }
        }
        for (fid, mut sub_scope, sub) in funcs {
            // functions registered later are visible too
            for (k, v) in &scope.names {
                if matches!(v, Binding::Func(_) | Binding::Task(_)) {
                    sub_scope.names.entry(k.clone()).or_insert_with(|| v.clone());
                }
            }
            self.line = sub.line;
            let mut code = Vec::new();
            self.stmt(&sub_scope, &sub.body, &mut code, 0)?;
            code.push(Instr::Halt);
            if code.iter().any(|i| i.has_timing()) {
                self.line = sub.line;
                return self.err(format!(
                    "function '{}' contains timing controls or non-blocking assignments",
                    sub.name
                ));
            }
            self.design.functions[fid].code = code;
        }

        for (id, init, line) in wire_inits {
            self.line = line;
            let rhs = self.expr(&scope, &init)?;
            self.cont_assign(
                format!("{path}.assign@{line}"),
                LValue::Whole(Target::Sig(id)),
                rhs,
            );
        }

        for it in &m.items {
            match it {
                Item::Assign(lhs, rhs, line) => {
                    self.file = m.file.clone();
                    self.line = *line;
                    let lv = self.lvalue(&scope, lhs)?;
                    let e = self.expr(&scope, rhs)?;
                    self.cont_assign(format!("{path}.assign@{line}"), lv, e);
                }
                Item::Gate {
                    kind,
                    terminals,
                    line,
                } => {
                    self.line = *line;
                    self.gate(&scope, *kind, terminals)?;
                }
                Item::Initial(s) | Item::Always(s) => {
                    self.file = m.file.clone();
                    let is_always = matches!(it, Item::Always(_));
                    let mut code = Vec::new();
                    self.stmt(&scope, s, &mut code, 0)?;
                    if is_always {
                        if !code.iter().any(|i| i.has_timing()) {
                            self.line = stmt_line(s).unwrap_or(m.line);
                            return self.err("always statement does not have any delay or event control");
                        }
                        code.push(Instr::Jump(0));
                    } else {
                        code.push(Instr::Halt);
                    }
                    let kind = if is_always { "always" } else { "initial" };
                    self.design.processes.push(Process {
                        name: format!("{path}.{kind}"),
                        code,
                    });
                }
                Item::Instance(inst) => {
                    self.instance(&scope, inst, depth)?;
                    self.file = m.file.clone();
                }
                Item::Decl(..) | Item::Param(_) | Item::Subroutine(_) => {}
            }
        }
        Ok(scope)
    }

    fn implicit_net(&mut self, scope: &mut Scope, name: &str) {
        if !scope.names.contains_key(name) {
            let id = self.new_signal(format!("{}.{name}", scope.path), 1, false);
            scope
                .names
                .insert(name.to_string(), Binding::Sig(id, IndexMap::IDENTITY));
        }
    }

    fn cont_assign(&mut self, name: String, lhs: LValue, rhs: EExpr) {
        let mut code = vec![Instr::Assign { lhs, rhs }];
        let reads = self.code_reads(&code);
        if reads.is_empty() {
            code.push(Instr::Halt);
        } else {
            code.push(Instr::WaitEvent(
                reads
                    .into_iter()
                    .map(|id| EventItem {
                        edge: Edge::Any,
                        expr: self.sig_expr(id),
                    })
                    .collect(),
            ));
            code.push(Instr::Jump(0));
        }
        self.design.processes.push(Process { name, code });
    }

    fn sig_expr(&self, id: SigId) -> EExpr {
        let s = &self.design.signals[id];
        EExpr {
            kind: EKind::Sig(id),
            width: s.width,
            signed: s.signed,
        }
    }

    fn gate(&mut self, scope: &Scope, kind: GateKind, terms: &[Expr]) -> EResult<()> {
        let name = format!("{}.gate@{}", scope.path, self.line);
        match kind {
            GateKind::Not | GateKind::Buf => {
                let (outs, input) = terms.split_at(terms.len() - 1);
                let input = self.expr(scope, &input[0])?;
                for o in outs {
                    let lv = self.lvalue(scope, o)?;
                    let rhs = if kind == GateKind::Not {
                        EExpr {
                            width: input.width,
                            signed: false,
                            kind: EKind::Unary(UnaryOp::Not, Box::new(input.clone())),
                        }
                    } else {
                        input.clone()
                    };
                    self.cont_assign(name.clone(), lv, rhs);
                }
            }
            _ => {
                let lv = self.lvalue(scope, &terms[0])?;
                let (op, invert) = match kind {
                    GateKind::And => (BinaryOp::And, false),
                    GateKind::Nand => (BinaryOp::And, true),
                    GateKind::Or => (BinaryOp::Or, false),
                    GateKind::Nor => (BinaryOp::Or, true),
                    GateKind::Xor => (BinaryOp::Xor, false),
                    _ => (BinaryOp::Xor, true),
                };
                let mut acc = self.expr(scope, &terms[1])?;
                for t in &terms[2..] {
                    let rhs = self.expr(scope, t)?;
                    acc = EExpr {
                        width: acc.width.max(rhs.width),
                        signed: false,
                        kind: EKind::Binary(op, Box::new(acc), Box::new(rhs)),
                    };
                }
                if invert {
                    acc = EExpr {
                        width: acc.width,
                        signed: false,
                        kind: EKind::Unary(UnaryOp::Not, Box::new(acc)),
                    };
                }
                self.cont_assign(name, lv, acc);
            }
        }
        Ok(())
    }

    fn instance(&mut self, scope: &Scope, inst: &Instance, depth: usize) -> EResult<()> {
        self.line = inst.line;
        let Some(child) = self.modules.get(inst.module.as_str()).copied() else {
            return self.err(format!("unknown module type: {}", inst.module));
        };
        let mut overrides = Vec::new();
        for (n, e) in &inst.params {
            let ee = self.expr(scope, e)?;
            match const_eval(&ee) {
                Some(v) => overrides.push((n.clone(), v, ee.signed)),
                None => return self.err("parameter override must be constant"),
            }
        }
        let parent_file = self.file.clone();
        let child_scope = self.module(
            child,
            format!("{}.{}", scope.path, inst.name),
            &overrides,
            depth + 1,
        )?;
        self.file = parent_file;
        self.line = inst.line;
        let named = inst.conns.iter().any(|c| c.0.is_some());
        for (i, (pname, conn)) in inst.conns.iter().enumerate() {
            let port = match pname {
                Some(p) => p.clone(),
                None if named => return self.err("cannot mix named and positional port connections"),
                None => match child.ports.get(i) {
                    Some(p) => p.clone(),
                    None => {
                        return self.err(format!(
                            "too many port connections for module '{}'",
                            child.name
                        ))
                    }
                },
            };
            let Some(conn) = conn else { continue };
            let Some(dir) = child_scope.port_dirs.get(&port).copied() else {
                return self.err(format!("module '{}' has no port '{}'", child.name, port));
            };
            if !child.ports.contains(&port) {
                return self.err(format!("module '{}' has no port '{}'", child.name, port));
            }
            let Some(Binding::Sig(cid, _)) = child_scope.names.get(&port).cloned() else {
                return self.err(format!("port '{port}' is not a simple net"));
            };
            let name = format!("{}.{}.{}", scope.path, inst.name, port);
            match dir {
                Direction::Input => {
                    let e = self.expr(scope, conn)?;
                    self.cont_assign(name, LValue::Whole(Target::Sig(cid)), e);
                }
                Direction::Output | Direction::Inout => {
                    let lv = self.lvalue(scope, conn).map_err(|mut e| {
                        e.message = format!("output port '{port}' must connect to a net: {}", e.message);
                        e
                    })?;
                    let src = self.sig_expr(cid);
                    self.cont_assign(name, lv, src);
                }
            }
        }
        Ok(())
    }

    // ---- expressions ----

    fn lookup(&self, scope: &Scope, name: &str) -> EResult<Binding> {
        match scope.names.get(name) {
            Some(b) => Ok(b.clone()),
            None => self.err(format!(
                "Unable to bind wire/reg/memory `{name}' in `{}'",
                scope.path
            )),
        }
    }

    /// Elaborate `e` and, when it names something with a declared range,
    /// return that range's index mapping.
    fn selectable(&mut self, scope: &Scope, e: &Expr) -> EResult<(EExpr, IndexMap)> {
        match e {
            Expr::Ident(n) => match self.lookup(scope, n)? {
                Binding::Sig(id, map) => Ok((self.sig_expr(id), map)),
                Binding::Param(v, s) => Ok((EExpr::konst(v, s), IndexMap::IDENTITY)),
                Binding::Array(..) => self.err(format!("memory '{n}' needs an index")),
                _ => self.err(format!("'{n}' is not a value")),
            },
            Expr::Index(base, idx) => {
                if let Expr::Ident(n) = base.as_ref() {
                    if let Binding::Array(arr, map) = self.lookup(scope, n)? {
                        let i = self.expr(scope, idx)?;
                        let info = &self.design.arrays[arr];
                        let ee = EExpr {
                            width: info.elem_width,
                            signed: self.design.signals[info.first].signed,
                            kind: EKind::ArrayElem(arr, Box::new(i)),
                        };
                        return Ok((ee, map));
                    }
                }
                Ok((self.expr(scope, e)?, IndexMap::IDENTITY))
            }
            _ => Ok((self.expr(scope, e)?, IndexMap::IDENTITY)),
        }
    }

    fn slice_expr(&mut self, base: EExpr, index: EExpr, map: IndexMap, width: u32) -> EExpr {
        EExpr {
            width,
            signed: false,
            kind: EKind::Slice {
                base: Box::new(base),
                index: Box::new(index),
                map,
            },
        }
    }

    fn const_pos(&self, lo: i64) -> EExpr {
        EExpr::konst(Value::new(64, lo as u64), true)
    }

    fn part_select(
        &mut self,
        scope: &Scope,
        map: IndexMap,
        m: &Expr,
        l: &Expr,
    ) -> EResult<(i64, u32)> {
        let m = self.const_int(scope, m)?;
        let l = self.const_int(scope, l)?;
        let (pm, pl) = (map.position(m), map.position(l));
        let width = (pm - pl).unsigned_abs() + 1;
        if width > MAX_WIDTH as u64 {
            return self.err("part select too wide");
        }
        Ok((pm.min(pl), width as u32))
    }

    fn indexed_map(
        &mut self,
        scope: &Scope,
        map: IndexMap,
        width: &Expr,
        ascending: bool,
    ) -> EResult<(IndexMap, u32)> {
        let w = self.const_int(scope, width)?;
        if w < 1 || w > MAX_WIDTH as i64 {
            return self.err("indexed part-select width must be a positive constant");
        }
        let shift = -(w - 1);
        let offset = match (map.descending, ascending) {
            (true, true) | (false, false) => 0,
            _ => shift,
        };
        Ok((
            IndexMap {
                lsb: map.lsb,
                descending: map.descending,
                offset,
            },
            w as u32,
        ))
    }

    fn number(&self, text: &str) -> EResult<EExpr> {
        match parse_number(text) {
            Some((v, signed)) => Ok(EExpr::konst(v, signed)),
            None => self.err(format!("malformed or oversized number '{text}'")),
        }
    }

    fn expr(&mut self, scope: &Scope, e: &Expr) -> EResult<EExpr> {
        Ok(match e {
            Expr::Number(n) => self.number(n)?,
            Expr::Str(s) => EExpr {
                width: (8 * s.len() as u32).clamp(8, MAX_WIDTH),
                signed: false,
                kind: EKind::Str(s.clone()),
            },
            Expr::Ident(_) => self.selectable(scope, e)?.0,
            Expr::Index(base, idx) => {
                if let Expr::Ident(n) = base.as_ref() {
                    if matches!(self.lookup(scope, n)?, Binding::Array(..)) {
                        return Ok(self.selectable(scope, e)?.0);
                    }
                }
                let (b, map) = self.selectable(scope, base)?;
                let i = self.expr(scope, idx)?;
                self.slice_expr(b, i, map, 1)
            }
            Expr::Range(base, m, l) => {
                let (b, map) = self.selectable(scope, base)?;
                let (lo, w) = self.part_select(scope, map, m, l)?;
                let idx = self.const_pos(lo);
                self.slice_expr(b, idx, IndexMap::IDENTITY, w)
            }
            Expr::IndexedRange {
                base,
                start,
                width,
                ascending,
            } => {
                let (b, map) = self.selectable(scope, base)?;
                let (m2, w) = self.indexed_map(scope, map, width, *ascending)?;
                let s = self.expr(scope, start)?;
                self.slice_expr(b, s, m2, w)
            }
            Expr::Concat(parts) => {
                let parts = parts
                    .iter()
                    .map(|p| self.expr(scope, p))
                    .collect::<EResult<Vec<_>>>()?;
                let w: u32 = parts.iter().map(|p| p.width).sum();
                if w > MAX_WIDTH {
                    return self.err(format!("unsupported: concatenation wider than {MAX_WIDTH} bits"));
                }
                EExpr {
                    width: w,
                    signed: false,
                    kind: EKind::Concat(parts),
                }
            }
            Expr::Repeat(n, parts) => {
                let n = self.const_int(scope, n)?;
                let parts = parts
                    .iter()
                    .map(|p| self.expr(scope, p))
                    .collect::<EResult<Vec<_>>>()?;
                let one: u32 = parts.iter().map(|p| p.width).sum();
                let w = one as i64 * n;
                if n < 1 || w > MAX_WIDTH as i64 {
                    return self.err("replication count out of range");
                }
                EExpr {
                    width: w as u32,
                    signed: false,
                    kind: EKind::Repl(n as u32, parts),
                }
            }
            Expr::Unary(op, a) => {
                let a = self.expr(scope, a)?;
                let (width, signed) = match op {
                    UnaryOp::Plus | UnaryOp::Neg | UnaryOp::Not => (a.width, a.signed),
                    _ => (1, false),
                };
                fold(EExpr {
                    width,
                    signed,
                    kind: EKind::Unary(*op, Box::new(a)),
                })
            }
            Expr::Binary(op, a, b) => {
                let a = self.expr(scope, a)?;
                let b = self.expr(scope, b)?;
                use BinaryOp::*;
                let (width, signed) = match op {
                    Add | Sub | Mul | Div | Rem | And | Or | Xor | Xnor => {
                        (a.width.max(b.width), a.signed && b.signed)
                    }
                    Pow | Shl | Shr | AShl | AShr => (a.width, a.signed),
                    _ => (1, false),
                };
                fold(EExpr {
                    width,
                    signed,
                    kind: EKind::Binary(*op, Box::new(a), Box::new(b)),
                })
            }
            Expr::Ternary(c, t, f) => {
                let c = self.expr(scope, c)?;
                let t = self.expr(scope, t)?;
                let f = self.expr(scope, f)?;
                fold(EExpr {
                    width: t.width.max(f.width),
                    signed: t.signed && f.signed,
                    kind: EKind::Ternary(Box::new(c), Box::new(t), Box::new(f)),
                })
            }
            Expr::SysCall(name, args) => self.sys_call(scope, name, args)?,
            Expr::Call(name, args) => {
                let Binding::Func(fid) = self.lookup(scope, name)? else {
                    return self.err(format!("'{name}' is not a function"));
                };
                let f = &self.design.functions[fid];
                if f.args.len() != args.len() {
                    return self.err(format!(
                        "function '{name}' expects {} arguments, got {}",
                        f.args.len(),
                        args.len()
                    ));
                }
                let ret = &self.design.signals[f.ret];
                let (width, signed) = (ret.width, ret.signed);
                let args = args
                    .iter()
                    .map(|a| self.expr(scope, a))
                    .collect::<EResult<Vec<_>>>()?;
                EExpr {
                    width,
                    signed,
                    kind: EKind::Call(fid, args),
                }
            }
        })
    }

    fn sys_call(&mut self, scope: &Scope, name: &str, args: &[Expr]) -> EResult<EExpr> {
        let arg = |el: &mut Self, i: usize| -> EResult<EExpr> {
            match args.get(i) {
                Some(a) => el.expr(scope, a),
                None => el.err(format!("${name} needs an argument")),
            }
        };
        Ok(match name {
            "time" | "stime" | "realtime" => EExpr {
                width: 64,
                signed: false,
                kind: EKind::Time,
            },
            "random" | "urandom" => EExpr {
                width: 32,
                signed: name == "random",
                kind: EKind::Random,
            },
            "urandom_range" => {
                let hi = arg(self, 0)?;
                let lo = if args.len() > 1 {
                    arg(self, 1)?
                } else {
                    EExpr::konst(Value::new(32, 0), false)
                };
                let rnd = EExpr {
                    width: 32,
                    signed: false,
                    kind: EKind::Random,
                };
                let one = EExpr::konst(Value::new(32, 1), false);
                let span = bin(BinaryOp::Add, bin(BinaryOp::Sub, hi, lo.clone()), one);
                bin(BinaryOp::Add, bin(BinaryOp::Rem, rnd, span), lo)
            }
            "signed" | "unsigned" => {
                let a = arg(self, 0)?;
                fold(EExpr {
                    width: a.width,
                    signed: name == "signed",
                    kind: EKind::Cast(Box::new(a)),
                })
            }
            "clog2" => {
                let a = arg(self, 0)?;
                match const_eval(&a).and_then(|v| v.to_u64()) {
                    Some(n) => EExpr::konst(Value::new(32, clog2(n)), true),
                    None => EExpr {
                        width: 32,
                        signed: true,
                        kind: EKind::Clog2(Box::new(a)),
                    },
                }
            }
            "bits" => {
                let a = arg(self, 0)?;
                EExpr::konst(Value::new(32, a.width as u64), true)
            }
            _ => return self.err(format!("unsupported system function ${name}")),
        })
    }

    fn target_of(&mut self, scope: &Scope, e: &Expr) -> EResult<(Target, u32, IndexMap)> {
        match e {
            Expr::Ident(n) => match self.lookup(scope, n)? {
                Binding::Sig(id, map) => Ok((Target::Sig(id), self.design.signals[id].width, map)),
                Binding::Param(..) => self.err(format!("cannot assign to parameter '{n}'")),
                Binding::Array(..) => self.err(format!("memory '{n}' needs an index")),
                _ => self.err(format!("'{n}' is not assignable")),
            },
            Expr::Index(base, idx) => {
                let Expr::Ident(n) = base.as_ref() else {
                    return self.err("unsupported assignment target");
                };
                match self.lookup(scope, n)? {
                    Binding::Array(arr, map) => {
                        let i = self.expr(scope, idx)?;
                        let w = self.design.arrays[arr].elem_width;
                        Ok((Target::ArrayElem(arr, i), w, map))
                    }
                    _ => self.err("unsupported assignment target"),
                }
            }
            _ => self.err("unsupported assignment target"),
        }
    }

    fn is_array_ident(&self, scope: &Scope, e: &Expr) -> bool {
        matches!(e, Expr::Ident(n) if matches!(scope.names.get(n), Some(Binding::Array(..))))
    }

    fn lvalue(&mut self, scope: &Scope, e: &Expr) -> EResult<LValue> {
        Ok(match e {
            Expr::Ident(_) => LValue::Whole(self.target_of(scope, e)?.0),
            Expr::Index(base, idx) => {
                if self.is_array_ident(scope, base) {
                    LValue::Whole(self.target_of(scope, e)?.0)
                } else {
                    let (target, _, map) = self.target_of(scope, base)?;
                    let index = self.expr(scope, idx)?;
                    LValue::Slice {
                        target,
                        index,
                        map,
                        width: 1,
                    }
                }
            }
            Expr::Range(base, m, l) => {
                let (target, _, map) = self.target_of(scope, base)?;
                let (lo, width) = self.part_select(scope, map, m, l)?;
                LValue::Slice {
                    target,
                    index: self.const_pos(lo),
                    map: IndexMap::IDENTITY,
                    width,
                }
            }
            Expr::IndexedRange {
                base,
                start,
                width,
                ascending,
            } => {
                let (target, _, map) = self.target_of(scope, base)?;
                let (m2, w) = self.indexed_map(scope, map, width, *ascending)?;
                LValue::Slice {
                    target,
                    index: self.expr(scope, start)?,
                    map: m2,
                    width: w,
                }
            }
            Expr::Concat(parts) => LValue::Concat(
                parts
                    .iter()
                    .map(|p| self.lvalue(scope, p))
                    .collect::<EResult<Vec<_>>>()?,
            ),
            _ => return self.err("expression is not a valid assignment target"),
        })
    }

    // ---- statements ----

    fn code_reads(&self, code: &[Instr]) -> Vec<SigId> {
        let mut exprs: Vec<&EExpr> = Vec::new();
        let mut idx_reads = Vec::new();
        for i in code {
            match i {
                Instr::Assign { lhs, rhs } | Instr::NbAssign { lhs, rhs, .. } => {
                    exprs.push(rhs);
                    lhs.index_reads(&mut idx_reads);
                }
                Instr::JumpIfNot(c, _) | Instr::WaitCond(c) | Instr::Delay(c) => exprs.push(c),
                Instr::Print { args, .. } => exprs.extend(args.iter()),
                Instr::WaitEvent(items) => exprs.extend(items.iter().map(|it| &it.expr)),
                _ => {}
            }
        }
        let mut out = idx_reads;
        let mut arrays = Vec::new();
        let mut funcs = Vec::new();
        for e in exprs {
            e.reads(&mut out);
            e.arrays_read(&mut arrays);
            e.calls(&mut funcs);
        }
        let mut seen_funcs = HashSet::new();
        while let Some(f) = funcs.pop() {
            if !seen_funcs.insert(f) {
                continue;
            }
            let code = &self.design.functions[f].code;
            for i in code {
                let es: Vec<&EExpr> = match i {
                    Instr::Assign { lhs, rhs } => {
                        lhs.index_reads(&mut out);
                        vec![rhs]
                    }
                    Instr::JumpIfNot(c, _) => vec![c],
                    Instr::Print { args, .. } => args.iter().collect(),
                    _ => vec![],
                };
                for e in es {
                    e.reads(&mut out);
                    e.arrays_read(&mut arrays);
                    e.calls(&mut funcs);
                }
            }
        }
        for a in arrays {
            let info = &self.design.arrays[a];
            out.extend(info.first..info.first + info.len);
        }
        let mut seen = HashSet::new();
        out.retain(|id| !self.quiet.contains(id) && seen.insert(*id));
        out
    }

    fn stmt(&mut self, scope: &Scope, s: &Stmt, code: &mut Vec<Instr>, depth: usize) -> EResult<()> {
        if let Some(l) = stmt_line(s) {
            self.line = l;
        }
        match s {
            Stmt::Null => {}
            Stmt::Block(body) => {
                for st in body {
                    self.stmt(scope, st, code, depth)?;
                }
            }
            Stmt::Blocking { lhs, delay, rhs, .. } => {
                let lv = self.lvalue(scope, lhs)?;
                let e = self.expr(scope, rhs)?;
                match delay {
                    None => code.push(Instr::Assign { lhs: lv, rhs: e }),
                    Some(d) => {
                        let w = lv.width(&self.design);
                        let tmp = self.tmp_signal(scope, w, e.signed);
                        code.push(Instr::Assign {
                            lhs: LValue::Whole(Target::Sig(tmp)),
                            rhs: e,
                        });
                        let d = self.expr(scope, d)?;
                        code.push(Instr::Delay(d));
                        let src = self.sig_expr(tmp);
                        code.push(Instr::Assign { lhs: lv, rhs: src });
                    }
                }
            }
            Stmt::NonBlocking { lhs, delay, rhs, .. } => {
                let lv = self.lvalue(scope, lhs)?;
                let e = self.expr(scope, rhs)?;
                let delay = match delay {
                    Some(d) => Some(self.expr(scope, d)?),
                    None => None,
                };
                code.push(Instr::NbAssign {
                    lhs: lv,
                    rhs: e,
                    delay,
                });
            }
            Stmt::If(c, t, e) => {
                let c = self.expr(scope, c)?;
                let jf = code.len();
                code.push(Instr::JumpIfNot(c, 0));
                self.stmt(scope, t, code, depth)?;
                match e {
                    None => {
                        let end = code.len();
                        patch(code, jf, end);
                    }
                    Some(e) => {
                        let jend = code.len();
                        code.push(Instr::Jump(0));
                        let else_at = code.len();
                        patch(code, jf, else_at);
                        self.stmt(scope, e, code, depth)?;
                        let end = code.len();
                        patch(code, jend, end);
                    }
                }
            }
            Stmt::Case {
                kind,
                subject,
                arms,
                default,
            } => {
                let subj = self.expr(scope, subject)?;
                let tmp = self.tmp_signal(scope, subj.width, subj.signed);
                code.push(Instr::Assign {
                    lhs: LValue::Whole(Target::Sig(tmp)),
                    rhs: subj,
                });
                let tmp_e = self.sig_expr(tmp);
                let mut to_end = Vec::new();
                for (labels, body) in arms {
                    let mut cond: Option<EExpr> = None;
                    for l in labels {
                        let le = self.expr(scope, l)?;
                        let m = match kind {
                            CaseKind::Case => EExpr {
                                width: 1,
                                signed: false,
                                kind: EKind::Binary(
                                    BinaryOp::CaseEq,
                                    Box::new(tmp_e.clone()),
                                    Box::new(le),
                                ),
                            },
                            _ => EExpr {
                                width: 1,
                                signed: false,
                                kind: EKind::Wildcard {
                                    subject: Box::new(tmp_e.clone()),
                                    pattern: Box::new(le),
                                    both: *kind == CaseKind::CaseX,
                                },
                            },
                        };
                        cond = Some(match cond {
                            None => m,
                            Some(c) => bin(BinaryOp::LogOr, c, m),
                        });
                    }
                    let Some(cond) = cond else { continue };
                    let jf = code.len();
                    code.push(Instr::JumpIfNot(cond, 0));
                    self.stmt(scope, body, code, depth)?;
                    to_end.push(code.len());
                    code.push(Instr::Jump(0));
                    let next = code.len();
                    patch(code, jf, next);
                }
                if let Some(d) = default {
                    self.stmt(scope, d, code, depth)?;
                }
                let end = code.len();
                for j in to_end {
                    patch(code, j, end);
                }
            }
            Stmt::For {
                init,
                cond,
                step,
                body,
            } => {
                self.stmt(scope, init, code, depth)?;
                let top = code.len();
                let c = self.expr(scope, cond)?;
                code.push(Instr::JumpIfNot(c, 0));
                self.stmt(scope, body, code, depth)?;
                self.stmt(scope, step, code, depth)?;
                code.push(Instr::Jump(top));
                let end = code.len();
                patch(code, top, end);
            }
            Stmt::While(cond, body) => {
                let top = code.len();
                let c = self.expr(scope, cond)?;
                code.push(Instr::JumpIfNot(c, 0));
                self.stmt(scope, body, code, depth)?;
                code.push(Instr::Jump(top));
                let end = code.len();
                patch(code, top, end);
            }
            Stmt::Repeat(count, body) => {
                let n = self.expr(scope, count)?;
                let cnt = self.tmp_signal(scope, 64, true);
                code.push(Instr::Assign {
                    lhs: LValue::Whole(Target::Sig(cnt)),
                    rhs: n,
                });
                let cnt_e = self.sig_expr(cnt);
                let zero = EExpr::konst(Value::new(64, 0), true);
                let top = code.len();
                code.push(Instr::JumpIfNot(bin(BinaryOp::Gt, cnt_e.clone(), zero), 0));
                self.stmt(scope, body, code, depth)?;
                let one = EExpr::konst(Value::new(64, 1), true);
                code.push(Instr::Assign {
                    lhs: LValue::Whole(Target::Sig(cnt)),
                    rhs: bin(BinaryOp::Sub, cnt_e, one),
                });
                code.push(Instr::Jump(top));
                let end = code.len();
                patch(code, top, end);
            }
            Stmt::Forever(body) => {
                let top = code.len();
                self.stmt(scope, body, code, depth)?;
                code.push(Instr::Jump(top));
            }
            Stmt::Delay(d, body) => {
                let d = self.expr(scope, d)?;
                code.push(Instr::Delay(d));
                self.stmt(scope, body, code, depth)?;
            }
            Stmt::Event(ctl, body) => match ctl {
                EventControl::List(items) => {
                    let mut ev = Vec::new();
                    for (edge, e) in items {
                        let e = self.expr(scope, e)?;
                        ev.push(EventItem { edge: *edge, expr: e });
                    }
                    code.push(Instr::WaitEvent(ev));
                    self.stmt(scope, body, code, depth)?;
                }
                EventControl::Star => {
                    let at = code.len();
                    code.push(Instr::Halt);
                    self.stmt(scope, body, code, depth)?;
                    let reads = self.code_reads(&code[at + 1..]);
                    let items: Vec<EventItem> = reads
                        .into_iter()
                        .map(|id| EventItem {
                            edge: Edge::Any,
                            expr: self.sig_expr(id),
                        })
                        .collect();
                    if items.is_empty() {
                        return self.err("@* block reads no signals");
                    }
                    code[at] = Instr::WaitEvent(items);
                }
            },
            Stmt::Wait(c, body) => {
                let c = self.expr(scope, c)?;
                code.push(Instr::WaitCond(c));
                self.stmt(scope, body, code, depth)?;
            }
            Stmt::SysTask { name, args, line } => {
                self.line = *line;
                self.sys_task(scope, name, args, *line, code)?;
            }
            Stmt::TaskCall { name, args, line } => {
                self.line = *line;
                let Binding::Task(tid) = self.lookup(scope, name)? else {
                    return self.err(format!("'{name}' is not a task"));
                };
                if depth >= MAX_TASK_INLINE_DEPTH {
                    return self.err(format!("task '{name}' nested too deeply (recursive task?)"));
                }
                let ports = self.tasks[tid].ports.clone();
                if ports.len() != args.len() {
                    return self.err(format!(
                        "task '{name}' expects {} arguments, got {}",
                        ports.len(),
                        args.len()
                    ));
                }
                for ((dir, sid), a) in ports.iter().zip(args) {
                    if matches!(dir, Direction::Input | Direction::Inout) {
                        let e = self.expr(scope, a)?;
                        code.push(Instr::Assign {
                            lhs: LValue::Whole(Target::Sig(*sid)),
                            rhs: e,
                        });
                    }
                }
                let task_scope = self.tasks[tid].scope.clone();
                let body = self.tasks[tid].body.clone();
                let caller_file = self.file.clone();
                self.stmt(&task_scope, &body, code, depth + 1)?;
                self.file = caller_file;
                self.line = *line;
                for ((dir, sid), a) in ports.iter().zip(args) {
                    if matches!(dir, Direction::Output | Direction::Inout) {
                        let lv = self.lvalue(scope, a)?;
                        let src = self.sig_expr(*sid);
                        code.push(Instr::Assign { lhs: lv, rhs: src });
                    }
                }
            }
        }
        Ok(())
    }

    fn sys_task(
        &mut self,
        scope: &Scope,
        name: &str,
        args: &[Expr],
        line: u32,
        code: &mut Vec<Instr>,
    ) -> EResult<()> {
        let loc = format!("{}:{}", scope.file, line);
        let kind = match name {
            "display" | "displayb" | "displayh" | "displayo" => Some(SysTaskKind::Display),
            "write" => Some(SysTaskKind::Write),
            "monitor" => Some(SysTaskKind::Monitor),
            "strobe" => Some(SysTaskKind::Strobe),
            "error" => Some(SysTaskKind::Error),
            "warning" => Some(SysTaskKind::Warning),
            "info" => Some(SysTaskKind::Info),
            "fatal" => Some(SysTaskKind::Fatal),
            "finish" | "stop" => {
                code.push(Instr::Finish { loc });
                return Ok(());
            }
            "dumpfile" | "dumpvars" | "dumpon" | "dumpoff" | "dumpall" | "dumpflush"
            | "timeformat" | "printtimescale" | "fflush" | "monitoron" | "monitoroff" => None,
            _ => return self.err(format!("unsupported system task ${name}")),
        };
        let Some(kind) = kind else { return Ok(()) };
        let mut rest = args;
        if kind == SysTaskKind::Fatal {
            if let Some(Expr::Number(_)) = rest.first() {
                rest = &rest[1..];
            }
        }
        let args = rest
            .iter()
            .map(|a| self.expr(scope, a))
            .collect::<EResult<Vec<_>>>()?;
        code.push(Instr::Print {
            kind,
            args,
            scope: scope.path.clone(),
            loc: loc.clone(),
        });
        if kind == SysTaskKind::Fatal {
            code.push(Instr::Finish { loc });
        }
        Ok(())
    }
}

fn stmt_line(s: &Stmt) -> Option<u32> {
    match s {
        Stmt::Blocking { line, .. }
        | Stmt::NonBlocking { line, .. }
        | Stmt::SysTask { line, .. }
        | Stmt::TaskCall { line, .. } => Some(*line),
        Stmt::Block(b) => b.iter().find_map(stmt_line),
        Stmt::Event(_, b) | Stmt::Delay(_, b) => stmt_line(b),
        _ => None,
    }
}

fn patch(code: &mut [Instr], at: usize, target: usize) {
    match &mut code[at] {
        Instr::JumpIfNot(_, t) | Instr::Jump(t) => *t = target,
        _ => unreachable!("patching a non-jump instruction"),
    }
}

fn bin(op: BinaryOp, a: EExpr, b: EExpr) -> EExpr {
    use BinaryOp::*;
    let (width, signed) = match op {
        Add | Sub | Mul | Div | Rem | And | Or | Xor | Xnor => (a.width.max(b.width), a.signed && b.signed),
        Pow | Shl | Shr | AShl | AShr => (a.width, a.signed),
        _ => (1, false),
    };
    EExpr {
        width,
        signed,
        kind: EKind::Binary(op, Box::new(a), Box::new(b)),
    }
}

/// Replace constant subtrees by their value.
fn fold(e: EExpr) -> EExpr {
    if e.is_const() {
        return e;
    }
    match const_eval(&e) {
        Some(v) => EExpr::konst(v, e.signed),
        None => e,
    }
}

/// Decode a lexed literal into a value and its signedness.
pub fn parse_number(text: &str) -> Option<(Value, bool)> {
    let Some(q) = text.find('\'') else {
        let v: u64 = text.parse().ok()?;
        let width = if v > u32::MAX as u64 { 64 } else { 32 };
        return Some((Value::new(width, v), true));
    };
    let (size, rest) = text.split_at(q);
    let mut rest = &rest[1..];
    let signed = rest.starts_with('s');
    if signed {
        rest = &rest[1..];
    }
    let base = rest.chars().next()?;
    let digits = &rest[1..];
    let size: Option<u32> = if size.is_empty() {
        None
    } else {
        Some(size.parse().ok()?)
    };
    if let Some(s) = size {
        if s == 0 || s > MAX_WIDTH {
            return None;
        }
    }
    let (bits_per, radix) = match base {
        'b' => (1, 2),
        'o' => (3, 8),
        'h' => (4, 16),
        'd' => (0, 10),
        _ => return None,
    };
    let mut bits: u64 = 0;
    let mut xmask: u64 = 0;
    let mut nbits: u32 = 0;
    if bits_per == 0 {
        if digits.chars().all(|c| matches!(c, 'x' | 'z' | '?')) {
            let w = size.unwrap_or(32);
            return Some((Value::unknown(w), signed));
        }
        let v = u64::from_str_radix(digits, radix).ok()?;
        let w = size.unwrap_or(if v > u32::MAX as u64 { 64 } else { 32 });
        return Some((Value::new(w, v), signed));
    }
    for c in digits.chars() {
        nbits += bits_per;
        if nbits > 64 + bits_per {
            return None;
        }
        bits = bits.checked_shl(bits_per).unwrap_or(0);
        xmask = xmask.checked_shl(bits_per).unwrap_or(0);
        match c {
            'x' | 'z' | '?' => xmask |= (1 << bits_per) - 1,
            _ => bits |= c.to_digit(radix)? as u64,
        }
    }
    let width = size.unwrap_or(nbits.clamp(32, 64));
    let mut v = Value::with_x(width, bits, xmask);
    // a leading x/z digit extends through the upper bits
    if width > nbits && nbits > 0 && (xmask >> (nbits - 1)) & 1 == 1 {
        let ext = crate::value::mask(width) & !crate::value::mask(nbits);
        v = Value::with_x(width, bits, xmask | ext);
    }
    Some((v, signed))
}
