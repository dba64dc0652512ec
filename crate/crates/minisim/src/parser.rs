// SPDX-License-Identifier: Apache-2.0

use crate::ast::*;
use crate::error::CompileError;
use crate::lexer::{Tok, Token};

pub struct Parser<'a> {
    file: &'a str,
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, CompileError>;

const GATES: &[(&str, GateKind)] = &[
    ("and", GateKind::And),
    ("or", GateKind::Or),
    ("xor", GateKind::Xor),
    ("nand", GateKind::Nand),
    ("nor", GateKind::Nor),
    ("xnor", GateKind::Xnor),
    ("not", GateKind::Not),
    ("buf", GateKind::Buf),
];

impl<'a> Parser<'a> {
    pub fn new(file: &'a str, toks: Vec<Token>) -> Self {
        Parser { file, toks, pos: 0 }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, off: usize) -> &Tok {
        let i = (self.pos + off).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn line(&self) -> u32 {
        self.toks[self.pos].line
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn syntax_error<T>(&self, expected: &str) -> PResult<T> {
        let found = match self.peek() {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::System(s) => format!("'${s}'"),
            Tok::Number(s) => format!("number {s}"),
            Tok::Real(r) => format!("number {r}"),
            Tok::Str(_) => "string".to_string(),
            Tok::Punct(p) => format!("'{p}'"),
            Tok::Eof => "end of file".to_string(),
        };
        // a missing ';' is usually detected on the following line
        let line = if expected == "';'" && self.pos > 0 {
            self.toks[self.pos - 1].line
        } else {
            self.line()
        };
        Err(CompileError::new(
            self.file,
            line,
            format!("syntax error: expected {expected}, found {found}"),
        ))
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.syntax_error(&format!("'{p}'"))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_reserved(&s) => {
                self.advance();
                Ok(s)
            }
            _ => self.syntax_error("identifier"),
        }
    }

    pub fn parse_file(mut self) -> PResult<Vec<Module>> {
        let mut modules = Vec::new();
        loop {
            match self.peek() {
                Tok::Eof => return Ok(modules),
                Tok::Ident(s) if s == "module" || s == "macromodule" => {
                    modules.push(self.module()?);
                }
                _ => return self.syntax_error("'module'"),
            }
        }
    }

    fn module(&mut self) -> PResult<Module> {
        let line = self.line();
        self.advance();
        let name = self.ident()?;
        let mut items = Vec::new();
        let mut ports = Vec::new();
        if self.eat_punct("#") {
            self.expect_punct("(")?;
            loop {
                self.eat_kw("parameter");
                let local = false;
                self.param_type_prefix()?;
                let pline = self.line();
                let pname = self.ident()?;
                self.expect_punct("=")?;
                let value = self.expr()?;
                items.push(Item::Param(Param {
                    name: pname,
                    value,
                    local,
                    line: pline,
                }));
                if !self.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct(")")?;
        }
        if self.eat_punct("(") {
            if !self.is_punct(")") {
                if self.is_direction() {
                    self.ansi_ports(&mut ports, &mut items)?;
                } else {
                    loop {
                        ports.push(self.ident()?);
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                }
            }
            self.expect_punct(")")?;
        }
        self.expect_punct(";")?;
        while !self.is_kw("endmodule") {
            if matches!(self.peek(), Tok::Eof) {
                return self.syntax_error("'endmodule'");
            }
            self.module_item(&mut items)?;
        }
        self.advance();
        Ok(Module {
            name,
            file: self.file.to_string(),
            line,
            ports,
            items,
        })
    }

    fn is_direction(&self) -> bool {
        self.is_kw("input") || self.is_kw("output") || self.is_kw("inout")
    }

    fn direction(&mut self) -> Option<Direction> {
        if self.eat_kw("input") {
            Some(Direction::Input)
        } else if self.eat_kw("output") {
            Some(Direction::Output)
        } else if self.eat_kw("inout") {
            Some(Direction::Inout)
        } else {
            None
        }
    }

    fn net_kind(&mut self) -> Option<NetKind> {
        if self.eat_kw("wire") || self.eat_kw("tri") {
            Some(NetKind::Wire)
        } else if self.eat_kw("reg") || self.eat_kw("logic") || self.eat_kw("bit") {
            Some(NetKind::Reg)
        } else if self.eat_kw("integer") || self.eat_kw("int") {
            Some(NetKind::Integer)
        } else {
            None
        }
    }

    fn param_type_prefix(&mut self) -> PResult<()> {
        self.eat_kw("integer");
        self.eat_kw("signed");
        if self.is_punct("[") {
            self.range()?;
        }
        Ok(())
    }

    fn range(&mut self) -> PResult<(Expr, Expr)> {
        self.expect_punct("[")?;
        let msb = self.expr()?;
        self.expect_punct(":")?;
        let lsb = self.expr()?;
        self.expect_punct("]")?;
        Ok((msb, lsb))
    }

    fn opt_range(&mut self) -> PResult<Option<(Expr, Expr)>> {
        if self.is_punct("[") {
            Ok(Some(self.range()?))
        } else {
            Ok(None)
        }
    }

    fn ansi_ports(&mut self, ports: &mut Vec<String>, items: &mut Vec<Item>) -> PResult<()> {
        let mut dir = None;
        let mut kind = None;
        let mut signed = false;
        let mut range = None;
        loop {
            let line = self.line();
            if let Some(d) = self.direction() {
                dir = Some(d);
                kind = self.net_kind();
                signed = self.eat_kw("signed");
                range = self.opt_range()?;
            } else if dir.is_none() {
                return self.syntax_error("port direction");
            }
            let name = self.ident()?;
            ports.push(name.clone());
            items.push(Item::Decl(
                Decl {
                    dir,
                    kind,
                    signed,
                    range: range.clone(),
                    names: vec![Declarator {
                        name,
                        array: None,
                        init: None,
                        line,
                    }],
                },
                line,
            ));
            if !self.eat_punct(",") {
                return Ok(());
            }
        }
    }

    fn declarators(&mut self, allow_init: bool) -> PResult<Vec<Declarator>> {
        let mut names = Vec::new();
        loop {
            let line = self.line();
            let name = self.ident()?;
            let array = self.opt_range()?;
            let init = if allow_init && self.eat_punct("=") {
                Some(self.expr()?)
            } else {
                None
            };
            names.push(Declarator {
                name,
                array,
                init,
                line,
            });
            if !self.eat_punct(",") {
                return Ok(names);
            }
        }
    }

    fn decl(&mut self) -> PResult<Decl> {
        let dir = self.direction();
        let kind = self.net_kind();
        let signed = self.eat_kw("signed");
        let range = self.opt_range()?;
        let names = self.declarators(true)?;
        self.expect_punct(";")?;
        Ok(Decl {
            dir,
            kind,
            signed,
            range,
            names,
        })
    }

    fn module_item(&mut self, items: &mut Vec<Item>) -> PResult<()> {
        let line = self.line();
        let Tok::Ident(kw) = self.peek().clone() else {
            if self.eat_punct(";") {
                return Ok(());
            }
            return self.syntax_error("module item");
        };
        match kw.as_str() {
            "input" | "output" | "inout" | "wire" | "reg" | "logic" | "integer" | "int" | "tri"
            | "bit" => {
                let d = self.decl()?;
                items.push(Item::Decl(d, line));
            }
            "parameter" | "localparam" => {
                self.advance();
                let local = kw == "localparam";
                self.param_type_prefix()?;
                loop {
                    let pline = self.line();
                    let name = self.ident()?;
                    self.expect_punct("=")?;
                    let value = self.expr()?;
                    items.push(Item::Param(Param {
                        name,
                        value,
                        local,
                        line: pline,
                    }));
                    if !self.eat_punct(",") {
                        break;
                    }
                }
                self.expect_punct(";")?;
            }
            "assign" => {
                self.advance();
                if self.eat_punct("#") {
                    self.delay_value()?;
                }
                loop {
                    let aline = self.line();
                    let lhs = self.lvalue()?;
                    self.expect_punct("=")?;
                    let rhs = self.expr()?;
                    items.push(Item::Assign(lhs, rhs, aline));
                    if !self.eat_punct(",") {
                        break;
                    }
                }
                self.expect_punct(";")?;
            }
            "initial" => {
                self.advance();
                let s = self.stmt()?;
                items.push(Item::Initial(s));
            }
            "always" | "always_ff" | "always_latch" => {
                self.advance();
                let s = self.stmt()?;
                items.push(Item::Always(s));
            }
            "always_comb" => {
                self.advance();
                let s = self.stmt()?;
                items.push(Item::Always(Stmt::Event(EventControl::Star, Box::new(s))));
            }
            "function" | "task" => {
                let sub = self.subroutine(kw == "function")?;
                items.push(Item::Subroutine(sub));
            }
            "generate" | "genvar" | "specify" | "primitive" | "defparam" => {
                return Err(CompileError::new(
                    self.file,
                    line,
                    format!("unsupported: '{kw}' constructs"),
                ));
            }
            _ => {
                if let Some((_, g)) = GATES.iter().find(|(n, _)| *n == kw) {
                    self.advance();
                    self.gates(*g, items)?;
                } else if is_reserved(&kw) {
                    return self.syntax_error("module item");
                } else {
                    self.instances(items)?;
                }
            }
        }
        Ok(())
    }

    fn gates(&mut self, kind: GateKind, items: &mut Vec<Item>) -> PResult<()> {
        if self.eat_punct("#") {
            self.delay_value()?;
        }
        loop {
            let line = self.line();
            if matches!(self.peek(), Tok::Ident(_)) {
                self.ident()?;
            }
            self.expect_punct("(")?;
            let mut terminals = vec![self.expr()?];
            while self.eat_punct(",") {
                terminals.push(self.expr()?);
            }
            self.expect_punct(")")?;
            if terminals.len() < 2 {
                return Err(CompileError::new(
                    self.file,
                    line,
                    "gate needs an output and at least one input",
                ));
            }
            items.push(Item::Gate {
                kind,
                terminals,
                line,
            });
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(";")
    }

    fn instances(&mut self, items: &mut Vec<Item>) -> PResult<()> {
        let module = self.ident()?;
        let mut params = Vec::new();
        if self.eat_punct("#") {
            self.expect_punct("(")?;
            if !self.is_punct(")") {
                loop {
                    if self.eat_punct(".") {
                        let n = self.ident()?;
                        self.expect_punct("(")?;
                        let e = self.expr()?;
                        self.expect_punct(")")?;
                        params.push((Some(n), e));
                    } else {
                        params.push((None, self.expr()?));
                    }
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            }
            self.expect_punct(")")?;
        }
        loop {
            let line = self.line();
            let name = self.ident()?;
            self.expect_punct("(")?;
            let mut conns = Vec::new();
            if !self.is_punct(")") {
                loop {
                    if self.eat_punct(".") {
                        let port = self.ident()?;
                        let e = if self.eat_punct("(") {
                            let e = if self.is_punct(")") {
                                None
                            } else {
                                Some(self.expr()?)
                            };
                            self.expect_punct(")")?;
                            e
                        } else {
                            // `.name` shorthand
                            Some(Expr::Ident(port.clone()))
                        };
                        conns.push((Some(port), e));
                    } else if self.is_punct(",") {
                        conns.push((None, None));
                    } else {
                        conns.push((None, Some(self.expr()?)));
                    }
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            }
            self.expect_punct(")")?;
            items.push(Item::Instance(Instance {
                module: module.clone(),
                name,
                params: params.clone(),
                conns,
                line,
            }));
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(";")
    }

    fn subroutine(&mut self, is_function: bool) -> PResult<Subroutine> {
        let line = self.line();
        self.advance();
        self.eat_kw("automatic");
        let mut ret_signed = false;
        let mut ret_range = None;
        if is_function {
            if self.eat_kw("integer") || self.eat_kw("int") {
                ret_signed = true;
                ret_range = Some((Expr::Number("31".into()), Expr::Number("0".into())));
            } else {
                self.eat_kw("reg");
                self.eat_kw("logic");
                ret_signed = self.eat_kw("signed");
                ret_range = self.opt_range()?;
            }
        }
        let name = self.ident()?;
        let mut ports = Vec::new();
        let mut decls = Vec::new();
        if self.eat_punct("(") {
            if !self.is_punct(")") {
                let mut dir = Direction::Input;
                let mut kind = None;
                let mut signed = false;
                let mut range = None;
                loop {
                    let pline = self.line();
                    if let Some(d) = self.direction() {
                        dir = d;
                        kind = self.net_kind();
                        signed = self.eat_kw("signed");
                        range = self.opt_range()?;
                    }
                    let pname = self.ident()?;
                    ports.push((dir, pname.clone()));
                    decls.push(Decl {
                        dir: Some(dir),
                        kind,
                        signed,
                        range: range.clone(),
                        names: vec![Declarator {
                            name: pname,
                            array: None,
                            init: None,
                            line: pline,
                        }],
                    });
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            }
            self.expect_punct(")")?;
        }
        self.expect_punct(";")?;
        let end = if is_function { "endfunction" } else { "endtask" };
        let mut body = Vec::new();
        while !self.is_kw(end) {
            if matches!(self.peek(), Tok::Eof) {
                return self.syntax_error(&format!("'{end}'"));
            }
            let is_decl = self.is_direction()
                || ["reg", "logic", "integer", "int", "wire", "bit"]
                    .iter()
                    .any(|k| self.is_kw(k));
            if is_decl {
                let d = self.decl()?;
                if let Some(dir) = d.dir {
                    for n in &d.names {
                        ports.push((dir, n.name.clone()));
                    }
                }
                decls.push(d);
            } else if self.is_kw("parameter") || self.is_kw("localparam") {
                return self.syntax_error("statement (parameters inside subroutines are unsupported)");
            } else {
                body.push(self.stmt()?);
            }
        }
        self.advance();
        Ok(Subroutine {
            name,
            is_function,
            ret_range,
            ret_signed,
            ports,
            decls,
            body: Stmt::Block(body),
            line,
        })
    }

    fn delay_value(&mut self) -> PResult<Expr> {
        if self.eat_punct("(") {
            let e = self.expr()?;
            self.expect_punct(")")?;
            return Ok(e);
        }
        match self.peek().clone() {
            Tok::Number(n) => {
                self.advance();
                Ok(Expr::Number(n))
            }
            Tok::Real(r) => {
                self.advance();
                Ok(Expr::Number(format!("{}", r.round() as u64)))
            }
            Tok::Ident(_) => Ok(Expr::Ident(self.ident()?)),
            _ => self.syntax_error("delay value"),
        }
    }

    fn event_control(&mut self) -> PResult<EventControl> {
        if self.eat_punct("*") {
            return Ok(EventControl::Star);
        }
        if !self.eat_punct("(") {
            let id = self.ident()?;
            return Ok(EventControl::List(vec![(Edge::Any, Expr::Ident(id))]));
        }
        if self.eat_punct("*") {
            self.expect_punct(")")?;
            return Ok(EventControl::Star);
        }
        let mut list = Vec::new();
        loop {
            let edge = if self.eat_kw("posedge") {
                Edge::Pos
            } else if self.eat_kw("negedge") {
                Edge::Neg
            } else {
                Edge::Any
            };
            list.push((edge, self.expr()?));
            if !(self.eat_kw("or") || self.eat_punct(",")) {
                break;
            }
        }
        self.expect_punct(")")?;
        Ok(EventControl::List(list))
    }

    fn stmt_or_null(&mut self) -> PResult<Stmt> {
        if self.eat_punct(";") {
            Ok(Stmt::Null)
        } else {
            self.stmt()
        }
    }

    pub fn stmt(&mut self) -> PResult<Stmt> {
        let line = self.line();
        match self.peek().clone() {
            Tok::Punct(";") => {
                self.advance();
                Ok(Stmt::Null)
            }
            Tok::Punct("#") => {
                self.advance();
                let d = self.delay_value()?;
                let s = self.stmt_or_null()?;
                Ok(Stmt::Delay(d, Box::new(s)))
            }
            Tok::Punct("@") => {
                self.advance();
                let ev = self.event_control()?;
                let s = self.stmt_or_null()?;
                Ok(Stmt::Event(ev, Box::new(s)))
            }
            Tok::Punct("{") => self.assignment(line),
            Tok::System(name) => {
                self.advance();
                let mut args = Vec::new();
                if self.eat_punct("(") {
                    if !self.is_punct(")") {
                        loop {
                            if self.is_punct(",") {
                                // empty argument
                                args.push(Expr::Str(String::new()));
                            } else {
                                args.push(self.expr()?);
                            }
                            if !self.eat_punct(",") {
                                break;
                            }
                        }
                    }
                    self.expect_punct(")")?;
                }
                self.expect_punct(";")?;
                Ok(Stmt::SysTask { name, args, line })
            }
            Tok::Ident(kw) => match kw.as_str() {
                "begin" => {
                    self.advance();
                    if self.eat_punct(":") {
                        self.ident()?;
                    }
                    let mut body = Vec::new();
                    while !self.is_kw("end") {
                        if matches!(self.peek(), Tok::Eof) {
                            return self.syntax_error("'end'");
                        }
                        if self.is_kw("integer") || self.is_kw("reg") {
                            return Err(CompileError::new(
                                self.file,
                                self.line(),
                                "unsupported: declarations inside begin/end blocks",
                            ));
                        }
                        body.push(self.stmt()?);
                    }
                    self.advance();
                    if self.eat_punct(":") {
                        self.ident()?;
                    }
                    Ok(Stmt::Block(body))
                }
                "if" => {
                    self.advance();
                    self.expect_punct("(")?;
                    let c = self.expr()?;
                    self.expect_punct(")")?;
                    let t = self.stmt_or_null()?;
                    let e = if self.eat_kw("else") {
                        Some(Box::new(self.stmt_or_null()?))
                    } else {
                        None
                    };
                    Ok(Stmt::If(c, Box::new(t), e))
                }
                "case" | "casez" | "casex" => {
                    self.advance();
                    let kind = match kw.as_str() {
                        "case" => CaseKind::Case,
                        "casez" => CaseKind::CaseZ,
                        _ => CaseKind::CaseX,
                    };
                    self.expect_punct("(")?;
                    let subject = self.expr()?;
                    self.expect_punct(")")?;
                    let mut arms = Vec::new();
                    let mut default = None;
                    while !self.eat_kw("endcase") {
                        if matches!(self.peek(), Tok::Eof) {
                            return self.syntax_error("'endcase'");
                        }
                        if self.eat_kw("default") {
                            self.eat_punct(":");
                            default = Some(Box::new(self.stmt_or_null()?));
                            continue;
                        }
                        let mut labels = vec![self.expr()?];
                        while self.eat_punct(",") {
                            labels.push(self.expr()?);
                        }
                        self.expect_punct(":")?;
                        let s = self.stmt_or_null()?;
                        arms.push((labels, s));
                    }
                    Ok(Stmt::Case {
                        kind,
                        subject,
                        arms,
                        default,
                    })
                }
                "for" => {
                    self.advance();
                    self.expect_punct("(")?;
                    if self.is_kw("integer") || self.is_kw("int") {
                        return Err(CompileError::new(
                            self.file,
                            self.line(),
                            "unsupported: loop variable declaration in for header",
                        ));
                    }
                    let init = self.assignment_no_semi(line)?;
                    self.expect_punct(";")?;
                    let cond = self.expr()?;
                    self.expect_punct(";")?;
                    let step = self.assignment_no_semi(line)?;
                    self.expect_punct(")")?;
                    let body = self.stmt_or_null()?;
                    Ok(Stmt::For {
                        init: Box::new(init),
                        cond,
                        step: Box::new(step),
                        body: Box::new(body),
                    })
                }
                "while" => {
                    self.advance();
                    self.expect_punct("(")?;
                    let c = self.expr()?;
                    self.expect_punct(")")?;
                    let body = self.stmt_or_null()?;
                    Ok(Stmt::While(c, Box::new(body)))
                }
                "repeat" => {
                    self.advance();
                    self.expect_punct("(")?;
                    let c = self.expr()?;
                    self.expect_punct(")")?;
                    let body = self.stmt_or_null()?;
                    Ok(Stmt::Repeat(c, Box::new(body)))
                }
                "forever" => {
                    self.advance();
                    let body = self.stmt()?;
                    Ok(Stmt::Forever(Box::new(body)))
                }
                "wait" => {
                    self.advance();
                    self.expect_punct("(")?;
                    let c = self.expr()?;
                    self.expect_punct(")")?;
                    let body = self.stmt_or_null()?;
                    Ok(Stmt::Wait(c, Box::new(body)))
                }
                "fork" | "disable" | "assert" | "force" | "release" | "deassign" => Err(
                    CompileError::new(self.file, line, format!("unsupported: '{kw}' statements")),
                ),
                _ if is_reserved(&kw) => self.syntax_error("statement"),
                _ => {
                    if matches!(self.peek_at(1), Tok::Punct("(") | Tok::Punct(";")) {
                        let name = self.ident()?;
                        let mut args = Vec::new();
                        if self.eat_punct("(") {
                            if !self.is_punct(")") {
                                loop {
                                    args.push(self.expr()?);
                                    if !self.eat_punct(",") {
                                        break;
                                    }
                                }
                            }
                            self.expect_punct(")")?;
                        }
                        self.expect_punct(";")?;
                        Ok(Stmt::TaskCall { name, args, line })
                    } else {
                        self.assignment(line)
                    }
                }
            },
            _ => self.syntax_error("statement"),
        }
    }

    fn assignment(&mut self, line: u32) -> PResult<Stmt> {
        let s = self.assignment_no_semi(line)?;
        self.expect_punct(";")?;
        Ok(s)
    }

    fn assignment_no_semi(&mut self, line: u32) -> PResult<Stmt> {
        let lhs = self.lvalue()?;
        let blocking = if self.eat_punct("=") {
            true
        } else if self.eat_punct("<=") {
            false
        } else {
            return self.syntax_error("'=' or '<='");
        };
        let delay = if self.eat_punct("#") {
            Some(self.delay_value()?)
        } else {
            None
        };
        let rhs = self.expr()?;
        Ok(if blocking {
            Stmt::Blocking {
                lhs,
                delay,
                rhs,
                line,
            }
        } else {
            Stmt::NonBlocking {
                lhs,
                delay,
                rhs,
                line,
            }
        })
    }

    fn lvalue(&mut self) -> PResult<Expr> {
        if self.eat_punct("{") {
            let mut parts = vec![self.lvalue()?];
            while self.eat_punct(",") {
                parts.push(self.lvalue()?);
            }
            self.expect_punct("}")?;
            return Ok(Expr::Concat(parts));
        }
        let name = self.ident()?;
        self.selects(Expr::Ident(name))
    }

    fn selects(&mut self, mut base: Expr) -> PResult<Expr> {
        while self.eat_punct("[") {
            let first = self.expr()?;
            if self.eat_punct(":") {
                let second = self.expr()?;
                self.expect_punct("]")?;
                base = Expr::Range(Box::new(base), Box::new(first), Box::new(second));
            } else if self.is_punct("+:") || self.is_punct("-:") {
                let ascending = self.is_punct("+:");
                self.advance();
                let width = self.expr()?;
                self.expect_punct("]")?;
                base = Expr::IndexedRange {
                    base: Box::new(base),
                    start: Box::new(first),
                    width: Box::new(width),
                    ascending,
                };
            } else {
                self.expect_punct("]")?;
                base = Expr::Index(Box::new(base), Box::new(first));
            }
        }
        Ok(base)
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        let cond = self.binary(0)?;
        if self.eat_punct("?") {
            let t = self.expr()?;
            self.expect_punct(":")?;
            let e = self.expr()?;
            return Ok(Expr::Ternary(Box::new(cond), Box::new(t), Box::new(e)));
        }
        Ok(cond)
    }

    fn binop(&self) -> Option<(BinaryOp, u8)> {
        let Tok::Punct(p) = self.peek() else {
            return None;
        };
        Some(match *p {
            "||" => (BinaryOp::LogOr, 0),
            "&&" => (BinaryOp::LogAnd, 1),
            "|" => (BinaryOp::Or, 2),
            "^" => (BinaryOp::Xor, 3),
            "~^" | "^~" => (BinaryOp::Xnor, 3),
            "&" => (BinaryOp::And, 4),
            "==" => (BinaryOp::Eq, 5),
            "!=" => (BinaryOp::Ne, 5),
            "===" => (BinaryOp::CaseEq, 5),
            "!==" => (BinaryOp::CaseNe, 5),
            "<" => (BinaryOp::Lt, 6),
            "<=" => (BinaryOp::Le, 6),
            ">" => (BinaryOp::Gt, 6),
            ">=" => (BinaryOp::Ge, 6),
            "<<" => (BinaryOp::Shl, 7),
            ">>" => (BinaryOp::Shr, 7),
            "<<<" => (BinaryOp::AShl, 7),
            ">>>" => (BinaryOp::AShr, 7),
            "+" => (BinaryOp::Add, 8),
            "-" => (BinaryOp::Sub, 8),
            "*" => (BinaryOp::Mul, 9),
            "/" => (BinaryOp::Div, 9),
            "%" => (BinaryOp::Rem, 9),
            "**" => (BinaryOp::Pow, 10),
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some((op, prec)) = self.binop() {
            if prec < min_prec {
                break;
            }
            self.advance();
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let op = match self.peek() {
            Tok::Punct("+") => Some(UnaryOp::Plus),
            Tok::Punct("-") => Some(UnaryOp::Neg),
            Tok::Punct("~") => Some(UnaryOp::Not),
            Tok::Punct("!") => Some(UnaryOp::LogNot),
            Tok::Punct("&") => Some(UnaryOp::RedAnd),
            Tok::Punct("|") => Some(UnaryOp::RedOr),
            Tok::Punct("^") => Some(UnaryOp::RedXor),
            Tok::Punct("~&") => Some(UnaryOp::RedNand),
            Tok::Punct("~|") => Some(UnaryOp::RedNor),
            Tok::Punct("~^") | Tok::Punct("^~") => Some(UnaryOp::RedXnor),
            _ => None,
        };
        if let Some(op) = op {
            self.advance();
            let e = self.unary()?;
            return Ok(Expr::Unary(op, Box::new(e)));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Number(n) => {
                self.advance();
                Ok(Expr::Number(n))
            }
            Tok::Real(r) => {
                self.advance();
                Ok(Expr::Number(format!("{}", r.round() as i64)))
            }
            Tok::Str(s) => {
                self.advance();
                Ok(Expr::Str(s))
            }
            Tok::System(name) => {
                self.advance();
                let mut args = Vec::new();
                if self.eat_punct("(") {
                    if !self.is_punct(")") {
                        loop {
                            args.push(self.expr()?);
                            if !self.eat_punct(",") {
                                break;
                            }
                        }
                    }
                    self.expect_punct(")")?;
                }
                Ok(Expr::SysCall(name, args))
            }
            Tok::Punct("(") => {
                self.advance();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Punct("{") => {
                self.advance();
                let first = self.expr()?;
                if self.eat_punct("{") {
                    let mut parts = vec![self.expr()?];
                    while self.eat_punct(",") {
                        parts.push(self.expr()?);
                    }
                    self.expect_punct("}")?;
                    self.expect_punct("}")?;
                    return Ok(Expr::Repeat(Box::new(first), parts));
                }
                let mut parts = vec![first];
                while self.eat_punct(",") {
                    parts.push(self.expr()?);
                }
                self.expect_punct("}")?;
                Ok(Expr::Concat(parts))
            }
            Tok::Ident(_) => {
                let name = self.ident()?;
                if self.is_punct("(") {
                    self.advance();
                    let mut args = Vec::new();
                    if !self.is_punct(")") {
                        loop {
                            args.push(self.expr()?);
                            if !self.eat_punct(",") {
                                break;
                            }
                        }
                    }
                    self.expect_punct(")")?;
                    return Ok(Expr::Call(name, args));
                }
                self.selects(Expr::Ident(name))
            }
            _ => self.syntax_error("expression"),
        }
    }
}

pub fn is_reserved(s: &str) -> bool {
    matches!(
        s,
        "module"
            | "endmodule"
            | "input"
            | "output"
            | "inout"
            | "wire"
            | "reg"
            | "logic"
            | "integer"
            | "parameter"
            | "localparam"
            | "assign"
            | "always"
            | "always_ff"
            | "always_comb"
            | "always_latch"
            | "initial"
            | "begin"
            | "end"
            | "if"
            | "else"
            | "case"
            | "casez"
            | "casex"
            | "endcase"
            | "default"
            | "for"
            | "while"
            | "repeat"
            | "forever"
            | "function"
            | "endfunction"
            | "task"
            | "endtask"
            | "posedge"
            | "negedge"
            | "or"
            | "and"
            | "not"
            | "signed"
            | "wait"
            | "fork"
            | "join"
            | "generate"
            | "endgenerate"
            | "genvar"
    )
}
