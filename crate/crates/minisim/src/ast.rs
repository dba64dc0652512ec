// SPDX-License-Identifier: Apache-2.0

//! Parse tree for the supported Verilog subset.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Plus,
    Neg,
    Not,
    LogNot,
    RedAnd,
    RedOr,
    RedXor,
    RedNand,
    RedNor,
    RedXnor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Pow,
    And,
    Or,
    Xor,
    Xnor,
    Shl,
    Shr,
    AShl,
    AShr,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    CaseEq,
    CaseNe,
    LogAnd,
    LogOr,
}

#[derive(Debug, Clone)]
pub enum Expr {
    /// Literal text as lexed; decoded during elaboration.
    Number(String),
    Str(String),
    Ident(String),
    Index(Box<Expr>, Box<Expr>),
    Range(Box<Expr>, Box<Expr>, Box<Expr>),
    IndexedRange {
        base: Box<Expr>,
        start: Box<Expr>,
        width: Box<Expr>,
        ascending: bool,
    },
    Concat(Vec<Expr>),
    Repeat(Box<Expr>, Vec<Expr>),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Ternary(Box<Expr>, Box<Expr>, Box<Expr>),
    SysCall(String, Vec<Expr>),
    Call(String, Vec<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    Any,
    Pos,
    Neg,
}

#[derive(Debug, Clone)]
pub enum EventControl {
    Star,
    List(Vec<(Edge, Expr)>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseKind {
    Case,
    CaseZ,
    CaseX,
}

#[derive(Debug, Clone)]
pub enum Stmt {
    Null,
    Block(Vec<Stmt>),
    Blocking {
        lhs: Expr,
        delay: Option<Expr>,
        rhs: Expr,
        line: u32,
    },
    NonBlocking {
        lhs: Expr,
        delay: Option<Expr>,
        rhs: Expr,
        line: u32,
    },
    If(Expr, Box<Stmt>, Option<Box<Stmt>>),
    Case {
        kind: CaseKind,
        subject: Expr,
        arms: Vec<(Vec<Expr>, Stmt)>,
        default: Option<Box<Stmt>>,
    },
    For {
        init: Box<Stmt>,
        cond: Expr,
        step: Box<Stmt>,
        body: Box<Stmt>,
    },
    While(Expr, Box<Stmt>),
    Repeat(Expr, Box<Stmt>),
    Forever(Box<Stmt>),
    Delay(Expr, Box<Stmt>),
    Event(EventControl, Box<Stmt>),
    Wait(Expr, Box<Stmt>),
    SysTask {
        name: String,
        args: Vec<Expr>,
        line: u32,
    },
    TaskCall {
        name: String,
        args: Vec<Expr>,
        line: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Input,
    Output,
    Inout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetKind {
    Wire,
    Reg,
    Integer,
}

#[derive(Debug, Clone)]
pub struct Declarator {
    pub name: String,
    pub array: Option<(Expr, Expr)>,
    pub init: Option<Expr>,
    pub line: u32,
}

#[derive(Debug, Clone)]
pub struct Decl {
    pub dir: Option<Direction>,
    /// `None` for a bare `input`/`output` whose net kind comes from a later
    /// declaration or defaults to wire.
    pub kind: Option<NetKind>,
    pub signed: bool,
    pub range: Option<(Expr, Expr)>,
    pub names: Vec<Declarator>,
}

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub value: Expr,
    pub local: bool,
    pub line: u32,
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub module: String,
    pub name: String,
    pub params: Vec<(Option<String>, Expr)>,
    pub conns: Vec<(Option<String>, Option<Expr>)>,
    pub line: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateKind {
    And,
    Or,
    Xor,
    Nand,
    Nor,
    Xnor,
    Not,
    Buf,
}

#[derive(Debug, Clone)]
pub struct Subroutine {
    pub name: String,
    pub is_function: bool,
    pub ret_range: Option<(Expr, Expr)>,
    pub ret_signed: bool,
    /// Arguments in call order.
    pub ports: Vec<(Direction, String)>,
    pub decls: Vec<Decl>,
    pub body: Stmt,
    pub line: u32,
}

#[derive(Debug, Clone)]
pub enum Item {
    Decl(Decl, u32),
    Param(Param),
    Assign(Expr, Expr, u32),
    Initial(Stmt),
    Always(Stmt),
    Instance(Instance),
    Gate {
        kind: GateKind,
        terminals: Vec<Expr>,
        line: u32,
    },
    Subroutine(Subroutine),
}

#[derive(Debug, Clone)]
pub struct Module {
    pub name: String,
    pub file: String,
    pub line: u32,
    pub ports: Vec<String>,
    pub items: Vec<Item>,
}
