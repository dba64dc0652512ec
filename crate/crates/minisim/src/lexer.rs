// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;

use crate::error::CompileError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    System(String),
    /// Raw numeric literal text with underscores removed, e.g. `4'b10x1`.
    Number(String),
    Real(f64),
    Str(String),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
}

// Longest first so that maximal munch works with a linear scan.
const PUNCTS: &[&str] = &[
    "<<<", ">>>", "===", "!==", "**", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "~&", "~|",
    "~^", "^~", "+:", "-:", "(", ")", "[", "]", "{", "}", ";", ",", ".", ":", "?", "#", "@", "=",
    "<", ">", "!", "~", "&", "|", "^", "+", "-", "*", "/", "%",
];

pub struct Lexer<'a> {
    file: &'a str,
    src: Vec<char>,
    pos: usize,
    line: u32,
    macros: &'a mut HashMap<String, Vec<Token>>,
}

impl<'a> Lexer<'a> {
    pub fn new(file: &'a str, src: &str, macros: &'a mut HashMap<String, Vec<Token>>) -> Self {
        Lexer {
            file,
            src: src.chars().collect(),
            pos: 0,
            line: 1,
            macros,
        }
    }

    fn err(&self, msg: impl Into<String>) -> CompileError {
        CompileError::new(self.file, self.line, msg)
    }

    fn peek(&self) -> Option<char> {
        self.src.get(self.pos).copied()
    }

    fn peek_at(&self, off: usize) -> Option<char> {
        self.src.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.src.get(self.pos).copied();
        if let Some(c) = c {
            self.pos += 1;
            if c == '\n' {
                self.line += 1;
            }
        }
        c
    }

    fn rest_of_line(&mut self) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if c == '\n' {
                break;
            }
            // line continuation inside `define
            if c == '\\' && self.peek_at(1) == Some('\n') {
                self.bump();
                self.bump();
                s.push(' ');
                continue;
            }
            s.push(c);
            self.bump();
        }
        s
    }

    pub fn tokenize(mut self) -> Result<Vec<Token>, CompileError> {
        let mut out = Vec::new();
        loop {
            self.skip_ws_and_comments()?;
            let line = self.line;
            let Some(c) = self.peek() else {
                out.push(Token { tok: Tok::Eof, line });
                return Ok(out);
            };
            if c == '`' {
                self.bump();
                let name = self.ident_chars();
                self.directive(&name, &mut out)?;
                continue;
            }
            let tok = if c.is_ascii_alphabetic() || c == '_' {
                Tok::Ident(self.ident_chars())
            } else if c == '\\' {
                // escaped identifier runs to whitespace
                self.bump();
                let mut s = String::new();
                while let Some(c) = self.peek() {
                    if c.is_whitespace() {
                        break;
                    }
                    s.push(c);
                    self.bump();
                }
                Tok::Ident(s)
            } else if c == '$' {
                self.bump();
                Tok::System(self.ident_chars())
            } else if c.is_ascii_digit() || (c == '\'' && self.is_base_char(self.peek_at(1))) {
                self.number()?
            } else if c == '"' {
                Tok::Str(self.string()?)
            } else {
                let mut found = None;
                for p in PUNCTS {
                    if p.chars().enumerate().all(|(i, pc)| self.peek_at(i) == Some(pc)) {
                        found = Some(*p);
                        break;
                    }
                }
                match found {
                    Some(p) => {
                        for _ in 0..p.len() {
                            self.bump();
                        }
                        Tok::Punct(p)
                    }
                    None => return Err(self.err(format!("syntax error: unexpected character '{c}'"))),
                }
            };
            out.push(Token { tok, line });
        }
    }

    fn is_base_char(&self, c: Option<char>) -> bool {
        matches!(
            c,
            Some('b' | 'B' | 'o' | 'O' | 'd' | 'D' | 'h' | 'H' | 's' | 'S')
        )
    }

    fn ident_chars(&mut self) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == '_' || c == '$' {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        s
    }

    fn skip_ws_and_comments(&mut self) -> Result<(), CompileError> {
        loop {
            match (self.peek(), self.peek_at(1)) {
                (Some(c), _) if c.is_whitespace() => {
                    self.bump();
                }
                (Some('/'), Some('/')) => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                (Some('/'), Some('*')) => {
                    let start = self.line;
                    self.bump();
                    self.bump();
                    loop {
                        match (self.peek(), self.peek_at(1)) {
                            (Some('*'), Some('/')) => {
                                self.bump();
                                self.bump();
                                break;
                            }
                            (Some(_), _) => {
                                self.bump();
                            }
                            (None, _) => {
                                return Err(CompileError::new(
                                    self.file,
                                    start,
                                    "syntax error: unterminated block comment",
                                ))
                            }
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn number(&mut self) -> Result<Tok, CompileError> {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || c == '_' {
                if c != '_' {
                    s.push(c);
                }
                self.bump();
            } else {
                break;
            }
        }
        // real literal
        if self.peek() == Some('.') && self.peek_at(1).is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
            let mut frac = String::from(".");
            while let Some(c) = self.peek() {
                if c.is_ascii_digit() || c == '_' {
                    if c != '_' {
                        frac.push(c);
                    }
                    self.bump();
                } else {
                    break;
                }
            }
            let v: f64 = format!("{s}{frac}")
                .parse()
                .map_err(|_| self.err("syntax error: bad real literal"))?;
            return Ok(Tok::Real(v));
        }
        // allow whitespace between size and base: `4 'b1010`
        let save = (self.pos, self.line);
        while self.peek().is_some_and(|c| c == ' ' || c == '\t') {
            self.bump();
        }
        if self.peek() != Some('\'') {
            (self.pos, self.line) = save;
            return Ok(Tok::Number(s));
        }
        self.bump();
        s.push('\'');
        if matches!(self.peek(), Some('s' | 'S')) {
            self.bump();
            s.push('s');
        }
        match self.bump() {
            Some(b @ ('b' | 'B' | 'o' | 'O' | 'd' | 'D' | 'h' | 'H')) => s.push(b.to_ascii_lowercase()),
            _ => return Err(self.err("syntax error: malformed based number")),
        }
        while self.peek().is_some_and(|c| c == ' ' || c == '\t') {
            self.bump();
        }
        let mut digits = 0;
        while let Some(c) = self.peek() {
            if c.is_ascii_hexdigit() || matches!(c, 'x' | 'X' | 'z' | 'Z' | '?' | '_') {
                if c != '_' {
                    s.push(c.to_ascii_lowercase());
                    digits += 1;
                }
                self.bump();
            } else {
                break;
            }
        }
        if digits == 0 {
            return Err(self.err("syntax error: based number has no digits"));
        }
        Ok(Tok::Number(s))
    }

    fn string(&mut self) -> Result<String, CompileError> {
        self.bump();
        let mut s = String::new();
        loop {
            match self.bump() {
                None | Some('\n') => return Err(self.err("syntax error: unterminated string")),
                Some('"') => return Ok(s),
                Some('\\') => match self.bump() {
                    Some('n') => s.push('\n'),
                    Some('t') => s.push('\t'),
                    Some('\\') => s.push('\\'),
                    Some('"') => s.push('"'),
                    Some(c) => {
                        s.push('\\');
                        s.push(c);
                    }
                    None => return Err(self.err("syntax error: unterminated string")),
                },
                Some(c) => s.push(c),
            }
        }
    }

    fn directive(&mut self, name: &str, out: &mut Vec<Token>) -> Result<(), CompileError> {
        match name {
            "timescale" | "default_nettype" | "resetall" | "celldefine" | "endcelldefine" => {
                self.rest_of_line();
                Ok(())
            }
            "define" => {
                while self.peek().is_some_and(|c| c == ' ' || c == '\t') {
                    self.bump();
                }
                let macro_name = self.ident_chars();
                if macro_name.is_empty() {
                    return Err(self.err("syntax error: `define without a name"));
                }
                if self.peek() == Some('(') {
                    return Err(self.err("unsupported: macros with arguments"));
                }
                let line = self.line;
                let body = self.rest_of_line();
                let mut sub = HashMap::new();
                std::mem::swap(&mut sub, self.macros);
                let toks = Lexer::new(self.file, &body, &mut sub).tokenize();
                std::mem::swap(&mut sub, self.macros);
                let mut toks = toks?;
                toks.pop();
                for t in &mut toks {
                    t.line = line;
                }
                self.macros.insert(macro_name, toks);
                Ok(())
            }
            "undef" => {
                while self.peek().is_some_and(|c| c == ' ' || c == '\t') {
                    self.bump();
                }
                let macro_name = self.ident_chars();
                self.macros.remove(&macro_name);
                Ok(())
            }
            "include" | "ifdef" | "ifndef" | "else" | "elsif" | "endif" => {
                Err(self.err(format!("unsupported: compiler directive `{name}")))
            }
            _ => match self.macros.get(name) {
                Some(body) => {
                    let line = self.line;
                    out.extend(body.iter().cloned().map(|mut t| {
                        t.line = line;
                        t
                    }));
                    Ok(())
                }
                None => Err(self.err(format!("syntax error: undefined macro `{name}"))),
            },
        }
    }
}

pub fn tokenize(
    file: &str,
    src: &str,
    macros: &mut HashMap<String, Vec<Token>>,
) -> Result<Vec<Token>, CompileError> {
    Lexer::new(file, src, macros).tokenize()
}
