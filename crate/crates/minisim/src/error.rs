// SPDX-License-Identifier: Apache-2.0

use std::fmt;

/// A diagnostic produced while reading or elaborating sources. Rendered in
/// the `file:line: message` form most Verilog tools use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompileError {
    pub file: String,
    pub line: u32,
    pub message: String,
}

impl CompileError {
    pub fn new(file: &str, line: u32, message: impl Into<String>) -> Self {
        CompileError {
            file: file.to_string(),
            line,
            message: message.into(),
        }
    }
}

impl fmt::Display for CompileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.file, self.line, self.message)
    }
}

impl std::error::Error for CompileError {}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("zero-delay loop detected at time {time} (more than {limit} steps without time advancing)")]
    ZeroDelayLoop { time: u64, limit: u64 },
    #[error("simulation exceeded time limit {0}")]
    TimeLimit(u64),
    #[error("invalid design image: {0}")]
    Image(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}
