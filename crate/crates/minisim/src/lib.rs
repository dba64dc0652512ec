// SPDX-License-Identifier: Apache-2.0

//! A compact Verilog-subset compiler and four-state event-driven simulator.
//!
//! The supported language covers what self-checking testbenches for small
//! RTL blocks typically use: modules with parameters, continuous and
//! procedural assignments, `always`/`initial` processes with delay and event
//! controls, tasks, functions, memories and the common system tasks. Vectors
//! are limited to 64 bits.
//!
//! Two front ends mirror the Icarus Verilog command pair: [`compile_main`]
//! (`minivlog -o image src.v ...`) checks and elaborates sources and writes a
//! design image; [`run_main`] (`minivvp image`) simulates it.
//!
//! ```
//! let src = r#"
//! module top;
//!   reg [3:0] a = 4'd9;
//!   initial begin
//!     $display("a=%0d", a + 1);
//!     $finish;
//!   end
//! endmodule
//! "#;
//! let design = minisim::compile_sources(&[("top.v".into(), src.into())], None).unwrap();
//! let mut out = Vec::new();
//! let summary = minisim::simulate(&design, &mut out, &mut std::io::sink()).unwrap();
//! assert!(summary.finished);
//! assert_eq!(String::from_utf8(out).unwrap(), "a=10\n");
//! ```

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

pub mod ast;
pub mod elab;
pub mod error;
pub mod eval;
pub mod format;
pub mod ir;
pub mod lexer;
pub mod parser;
pub mod sim;
pub mod value;

pub use error::{CompileError, SimError};
pub use ir::Design;
pub use sim::{Sim, SimOptions, SimSummary};
pub use value::Value;

/// Parse every source in order. Macros defined in one file remain visible
/// in later ones.
pub fn parse_sources(sources: &[(String, String)]) -> Result<Vec<ast::Module>, CompileError> {
    let mut macros = HashMap::new();
    let mut modules = Vec::new();
    for (name, text) in sources {
        let toks = lexer::tokenize(name, text, &mut macros)?;
        modules.extend(parser::Parser::new(name, toks).parse_file()?);
    }
    Ok(modules)
}

pub fn compile_sources(
    sources: &[(String, String)],
    top: Option<&str>,
) -> Result<Design, CompileError> {
    let modules = parse_sources(sources)?;
    elab::elaborate(&modules, top)
}

pub fn simulate(
    design: &Design,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<SimSummary, SimError> {
    Sim::new(design, SimOptions::default()).run(stdout, stderr)
}

/// What the compiler front end writes: the checked sources, re-elaborated by
/// the runtime.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Image {
    pub format: String,
    pub top: Option<String>,
    pub sources: Vec<(String, String)>,
}

pub const IMAGE_FORMAT: &str = "minisim-image-1";

/// `minivlog [-o OUT] [-s TOP] [-g...] [-W...] FILE...`; returns the exit
/// status.
pub fn compile_main(args: impl IntoIterator<Item = String>) -> i32 {
    let mut out = "a.out".to_string();
    let mut top = None;
    let mut files = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        match a.as_str() {
            "-o" | "-s" => {
                let Some(v) = it.next() else {
                    eprintln!("minivlog: option {a} needs an argument");
                    return 2;
                };
                if a == "-o" {
                    out = v;
                } else {
                    top = Some(v);
                }
            }
            _ if a.starts_with("-o") && a.len() > 2 => out = a[2..].to_string(),
            _ if a.starts_with("-s") && a.len() > 2 => top = Some(a[2..].to_string()),
            _ if a.starts_with("-g") || a.starts_with("-W") || a == "-v" => {}
            _ if a.starts_with('-') => {
                eprintln!("minivlog: unsupported option {a}");
                return 2;
            }
            _ => files.push(a),
        }
    }
    if files.is_empty() {
        eprintln!("minivlog: no source files");
        return 2;
    }
    let mut sources = Vec::new();
    for f in files {
        match std::fs::read_to_string(&f) {
            Ok(text) => sources.push((f, text)),
            Err(e) => {
                eprintln!("{f}: unable to open input file: {e}");
                return 1;
            }
        }
    }
    if let Err(e) = compile_sources(&sources, top.as_deref()) {
        eprintln!("{e}");
        eprintln!("1 error(s) during elaboration.");
        return 1;
    }
    let image = Image {
        format: IMAGE_FORMAT.to_string(),
        top,
        sources,
    };
    let json = serde_json::to_string(&image).expect("image serializes");
    if let Err(e) = std::fs::write(&out, json) {
        eprintln!("minivlog: cannot write {out}: {e}");
        return 1;
    }
    0
}

/// `minivvp IMAGE [+plusargs...]`; returns the exit status.
pub fn run_main(args: impl IntoIterator<Item = String>) -> i32 {
    let mut image_path = None;
    for a in args {
        if a.starts_with('+') || (a.starts_with('-') && image_path.is_none()) {
            continue;
        }
        if image_path.is_none() {
            image_path = Some(a);
        }
    }
    let Some(path) = image_path else {
        eprintln!("minivvp: no input file");
        return 2;
    };
    let image: Image = match std::fs::read_to_string(&path)
        .map_err(|e| e.to_string())
        .and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string()))
    {
        Ok(i) => i,
        Err(e) => {
            eprintln!("minivvp: {path}: not a valid image: {e}");
            return 2;
        }
    };
    if image.format != IMAGE_FORMAT {
        eprintln!("minivvp: {path}: unsupported image format '{}'", image.format);
        return 2;
    }
    let design = match compile_sources(&image.sources, image.top.as_deref()) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("minivvp: {e}");
            return 2;
        }
    };
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let mut so = stdout.lock();
    let mut se = stderr.lock();
    match simulate(&design, &mut so, &mut se) {
        Ok(s) => s.exit_code,
        Err(e) => {
            let _ = writeln!(se, "minivvp: {e}");
            2
        }
    }
}
