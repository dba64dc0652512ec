// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use tbforge::harness::ToolConfig;

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

pub fn read_fixture(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

/// The bundled toolchain, working under `root`.
pub fn tools(root: &Path) -> ToolConfig {
    ToolConfig::new(env!("CARGO_BIN_EXE_minivlog"), env!("CARGO_BIN_EXE_minivvp")).with_workdir_root(root)
}

pub struct Adder {
    pub good: String,
    pub wrong: String,
    pub syntax: String,
    pub tb: String,
}

pub fn adder() -> Adder {
    Adder {
        good: read_fixture("adder/adder.v"),
        wrong: read_fixture("adder/adder_wrong.v"),
        syntax: read_fixture("adder/adder_syntax.v"),
        tb: read_fixture("adder/adder_tb.v"),
    }
}
