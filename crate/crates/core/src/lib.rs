// SPDX-License-Identifier: Apache-2.0

//! Testbench generation, verification and curation for Verilog corpora.
//!
//! See the guide in `book/` for the CLI and the data formats.

pub mod agents;
pub mod cli;
pub mod corpus;
pub mod distill;
pub mod evalrunner;
pub mod harness;
pub mod pipeline;

pub use agents::{AgentRole, Agents, ChatBackend, LiveBackend, Script, ScriptedBackend, TokenUsage};
pub use corpus::{ProblemRecord, SftRecord};
pub use distill::{DistillClass, RunStats, SftPolicy};
pub use evalrunner::{pass_at_k, EvalConfig, EvalReport};
pub use harness::{Classification, Harness, OutcomeKind, ToolConfig, Verifier, VerifyOutcome};
pub use pipeline::{PipelineConfig, PipelineVariant, Report, StageId, StageLedger};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/configuration.md")]
    mod configuration {}
    #[doc = include_str!("../../../book/src/scripts.md")]
    mod scripts {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/harness.md")]
    mod harness {}
    #[doc = include_str!("../../../book/src/distill.md")]
    mod distill {}
    #[doc = include_str!("../../../book/src/eval.md")]
    mod eval {}
}
