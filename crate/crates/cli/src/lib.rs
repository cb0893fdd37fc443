//! Command implementations behind the `cocostream` binary.
//!
//! Each `cmd_*` function takes its parsed argument struct, does all reading
//! and computation first, and only then writes output, so a failing command
//! leaves no partial files behind.

pub mod bench;
pub mod commands;
pub mod options;
pub mod render;

pub use bench::{run_synth_bench, BenchOptions, BenchReport, ErrorMarginRow, SummaryRow};
pub use commands::{
    cmd_evaluate, cmd_merge, cmd_synth_bench, EvaluateArgs, MergeArgs, Mode, SynthBenchArgs,
};
pub use options::GridArgs;
pub use render::Format;
