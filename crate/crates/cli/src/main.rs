use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cocostream_cli::render::render_report;
use cocostream_cli::{
    cmd_evaluate, cmd_merge, cmd_synth_bench, EvaluateArgs, MergeArgs, SynthBenchArgs,
};

#[derive(Parser)]
#[command(
    name = "cocostream",
    version,
    about = "Streaming COCO detection metrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a results file against ground truth
    Evaluate(EvaluateArgs),
    /// Sum streaming state snapshots from several shards
    Merge(MergeArgs),
    /// Streaming-vs-exact error study on synthetic predictions
    #[command(
        long_about = "Streaming-vs-exact error study on synthetic predictions.\n\n\
        Per-run CSV columns: metric,n_images,run_index,streaming_value,exact_value,abs_error \
        (abs_error is -1 when either value is undefined).\n\
        Summary CSV columns: metric,label,runs,min_error,max_error,mean_error,std_error."
    )]
    SynthBench(SynthBenchArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Evaluate(args) => {
            let out = cmd_evaluate(&args)?;
            if args.output.is_none() {
                print!("{out}");
            }
        }
        Command::Merge(args) => {
            let state = cmd_merge(&args)?;
            if let Some(format) = args.report {
                print!("{}", render_report(&state.finalize(), format));
            }
        }
        Command::SynthBench(args) => {
            let report = cmd_synth_bench(&args)?;
            if args.output.is_none() {
                print!("{}", report.rows_csv());
            }
            eprint!("{}", report.summary_table());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
