use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use cocostream::ingest::{load_detections, load_ground_truth};
use cocostream::{
    evaluate_exact, BucketedStateF64, DatasetF64, MetricReportF64, PerturbationParams,
    DEFAULT_BUCKETS,
};

use crate::bench::{run_synth_bench, BenchOptions, BenchReport};
use crate::options::{parse_list, GridArgs};
use crate::render::{render_report, Format};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Default)]
pub enum Mode {
    /// Bucketed counters: exact recall, approximate MaP
    #[default]
    Streaming,
    /// Global sort of every detection
    Exact,
}

#[derive(Args, Debug, Clone)]
pub struct EvaluateArgs {
    /// Ground-truth annotation file (images / annotations / categories)
    #[arg(long, value_name = "PATH")]
    pub gt: PathBuf,

    /// Detection results file (list of image_id, category_id, bbox, score)
    #[arg(long, value_name = "PATH")]
    pub dt: PathBuf,

    #[arg(long, value_enum, default_value_t = Mode::Streaming)]
    pub mode: Mode,

    /// Confidence histogram size per cell (streaming mode)
    #[arg(long, default_value_t = DEFAULT_BUCKETS)]
    pub buckets: usize,

    #[command(flatten)]
    pub grid: GridArgs,

    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,

    /// Write the report here instead of standard output
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,

    /// Also write the streaming state snapshot, for later `merge`
    #[arg(long, value_name = "PATH")]
    pub save_state: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct MergeArgs {
    /// State snapshots written by `evaluate --save-state` or `merge`
    #[arg(required = true, value_name = "STATE")]
    pub states: Vec<PathBuf>,

    /// Where to write the merged snapshot
    #[arg(long, short, value_name = "PATH")]
    pub output: PathBuf,

    /// Also print the merged metrics in this format
    #[arg(long, value_enum)]
    pub report: Option<Format>,
}

#[derive(Args, Debug, Clone)]
pub struct SynthBenchArgs {
    /// Ground-truth annotation file to sample images from
    #[arg(long, value_name = "PATH")]
    pub gt: PathBuf,

    /// Comma-separated numbers of images per run
    #[arg(long, value_name = "LIST")]
    pub image_counts: String,

    /// Runs per image count
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Maximum shift as a fraction of box width / height
    #[arg(long, default_value_t = 0.2)]
    pub translate: f64,

    #[arg(long, default_value_t = 0.8)]
    pub scale_low: f64,

    #[arg(long, default_value_t = 1.2)]
    pub scale_high: f64,

    #[arg(long, default_value_t = DEFAULT_BUCKETS)]
    pub buckets: usize,

    #[command(flatten)]
    pub grid: GridArgs,

    /// Per-run CSV (default: standard output)
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,

    /// Per-metric summary CSV
    #[arg(long, value_name = "PATH")]
    pub summary: Option<PathBuf>,

    /// Write each run's ground truth and synthetic detections in the
    /// interchange format into this directory
    #[arg(long, value_name = "DIR")]
    pub export_dir: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn load_ground_truth_file(path: &Path) -> Result<DatasetF64> {
    load_ground_truth(&read(path)?)
        .with_context(|| format!("in ground-truth file {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

/// Evaluates a results file against a ground-truth file. Returns the
/// rendered report; it is also written to `--output` when given.
pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<String> {
    if args.mode == Mode::Exact && args.save_state.is_some() {
        bail!("--save-state needs --mode streaming");
    }
    let gt = load_ground_truth_file(&args.gt)?;
    let dataset = load_detections(&read(&args.dt)?, &gt)
        .with_context(|| format!("in results file {}", args.dt.display()))?;
    let config = args.grid.build(gt.num_classes().max(1), args.buckets)?;

    let (report, snapshot): (MetricReportF64, Option<String>) = match args.mode {
        Mode::Streaming => {
            let mut state = BucketedStateF64::new(config)?;
            state.update(dataset.pairs())?;
            (state.finalize(), Some(state.to_snapshot()))
        }
        Mode::Exact => (evaluate_exact(dataset.pairs(), &config)?, None),
    };

    let rendered = render_report(&report, args.format);
    if let (Some(path), Some(snap)) = (&args.save_state, &snapshot) {
        write(path, snap)?;
    }
    if let Some(path) = &args.output {
        write(path, &rendered)?;
    }
    Ok(rendered)
}

/// Sums state snapshots into one. Returns the merged state.
pub fn cmd_merge(args: &MergeArgs) -> Result<BucketedStateF64> {
    let mut merged: Option<(BucketedStateF64, &Path)> = None;
    for path in &args.states {
        let state = BucketedStateF64::from_snapshot(&read(path)?)
            .with_context(|| format!("in state file {}", path.display()))?;
        merged = Some(match merged {
            None => (state, path),
            Some((mut acc, first)) => {
                acc.merge_from(&state).with_context(|| {
                    format!(
                        "{} and {} cannot be merged",
                        first.display(),
                        path.display()
                    )
                })?;
                (acc, first)
            }
        });
    }
    let (state, _) = merged.expect("clap requires at least one state");
    write(&args.output, &state.to_snapshot())?;
    Ok(state)
}

/// Runs the synthetic benchmark and writes the per-run rows and the summary.
///
/// Row CSV columns: `metric, n_images, run_index, streaming_value,
/// exact_value, abs_error` (abs_error is -1 when either value is undefined).
/// Summary CSV columns: `metric, label, runs, min_error, max_error,
/// mean_error, std_error`.
pub fn cmd_synth_bench(args: &SynthBenchArgs) -> Result<BenchReport> {
    let image_counts: Vec<usize> = parse_list(&args.image_counts).context("--image-counts")?;
    let gt = load_ground_truth_file(&args.gt)?;
    let config = args.grid.build(gt.num_classes().max(1), args.buckets)?;
    if let Some(dir) = &args.export_dir {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let opts = BenchOptions {
        image_counts,
        repeats: args.repeats,
        seed: args.seed,
        perturbation: PerturbationParams {
            translate_fraction: args.translate,
            scale_low: args.scale_low,
            scale_high: args.scale_high,
            seed: args.seed,
        },
        config,
        export_dir: args.export_dir.clone(),
    };
    let report = run_synth_bench(&gt, &opts)?;
    if let Some(path) = &args.output {
        write(path, &report.rows_csv())?;
    }
    if let Some(path) = &args.summary {
        write(path, &report.summary_csv())?;
    }
    Ok(report)
}
