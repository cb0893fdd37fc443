//! Synthetic error-margin study: sample images, synthesize predictions by
//! perturbing their ground truth, and compare the streaming metrics with the
//! exact ones.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use cocostream::ingest::{perturb, sample_images, write_coco_ground_truth, write_coco_results};
use cocostream::{
    evaluate_exact, BucketedStateF64, DatasetF64, EvalConfigF64, Metric, MetricReportF64,
    PerturbationParams,
};
use serde::{Deserialize, Serialize};

/// Sentinel for an error that cannot be computed because a value is undefined.
pub const UNDEFINED_ERROR: f64 = -1.0;

pub const ROW_HEADER: [&str; 6] = [
    "metric",
    "n_images",
    "run_index",
    "streaming_value",
    "exact_value",
    "abs_error",
];
pub const SUMMARY_HEADER: [&str; 7] = [
    "metric",
    "label",
    "runs",
    "min_error",
    "max_error",
    "mean_error",
    "std_error",
];

#[derive(Clone, Debug)]
pub struct BenchOptions {
    pub image_counts: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
    pub perturbation: PerturbationParams<f64>,
    pub config: EvalConfigF64,
    /// Writes each run's sampled ground truth and synthetic detections in the
    /// challenge interchange format, for checking against external tools.
    pub export_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorMarginRow {
    pub metric: String,
    pub n_images: usize,
    pub run_index: usize,
    pub streaming_value: f64,
    pub exact_value: f64,
    pub abs_error: f64,
}

impl ErrorMarginRow {
    fn new(metric: Metric, n_images: usize, run_index: usize, streaming: f64, exact: f64) -> Self {
        let abs_error = if streaming >= 0.0 && exact >= 0.0 {
            (streaming - exact).abs()
        } else {
            UNDEFINED_ERROR
        };
        Self {
            metric: metric.key().to_string(),
            n_images,
            run_index,
            streaming_value: streaming,
            exact_value: exact,
            abs_error,
        }
    }

    pub fn is_defined(&self) -> bool {
        self.abs_error >= 0.0
    }
}

/// Error statistics of one metric over every defined run. Statistics are
/// [`UNDEFINED_ERROR`] when no run was defined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub metric: String,
    pub label: String,
    pub runs: usize,
    pub min_error: f64,
    pub max_error: f64,
    pub mean_error: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<ErrorMarginRow>,
    pub summary: Vec<SummaryRow>,
}

impl BenchReport {
    pub fn summary_for(&self, metric: Metric) -> &SummaryRow {
        self.summary
            .iter()
            .find(|s| s.metric == metric.key())
            .expect("summary covers every metric")
    }

    pub fn rows_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(ROW_HEADER).unwrap();
        for r in &self.rows {
            w.write_record([
                r.metric.clone(),
                r.n_images.to_string(),
                r.run_index.to_string(),
                r.streaming_value.to_string(),
                r.exact_value.to_string(),
                r.abs_error.to_string(),
            ])
            .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    pub fn summary_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(SUMMARY_HEADER).unwrap();
        for s in &self.summary {
            w.write_record([
                s.metric.clone(),
                s.label.clone(),
                s.runs.to_string(),
                s.min_error.to_string(),
                s.max_error.to_string(),
                s.mean_error.to_string(),
                s.std_error.to_string(),
            ])
            .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    /// Min / max / mean ± std per metric, laid out like a results table.
    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{:<24} {:>10} {:>10} {:>18}",
            "Metric", "Min Error", "Max Error", "Mean Error"
        )
        .unwrap();
        for s in &self.summary {
            if s.runs == 0 {
                writeln!(
                    out,
                    "{:<24} {:>10} {:>10} {:>18}",
                    s.label, "-", "-", "undefined"
                )
                .unwrap();
            } else {
                let mean = format!("{:.3}±{:.3}", s.mean_error, s.std_error);
                writeln!(
                    out,
                    "{:<24} {:>10.3} {:>10.3} {:>18}",
                    s.label, s.min_error, s.max_error, mean
                )
                .unwrap();
            }
        }
        out
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of one run, derived from the base seed, the image count and the
/// repeat index.
pub fn run_seed(seed: u64, n_images: usize, run_index: usize) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(n_images as u64)) ^ run_index as u64)
}

pub fn streaming_report(dataset: &DatasetF64, config: &EvalConfigF64) -> Result<MetricReportF64> {
    let mut state = BucketedStateF64::new(config.clone())?;
    state.update(dataset.pairs())?;
    Ok(state.finalize())
}

pub fn run_synth_bench(ground_truth: &DatasetF64, opts: &BenchOptions) -> Result<BenchReport> {
    if opts.image_counts.is_empty() {
        bail!("no image counts given");
    }
    if let Some(&n) = opts
        .image_counts
        .iter()
        .find(|&&n| n == 0 || n > ground_truth.len())
    {
        bail!(
            "image count {n} is not in 1..={} (images in the ground-truth file)",
            ground_truth.len()
        );
    }
    opts.perturbation.validate()?;
    opts.config.validate()?;

    let mut rows = Vec::with_capacity(opts.image_counts.len() * opts.repeats * Metric::ALL.len());
    for &n in &opts.image_counts {
        for run in 0..opts.repeats {
            let seed = run_seed(opts.seed, n, run);
            let sampled = sample_images(ground_truth, n, seed)?;
            let params = opts.perturbation.with_seed(splitmix64(seed));
            let dataset = perturb(&sampled, &params)?;

            if let Some(dir) = &opts.export_dir {
                let stem = dir.join(format!("n{n}_run{run}"));
                std::fs::write(
                    stem.with_extension("gt.json"),
                    write_coco_ground_truth(&dataset)?,
                )
                .with_context(|| format!("writing {}", stem.display()))?;
                std::fs::write(
                    stem.with_extension("dt.json"),
                    write_coco_results(&dataset)?,
                )
                .with_context(|| format!("writing {}", stem.display()))?;
            }

            let streaming = streaming_report(&dataset, &opts.config)?;
            let exact = evaluate_exact(dataset.pairs(), &opts.config)?;
            for m in Metric::ALL {
                rows.push(ErrorMarginRow::new(
                    m,
                    n,
                    run,
                    streaming.get(m),
                    exact.get(m),
                ));
            }
        }
    }

    let summary = Metric::ALL.iter().map(|&m| summarize(m, &rows)).collect();
    Ok(BenchReport { rows, summary })
}

fn summarize(metric: Metric, rows: &[ErrorMarginRow]) -> SummaryRow {
    let errs: Vec<f64> = rows
        .iter()
        .filter(|r| r.metric == metric.key() && r.is_defined())
        .map(|r| r.abs_error)
        .collect();
    let mut s = SummaryRow {
        metric: metric.key().to_string(),
        label: metric.label().to_string(),
        runs: errs.len(),
        min_error: UNDEFINED_ERROR,
        max_error: UNDEFINED_ERROR,
        mean_error: UNDEFINED_ERROR,
        std_error: UNDEFINED_ERROR,
    };
    if !errs.is_empty() {
        let n = errs.len() as f64;
        let mean = errs.iter().sum::<f64>() / n;
        s.min_error = errs.iter().copied().fold(f64::INFINITY, f64::min);
        s.max_error = errs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        s.mean_error = mean;
        // population standard deviation
        s.std_error = (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n).sqrt();
    }
    s
}
