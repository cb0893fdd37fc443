use std::fmt::Write as _;

use clap::ValueEnum;
use cocostream::{Metric, MetricReportF64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Table,
    Json,
    Csv,
}

pub fn render_report(report: &MetricReportF64, format: Format) -> String {
    match format {
        Format::Table => {
            let mut out = String::new();
            writeln!(out, "{:<24} {:>10}", "Metric", "Value").unwrap();
            for (m, v) in report.iter() {
                writeln!(out, "{:<24} {:>10.6}", m.label(), v).unwrap();
            }
            out
        }
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["metric", "label", "value"]).unwrap();
            for (m, v) in report.iter() {
                w.write_record([m.key(), m.label(), &v.to_string()])
                    .unwrap();
            }
            String::from_utf8(w.into_inner().unwrap()).unwrap()
        }
    }
}

/// Reads back the CSV layout written by [`render_report`].
pub fn parse_report_csv(text: &str) -> anyhow::Result<MetricReportF64> {
    let mut report = MetricReportF64::undefined();
    let mut json = serde_json::to_value(report)?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    for rec in r.records() {
        let rec = rec?;
        let m = Metric::from_key(&rec[0])
            .ok_or_else(|| anyhow::anyhow!("unknown metric {}", &rec[0]))?;
        json[m.key()] = serde_json::Value::from(rec[2].parse::<f64>()?);
    }
    report = serde_json::from_value(json)?;
    Ok(report)
}
