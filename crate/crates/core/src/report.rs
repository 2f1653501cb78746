//! Evaluation report files.
//!
//! * `per_image.jsonl`: one [`ImageMetrics`](crate::metrics::ImageMetrics) record per line, manifest order
//! * `summary.json`: aggregate means, count, failures and the effective config
//! * `summary.txt`: the same as a fixed-width table

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::config::Config;
use crate::error::Result;
use crate::io::write_atomic;
use crate::metrics::{Aggregate, EvalOptions, Failure, MetricsReport};

pub const PER_IMAGE_FILE: &str = "per_image.jsonl";
pub const SUMMARY_JSON_FILE: &str = "summary.json";
pub const SUMMARY_TEXT_FILE: &str = "summary.txt";

#[derive(Serialize)]
struct Summary<'a> {
    count: usize,
    failed: usize,
    aggregate: &'a Aggregate,
    failures: &'a [Failure],
    options: &'a EvalOptions,
    config: &'a Config,
}

pub fn per_image_jsonl(report: &MetricsReport) -> String {
    let mut out = String::new();
    for m in &report.per_image {
        out.push_str(&serde_json::to_string(m).expect("metrics serialize"));
        out.push('\n');
    }
    out
}

pub fn summary_json(report: &MetricsReport, cfg: &Config, opts: &EvalOptions) -> String {
    let s = Summary {
        count: report.count,
        failed: report.failures.len(),
        aggregate: &report.aggregate,
        failures: &report.failures,
        options: opts,
        config: cfg,
    };
    let mut text = serde_json::to_string_pretty(&s).expect("summary serializes");
    text.push('\n');
    text
}

/// One line with the four aggregate means, as printed by `eval`.
pub fn aggregate_line(agg: &Aggregate) -> String {
    format!(
        "SAD {:.3}  MSE {:.3}  Grad {:.3}  Conn {:.3}",
        agg.mean_sad, agg.mean_mse, agg.mean_grad, agg.mean_conn
    )
}

pub fn summary_table(report: &MetricsReport) -> String {
    let width = report
        .per_image
        .iter()
        .map(|m| m.id.len())
        .chain(report.failures.iter().map(|f| f.id.len()))
        .max()
        .unwrap_or(0)
        .max(4);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>10}  {:>10}  {:>10}  {:>10}", "id", "SAD", "MSE", "Grad", "Conn");
    for m in &report.per_image {
        let _ = writeln!(
            out,
            "{:<width$}  {:>10.4}  {:>10.4}  {:>10.4}  {:>10.4}",
            m.id, m.sad, m.mse, m.grad, m.conn
        );
    }
    for f in &report.failures {
        let _ = writeln!(out, "{:<width$}  FAILED ({})", f.id, f.kind);
    }
    let a = &report.aggregate;
    let _ = writeln!(
        out,
        "{:<width$}  {:>10.4}  {:>10.4}  {:>10.4}  {:>10.4}",
        "mean", a.mean_sad, a.mean_mse, a.mean_grad, a.mean_conn
    );
    let _ = writeln!(out, "evaluated {}, failed {}", report.count, report.failures.len());
    out
}

pub fn write_report(dir: &Path, report: &MetricsReport, cfg: &Config, opts: &EvalOptions) -> Result<()> {
    write_atomic(dir.join(PER_IMAGE_FILE), per_image_jsonl(report).as_bytes())?;
    write_atomic(dir.join(SUMMARY_JSON_FILE), summary_json(report, cfg, opts).as_bytes())?;
    write_atomic(dir.join(SUMMARY_TEXT_FILE), summary_table(report).as_bytes())
}
