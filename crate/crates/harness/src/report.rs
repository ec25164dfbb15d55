//! Aggregates a finished experiment directory into per-point statistics.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use jaguar_core::diagnostics::mean_std;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::runner::fmt_float;

#[derive(Debug, Clone, Deserialize)]
struct SummaryRow {
    point: usize,
    label: String,
    final_f_value: f64,
    final_grad: f64,
    selected_grad: f64,
}

const METRICS: [&str; 3] = ["final_f_value", "final_grad", "selected_grad"];

/// Mean and sample standard deviation of one metric at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub point: usize,
    pub label: String,
    pub metric: &'static str,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
}

fn read_summary(dir: &Path) -> Result<Vec<SummaryRow>> {
    let path = dir.join("summary.csv");
    if !path.is_file() {
        return Err(HarnessError::Report(format!(
            "{} has no summary.csv; nothing to report",
            dir.display()
        )));
    }
    let mut reader = csv::Reader::from_path(&path)?;
    let rows = reader
        .deserialize()
        .collect::<std::result::Result<Vec<SummaryRow>, _>>()?;
    if rows.is_empty() {
        return Err(HarnessError::Report(format!("{} lists no runs", path.display())));
    }
    Ok(rows)
}

pub fn aggregate(dir: &Path) -> Result<Vec<Aggregate>> {
    let mut rows = read_summary(dir)?;
    rows.sort_by_key(|r| r.point);
    let mut out = Vec::new();
    for group in rows.chunk_by(|a, b| a.point == b.point) {
        for metric in METRICS {
            let values: Vec<f64> = group
                .iter()
                .map(|r| match metric {
                    "final_f_value" => r.final_f_value,
                    "final_grad" => r.final_grad,
                    _ => r.selected_grad,
                })
                .collect();
            let (mean, std) = mean_std(&values);
            out.push(Aggregate {
                point: group[0].point,
                label: group[0].label.clone(),
                metric,
                n: values.len(),
                mean,
                std,
            });
        }
    }
    Ok(out)
}

pub fn render_table(rows: &[Aggregate]) -> String {
    let label_width = rows.iter().map(|r| r.label.len()).max().unwrap_or(5).max(5);
    let mut text = String::new();
    let _ = writeln!(
        text,
        "{:>5}  {:<label_width$}  {:<13}  {:>4}  {:>12}  {:>12}",
        "point", "label", "metric", "n", "mean", "std"
    );
    for r in rows {
        let _ = writeln!(
            text,
            "{:>5}  {:<label_width$}  {:<13}  {:>4}  {:>12.5e}  {:>12.5e}",
            r.point, r.label, r.metric, r.n, r.mean, r.std
        );
    }
    text
}

/// Writes `report.csv` (long format) and `report.txt` into `dir`.
pub fn write_report(dir: &Path) -> Result<Vec<Aggregate>> {
    let rows = aggregate(dir)?;
    let mut w = csv::Writer::from_path(dir.join("report.csv"))?;
    w.write_record(["point", "label", "metric", "n", "mean", "std"])?;
    for r in &rows {
        w.write_record([
            r.point.to_string(),
            r.label.clone(),
            r.metric.to_string(),
            r.n.to_string(),
            fmt_float(r.mean),
            fmt_float(r.std),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::io(dir.join("report.csv"), e))?;
    let txt = dir.join("report.txt");
    fs::write(&txt, render_table(&rows)).map_err(|e| HarnessError::io(&txt, e))?;
    Ok(rows)
}
